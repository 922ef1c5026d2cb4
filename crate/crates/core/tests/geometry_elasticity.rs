use nalgebra::{DMatrix, Vector2};
use nitsche_hybrid::contact::{build_pairings, ConstraintMode};
use nitsche_hybrid::elasticity::{assemble_elasticity, element_stiffness, stress_at, Material};
use nitsche_hybrid::geometry::{
    closest_point, contact_quadrature, gap, FacetTag, InterfaceMesh, Orientation, Point,
};
use nitsche_hybrid::meshgen::{half_disc, rect_mesh, HalfDiscParams, Side};
use nitsche_hybrid::solver::linear_solve;
use nitsche_hybrid::sparse::TripletBuilder;
use proptest::prelude::*;

fn p(x: f64, y: f64) -> Point {
    Vector2::new(x, y)
}

fn polygon(n: usize) -> InterfaceMesh {
    let verts = (0..n)
        .map(|k| {
            let a = (2 * k + 1) as f64 * std::f64::consts::PI / n as f64;
            p(a.cos(), a.sin())
        })
        .collect();
    InterfaceMesh::new(verts, Orientation::Right, true).unwrap()
}

/// Minimum distance over a dense sampling of every segment.
fn brute_force_distance(z: &Point, iface: &InterfaceMesh, per_segment: usize) -> f64 {
    let mut best = f64::INFINITY;
    for s in 0..iface.num_segments() {
        let (a, b) = iface.segment_points(s);
        for k in 0..=per_segment {
            let q = a + (b - a) * (k as f64 / per_segment as f64);
            best = best.min((z - q).norm());
        }
    }
    best
}

#[test]
fn polygon_projection_matches_brute_force() {
    let iface = polygon(64);
    let z = p(0.0, 1.5);
    let cp = closest_point(&z, &iface);
    let expected = p(0.0, (std::f64::consts::PI / 64.0).cos());
    assert!((cp.p0 - expected).norm() < 1e-3, "{:?}", cp.p0);
    let brute = brute_force_distance(&z, &iface, 2000);
    let d = (z - cp.p0).norm();
    assert!(d <= brute + 1e-12);
    assert!(brute - d < 1e-6);
}

proptest! {
    #[test]
    fn closest_point_is_minimal(x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let iface = polygon(16);
        let z = p(x, y);
        let cp = closest_point(&z, &iface);
        let d = (z - cp.p0).norm();
        prop_assert!(d <= brute_force_distance(&z, &iface, 400) + 1e-12);
        for v in iface.vertices() {
            prop_assert!(d <= (z - v).norm() + 1e-12);
        }
        prop_assert!((cp.distance.abs() - d).abs() < 1e-12 || cp.t == 0.0 || cp.t == 1.0);
    }

    #[test]
    fn flat_gap_is_height(x in -0.99..0.99f64, y in -1.0..1.0f64) {
        let iface = InterfaceMesh::subdivide(p(-1.0, 0.0), p(1.0, 0.0), 7, Orientation::Left).unwrap();
        prop_assert!((gap(&p(x, y), &iface) - y).abs() < 1e-14);
    }
}

#[test]
fn two_point_rule_integrates_cubic() {
    let m = rect_mesh(0.0, 2.0, 0.0, 1.0, 1, 1, |side, _| {
        if side == Side::Top {
            FacetTag::Contact
        } else {
            FacetTag::Neumann
        }
    })
    .unwrap();
    let qps = contact_quadrature(&m, FacetTag::Contact, 2, 1).unwrap();
    assert_eq!(qps.len(), 2);
    let facet = &m.facets()[qps[0].facet];
    let a = m.nodes()[facet.nodes[0]];
    let f = |s: f64| 1.0 + 2.0 * s - 3.0 * s * s + 4.0 * s * s * s;
    let l: f64 = 2.0;
    let exact = l + l * l - l.powi(3) + l.powi(4);
    let approx: f64 = qps.iter().map(|q| q.weight * f((q.point - a).norm())).sum();
    assert!((approx - exact).abs() < 1e-12, "{approx} vs {exact}");
}

#[test]
fn half_disc_gaps_follow_circle() {
    let mesh = half_disc(&HalfDiscParams {
        center: p(0.0, 1.0),
        radius: 1.0,
        h_min: 0.02,
        h_max: 0.1,
        r_fine: 0.25,
        growth: 0.25,
        contact_halfwidth: 0.45,
    })
    .unwrap();
    let iface = InterfaceMesh::subdivide(p(-1.5, 0.0), p(1.5, 0.0), 30, Orientation::Left).unwrap();
    let pairs = build_pairings(1, &mesh, &iface, ConstraintMode::Inequality, 2, Some(1)).unwrap();
    assert!(pairs.len() > 40);
    for q in &pairs {
        let circle = 1.0 - (1.0 - q.point.x * q.point.x).sqrt();
        // chords lie inside the disc, so never below the arc
        assert!(q.gap >= circle - 1e-12);
        assert!(q.gap - circle <= q.h * q.h / 8.0 + 1e-12, "x {} gap {} circle {circle}", q.point.x, q.gap);
    }
}

// ---------------------------------------------------------------- stiffness

/// Plane-strain stiffness of a linear triangle written out from the shape
/// function gradients.
fn p1_oracle(coords: [Point; 3], lambda: f64, mu: f64) -> DMatrix<f64> {
    let [a, b, c] = coords;
    let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let area = 0.5 * det;
    let gx = [(b.y - c.y) / det, (c.y - a.y) / det, (a.y - b.y) / det];
    let gy = [(c.x - b.x) / det, (a.x - c.x) / det, (b.x - a.x) / det];
    let mut k = DMatrix::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            k[(2 * i, 2 * j)] = area * ((lambda + 2.0 * mu) * gx[i] * gx[j] + mu * gy[i] * gy[j]);
            k[(2 * i, 2 * j + 1)] = area * (lambda * gx[i] * gy[j] + mu * gy[i] * gx[j]);
            k[(2 * i + 1, 2 * j)] = area * (lambda * gy[i] * gx[j] + mu * gx[i] * gy[j]);
            k[(2 * i + 1, 2 * j + 1)] = area * ((lambda + 2.0 * mu) * gy[i] * gy[j] + mu * gx[i] * gx[j]);
        }
    }
    k
}

#[test]
fn unit_triangle_matches_closed_form() {
    // lambda = mu = 1
    let mat = Material::new(2.5, 0.25).unwrap();
    assert!((mat.lambda - 1.0).abs() < 1e-14 && (mat.mu - 1.0).abs() < 1e-14);
    let coords = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)];
    let k = element_stiffness(&coords, &mat).unwrap();
    let oracle = p1_oracle(coords, 1.0, 1.0);
    assert!((k - &oracle).abs().max() < 1e-12);
    // hand value: K_00 = 0.5 * ((lambda + 2 mu) + mu) = 2
    assert!((oracle[(0, 0)] - 2.0).abs() < 1e-15);
}

/// Q1 stiffness on an axis-aligned rectangle by 3x3 Gauss quadrature.
fn q1_oracle(w: f64, h: f64, lambda: f64, mu: f64) -> DMatrix<f64> {
    let g = (0.6f64).sqrt();
    let rule = [(-g, 5.0 / 9.0), (0.0, 8.0 / 9.0), (g, 5.0 / 9.0)];
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut k = DMatrix::zeros(8, 8);
    for &(xi, wx) in &rule {
        for &(eta, wy) in &rule {
            let mut b = DMatrix::zeros(3, 8);
            for (a, &(sx, sy)) in corners.iter().enumerate() {
                let dx = 0.25 * sx * (1.0 + sy * eta) * 2.0 / w;
                let dy = 0.25 * sy * (1.0 + sx * xi) * 2.0 / h;
                b[(0, 2 * a)] = dx;
                b[(1, 2 * a + 1)] = dy;
                b[(2, 2 * a)] = dy;
                b[(2, 2 * a + 1)] = dx;
            }
            let d = DMatrix::from_row_slice(
                3,
                3,
                &[lambda + 2.0 * mu, lambda, 0.0, lambda, lambda + 2.0 * mu, 0.0, 0.0, 0.0, mu],
            );
            k += b.transpose() * d * &b * (wx * wy * 0.25 * w * h);
        }
    }
    k
}

#[test]
fn rectangle_quad_matches_dense_quadrature() {
    let mat = Material::new(2000.0, 0.3).unwrap();
    let coords = [p(0.5, -0.2), p(2.0, -0.2), p(2.0, 0.5), p(0.5, 0.5)];
    let k = element_stiffness(&coords, &mat).unwrap();
    let oracle = q1_oracle(1.5, 0.7, mat.lambda, mat.mu);
    let scale = oracle.abs().max();
    assert!((k - &oracle).abs().max() < 1e-12 * scale);
}

proptest! {
    #[test]
    fn random_triangles_match_closed_form(
        ax in -1.0..1.0f64, ay in -1.0..1.0f64,
        bx in -1.0..1.0f64, by in -1.0..1.0f64,
        cx in -1.0..1.0f64, cy in -1.0..1.0f64,
        e in 1.0..1e4f64, nu in 0.0..0.49f64,
    ) {
        let (a, b, c) = (p(ax, ay), p(bx, by), p(cx, cy));
        let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        prop_assume!(det.abs() > 0.05);
        let coords = if det < 0.0 { [a, c, b] } else { [a, b, c] };
        let mat = Material::new(e, nu).unwrap();
        let k = element_stiffness(&coords, &mat).unwrap();
        let oracle = p1_oracle(coords, mat.lambda, mat.mu);
        prop_assert!((&k - &oracle).abs().max() <= 1e-12 * oracle.abs().max());
        // symmetric and positive semidefinite
        prop_assert!((&k - k.transpose()).abs().max() == 0.0);
        let eig = k.symmetric_eigenvalues();
        prop_assert!(eig.min() > -1e-10 * eig.max());
    }
}

#[test]
fn uniaxial_compression_gives_uniform_stress() {
    let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 4, 4, |_, _| FacetTag::Neumann).unwrap();
    let mat = Material::new(2000.0, 0.3).unwrap();
    let k = assemble_elasticity(&mesh, &mat).unwrap();
    let eps = 0.01;
    // prescribed values: bottom uy = 0, top uy = -eps, x pinned at the origin
    let mut fixed: Vec<Option<f64>> = vec![None; mesh.num_dofs()];
    for (i, q) in mesh.nodes().iter().enumerate() {
        if q.y == 0.0 {
            fixed[2 * i + 1] = Some(0.0);
        }
        if q.y == 1.0 {
            fixed[2 * i + 1] = Some(-eps);
        }
        if q.x == 0.0 && q.y == 0.0 {
            fixed[2 * i] = Some(0.0);
        }
    }
    let free: Vec<usize> = (0..mesh.num_dofs()).filter(|&d| fixed[d].is_none()).collect();
    let mut index = vec![usize::MAX; mesh.num_dofs()];
    for (r, &d) in free.iter().enumerate() {
        index[d] = r;
    }
    let mut t = TripletBuilder::square(free.len());
    let mut rhs = vec![0.0; free.len()];
    for (i, j, v) in k.iter() {
        if index[i] == usize::MAX {
            continue;
        }
        match fixed[j] {
            None => t.add(index[i], index[j], v),
            Some(val) => rhs[index[i]] -= v * val,
        }
    }
    let x = linear_solve(&t.build(), &rhs).unwrap();
    let mut u = vec![0.0; mesh.num_dofs()];
    for d in 0..mesh.num_dofs() {
        u[d] = fixed[d].unwrap_or_else(|| x[index[d]]);
    }
    // homogeneous solution: sigma_xx = sigma_xy = 0, sigma_yy = -E/(1-nu^2) eps
    let syy = -mat.young / (1.0 - mat.poisson * mat.poisson) * eps;
    for e in 0..mesh.elements().len() {
        let c = mesh.element_coords(e).iter().sum::<Point>() / 4.0;
        let s = stress_at(&mesh, &mat, &u, e, &c);
        assert!(s[0].abs() < 1e-10 * syy.abs(), "{s:?}");
        assert!(s[2].abs() < 1e-10 * syy.abs());
        assert!((s[1] - syy).abs() < 1e-10 * syy.abs());
    }
}

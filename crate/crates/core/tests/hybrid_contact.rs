use nalgebra::{DMatrix, Vector2};
use nitsche_hybrid::bench::b_monotonicity;
use nitsche_hybrid::contact::{
    build_pairings, jump_row, normal_jump, stress_row, ConstraintMode, ContactOperator, NitscheRow,
};
use nitsche_hybrid::elasticity::{element_stiffness, Material};
use nitsche_hybrid::geometry::{
    BodyMesh, ClosestPointResult, ElementKind, FacetTag, InterfaceMesh, Orientation, Point,
};
use nitsche_hybrid::hybrid::{assemble_a0, HybridModel, HybridSpace, HybridSpaceKind};
use nitsche_hybrid::meshgen::{rect_mesh, Side};
use nitsche_hybrid::scenario::Scenario;
use nitsche_hybrid::solver::{build_system, System};
use nitsche_hybrid::sparse::TripletBuilder;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(x: f64, y: f64) -> Point {
    Vector2::new(x, y)
}

fn cp_at(iface: &InterfaceMesh, s: usize, t: f64) -> ClosestPointResult {
    let (a, b) = iface.segment_points(s);
    ClosestPointResult {
        p0: a + (b - a) * t,
        segment: s,
        t,
        normal: iface.normal(s),
        distance: 0.0,
    }
}

// ---------------------------------------------------------------- a0 forms

#[test]
fn string_on_straight_line_is_bar_stiffness() {
    let dir = p(0.8, 0.6);
    let (l1, l2) = (0.7, 1.3);
    let iface = InterfaceMesh::new(
        vec![p(0.0, 0.0), dir * l1, dir * (l1 + l2)],
        Orientation::Left,
        false,
    )
    .unwrap();
    let space = HybridSpace::new(HybridSpaceKind::P1Vector, iface);
    let k = assemble_a0(&HybridModel::String { stiffness: 1.0 }, &space).unwrap().to_dense();
    // tangential projection of the vertex dofs
    let mut t = DMatrix::zeros(3, 6);
    for v in 0..3 {
        t[(v, 2 * v)] = dir.x;
        t[(v, 2 * v + 1)] = dir.y;
    }
    let bar = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0 / l1,
            -1.0 / l1,
            0.0,
            -1.0 / l1,
            1.0 / l1 + 1.0 / l2,
            -1.0 / l2,
            0.0,
            -1.0 / l2,
            1.0 / l2,
        ],
    );
    assert!((&t * &k * t.transpose() - bar).abs().max() < 1e-12);
    // rigid translations are in the kernel
    for c in 0..2 {
        let u = DMatrix::from_fn(6, 1, |i, _| if i % 2 == c { 1.0 } else { 0.0 });
        assert!((&k * u).abs().max() < 1e-12);
    }
}

#[test]
fn beam_element_matches_hermite_integration() {
    let l = 1.7;
    let iface = InterfaceMesh::new(vec![p(0.0, 0.0), p(l, 0.0)], Orientation::Left, false).unwrap();
    let space = HybridSpace::new(HybridSpaceKind::HermiteBeam, iface);
    let k = assemble_a0(&HybridModel::Beam { stiffness: 1.0 }, &space).unwrap().to_dense();
    // second derivatives of the reference basis, slopes scaled by l
    let dd = |t: f64| [-6.0 + 12.0 * t, l * (-4.0 + 6.0 * t), 6.0 - 12.0 * t, l * (-2.0 + 6.0 * t)];
    let g = 0.5 / 3f64.sqrt();
    let mut oracle = DMatrix::zeros(4, 4);
    for t in [0.5 - g, 0.5 + g] {
        let b = dd(t);
        for i in 0..4 {
            for j in 0..4 {
                oracle[(i, j)] += 0.5 * b[i] * b[j] / (l * l * l);
            }
        }
    }
    assert!((k.clone() - &oracle).abs().max() < 1e-12 * oracle.abs().max());
    assert!((oracle[(0, 0)] - 12.0 / l.powi(3)).abs() < 1e-12);
    // affine deflections cost nothing
    for mode in [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, l, 1.0]] {
        let u = DMatrix::from_row_slice(4, 1, &mode);
        assert!((&k * u).abs().max() < 1e-12);
    }
}

#[test]
fn hermite_midpoint_value() {
    let iface = InterfaceMesh::new(vec![p(0.0, 0.0), p(1.0, 0.0)], Orientation::Left, false).unwrap();
    let space = HybridSpace::new(HybridSpaceKind::HermiteBeam, iface.clone());
    let dofs = [0.0, 1.0, 0.0, -1.0];
    // H2(1/2) = 1/8, H4(1/2) = -1/8
    let t: f64 = 0.5;
    let h2 = t * (1.0 - t) * (1.0 - t);
    let h4 = -t * t * (1.0 - t);
    let expected = h2 * 1.0 + h4 * -1.0;
    assert!((expected - 0.25).abs() < 1e-15);
    assert!((space.eval_normal_disp(&dofs, &cp_at(&iface, 0, 0.5)) - expected).abs() < 1e-15);
}

proptest! {
    #[test]
    fn a0_is_symmetric_psd(
        ys in proptest::collection::vec(-0.3..0.3f64, 3..7),
        k in 0.0..100.0f64,
        beam in any::<bool>(),
    ) {
        let verts: Vec<Point> = ys.iter().enumerate().map(|(i, &y)| p(i as f64 * 0.5, y)).collect();
        let iface = InterfaceMesh::new(verts, Orientation::Left, false).unwrap();
        let (kind, model) = if beam {
            (HybridSpaceKind::HermiteBeam, HybridModel::Beam { stiffness: k })
        } else {
            (HybridSpaceKind::P1Vector, HybridModel::String { stiffness: k })
        };
        let a = assemble_a0(&model, &HybridSpace::new(kind, iface)).unwrap().to_dense();
        prop_assert!((&a - a.transpose()).abs().max() <= 1e-12 * (1.0 + a.abs().max()));
        let eig = a.symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-10 * (1.0 + eig.max()));
    }

    #[test]
    fn normal_disp_row_matches_evaluation(
        seed in any::<u64>(),
        t in 0.0..1.0f64,
        kind in 0usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let verts: Vec<Point> = (0..5).map(|i| p(i as f64 * 0.3, rng.gen_range(-0.1..0.1))).collect();
        let iface = InterfaceMesh::new(verts, Orientation::Left, false).unwrap();
        let kind = [HybridSpaceKind::P0Normal, HybridSpaceKind::P1Vector, HybridSpaceKind::HermiteBeam][kind];
        let space = HybridSpace::new(kind, iface.clone());
        let dofs: Vec<f64> = (0..space.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = rng.gen_range(0..iface.num_segments());
        let cp = cp_at(&iface, s, t);
        let row = space.normal_disp_row(&cp).dot(&dofs);
        prop_assert!((row - space.eval_normal_disp(&dofs, &cp)).abs() < 1e-14);
        // independent evaluation
        let (a, b) = iface.segment(s);
        let n = iface.normal(s);
        let expected = match kind {
            HybridSpaceKind::P0Normal => dofs[s],
            HybridSpaceKind::P1Vector => {
                let ua = p(dofs[2 * a], dofs[2 * a + 1]);
                let ub = p(dofs[2 * b], dofs[2 * b + 1]);
                n.dot(&(ua * (1.0 - t) + ub * t))
            }
            HybridSpaceKind::HermiteBeam => {
                let l = iface.length(s);
                let h = [
                    (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
                    t * (1.0 - t) * (1.0 - t),
                    t * t * (3.0 - 2.0 * t),
                    t * t * (t - 1.0),
                ];
                h[0] * dofs[2 * a] + l * h[1] * dofs[2 * a + 1] + h[2] * dofs[2 * b] + l * h[3] * dofs[2 * b + 1]
            }
        };
        prop_assert!((row - expected).abs() < 1e-13);
    }
}

// ---------------------------------------------------------------- pairings

fn block_below(top: f64) -> BodyMesh {
    rect_mesh(-1.0, 1.0, top - 1.0, top, 4, 2, |side, _| {
        if side == Side::Top {
            FacetTag::Contact
        } else {
            FacetTag::Neumann
        }
    })
    .unwrap()
}

fn flat(orient: Orientation) -> InterfaceMesh {
    InterfaceMesh::subdivide(p(-1.5, 0.0), p(1.5, 0.0), 6, orient).unwrap()
}

#[test]
fn touching_and_offset_gaps() {
    // normal pointing down into the block
    let iface = flat(Orientation::Right);
    for (top, expected) in [(0.0, 0.0), (-0.1, 0.1)] {
        let pairs = build_pairings(1, &block_below(top), &iface, ConstraintMode::Inequality, 2, None).unwrap();
        assert!(!pairs.is_empty());
        for q in pairs {
            assert!((q.gap - expected).abs() < 1e-14);
        }
    }
}

#[test]
fn rigid_approach_jump() {
    let iface = flat(Orientation::Left);
    let mesh = rect_mesh(-1.0, 1.0, 0.0, 1.0, 4, 2, |side, _| {
        if side == Side::Bottom {
            FacetTag::Contact
        } else {
            FacetTag::Neumann
        }
    })
    .unwrap();
    let space = HybridSpace::new(HybridSpaceKind::P0Normal, iface.clone());
    let pairs = build_pairings(1, &mesh, &iface, ConstraintMode::Inequality, 2, None).unwrap();
    let h0 = vec![0.0; space.dof_count()];
    let delta = 0.01;
    let zero = vec![0.0; mesh.num_dofs()];
    let down: Vec<f64> = (0..mesh.num_dofs()).map(|d| if d % 2 == 1 { -delta } else { 0.0 }).collect();
    for q in &pairs {
        assert!((q.normal - p(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(normal_jump(q, &mesh, &zero, &space, &h0), 0.0);
        // the jump is measured as v0 - v_i, so moving the body toward the
        // layer by delta gives +delta
        assert!((normal_jump(q, &mesh, &down, &space, &h0) - delta).abs() < 1e-15);
    }
}

/// Bilinear interpolation on an axis-aligned rectangle, written from scratch.
fn q1_value(mesh: &BodyMesh, e: usize, u: &[f64], z: &Point) -> Point {
    let c = mesh.element_coords(e);
    let (x0, x1) = (c.iter().map(|q| q.x).fold(f64::INFINITY, f64::min), c.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (c.iter().map(|q| q.y).fold(f64::INFINITY, f64::min), c.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max));
    let sx = (z.x - x0) / (x1 - x0);
    let sy = (z.y - y0) / (y1 - y0);
    let mut out = p(0.0, 0.0);
    for &node in &mesh.elements()[e] {
        let q = mesh.nodes()[node];
        let wx = if q.x == x0 { 1.0 - sx } else { sx };
        let wy = if q.y == y0 { 1.0 - sy } else { sy };
        out += p(u[2 * node], u[2 * node + 1]) * (wx * wy);
    }
    out
}

proptest! {
    #[test]
    fn jump_matches_independent_evaluation(seed in any::<u64>(), p1 in any::<bool>(), body in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let iface = InterfaceMesh::subdivide(p(-1.0, 0.02), p(1.0, -0.03), 5, Orientation::Left).unwrap();
        let side = if body == 1 { Side::Bottom } else { Side::Top };
        let (y0, y1) = if body == 1 { (0.0, 1.0) } else { (-1.0, 0.0) };
        let mesh = rect_mesh(-1.0, 1.0, y0, y1, 5, 3, |s, _| if s == side { FacetTag::Contact } else { FacetTag::Neumann }).unwrap();
        let kind = if p1 { HybridSpaceKind::P1Vector } else { HybridSpaceKind::P0Normal };
        let space = HybridSpace::new(kind, iface.clone());
        let u: Vec<f64> = (0..mesh.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..space.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pairs = build_pairings(body, &mesh, &iface, ConstraintMode::Inequality, 2, None).unwrap();
        let mut full = u.clone();
        full.extend_from_slice(&h);
        for q in &pairs {
            let (a, b) = iface.segment(q.segment);
            let n_iface = iface.normal(q.segment);
            let v0 = match kind {
                HybridSpaceKind::P0Normal => h[q.segment],
                _ => n_iface.dot(&(p(h[2 * a], h[2 * a + 1]) * (1.0 - q.t) + p(h[2 * b], h[2 * b + 1]) * q.t)),
            };
            // body 2 sees the layer normal reversed
            let v0 = if body == 1 { v0 } else { -v0 };
            let expected = v0 - q.normal.dot(&q1_value(&mesh, q.element, &u, &q.point));
            let got = normal_jump(q, &mesh, &u, &space, &h);
            prop_assert!((got - expected).abs() < 1e-13);
            let row = jump_row(q, &mesh, &space, 0, mesh.num_dofs());
            prop_assert!((row.dot(&full) - expected).abs() < 1e-13);
        }
    }
}

// ---------------------------------------------------------------- Nitsche operator

/// One triangle above a one-segment layer, one pairing.
fn single_pairing(mode: ConstraintMode) -> (DMatrix<f64>, ContactOperator) {
    let mesh = BodyMesh::new(
        vec![p(0.0, 0.1), p(1.0, 0.1), p(0.4, 1.0)],
        ElementKind::Tri,
        vec![vec![0, 1, 2]],
        vec![
            ([0, 1], FacetTag::Contact),
            ([1, 2], FacetTag::Neumann),
            ([2, 0], FacetTag::Neumann),
        ],
    )
    .unwrap();
    let iface = InterfaceMesh::new(vec![p(-0.5, 0.0), p(1.5, 0.0)], Orientation::Left, false).unwrap();
    let space = HybridSpace::new(HybridSpaceKind::P0Normal, iface.clone());
    let mat = Material::new(100.0, 0.3).unwrap();
    let pairs = build_pairings(1, &mesh, &iface, mode, 1, Some(1)).unwrap();
    assert_eq!(pairs.len(), 1);
    let q = &pairs[0];
    let s = stress_row(q, &mesh, &mat, 0);
    let j = jump_row(q, &mesh, &space, 0, 6);
    let op = ContactOperator::new(vec![NitscheRow::new(s, j, 1000.0, q.weight, q.gap, mode)]);
    let ke = element_stiffness(&mesh.element_coords(0), &mat).unwrap();
    let mut k = DMatrix::zeros(7, 7);
    k.view_mut((0, 0), (6, 6)).copy_from(&ke);
    (k, op)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #[test]
    fn single_pairing_residual_is_gradient(seed in any::<u64>(), eq in any::<bool>()) {
        let mode = if eq { ConstraintMode::Equality } else { ConstraintMode::Inequality };
        let (k, op) = single_pairing(mode);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..7).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let sigma = op.rows[0].sigma(&v);
        let g1 = op.rows[0].g.iter().map(|(_, x)| x.abs()).sum::<f64>();
        let h = 1e-6;
        prop_assume!(sigma.abs() > 10.0 * g1 * h);
        let la = |x: &[f64]| {
            let xv = nalgebra::DVector::from_column_slice(x);
            0.5 * xv.dot(&(&k * &xv)) - x.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() + op.energy(x)
        };
        let mut r: Vec<f64> = (&k * nalgebra::DVector::from_column_slice(&v)).iter().zip(&f).map(|(a, b)| a - b).collect();
        op.add_residual(&v, &mut r);
        let scale = max_abs(&r).max(1.0);
        for i in 0..7 {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += h;
            vm[i] -= h;
            let fd = (la(&vp) - la(&vm)) / (2.0 * h);
            prop_assert!((fd - r[i]).abs() <= 1e-6 * scale, "dof {}: fd {} residual {}", i, fd, r[i]);
        }
    }
}

fn patch_system(mode: ConstraintMode) -> System {
    build_system(&Scenario::patch(mode, 1.0, 3).build_problem().unwrap()).unwrap()
}

fn random_state(sys: &System, rng: &mut ChaCha8Rng, amp: f64) -> Vec<f64> {
    (0..sys.layout.total()).map(|_| rng.gen_range(-amp..amp)).collect()
}

#[test]
fn open_contact_jacobian_is_minus_c() {
    let sys = patch_system(ConstraintMode::Inequality);
    let n = sys.layout.total();
    let mut t = TripletBuilder::square(n);
    sys.contact.add_jacobian(&vec![false; sys.contact.len()], &mut t);
    let got = t.build().to_dense();
    let mut oracle = DMatrix::zeros(n, n);
    for r in &sys.contact.rows {
        for (i, a) in r.s.iter() {
            for (j, b) in r.s.iter() {
                oracle[(i, j)] -= r.weight / r.gamma * a * b;
            }
        }
    }
    assert!((got - oracle).abs().max() < 1e-10);
}

#[test]
fn equality_jacobian_is_state_independent() {
    let sys = patch_system(ConstraintMode::Equality);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = sys.jacobian(&sys.contact.active_set(&random_state(&sys, &mut rng, 1.0)));
    let b = sys.jacobian(&sys.contact.active_set(&random_state(&sys, &mut rng, 1.0)));
    assert_eq!(a.to_dense(), b.to_dense());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn contact_jacobian_matches_finite_differences(seed in any::<u64>()) {
        let sys = patch_system(ConstraintMode::Inequality);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_state(&sys, &mut rng, 1e-3);
        let h = 1e-7;
        let margin = sys.contact.rows.iter().map(|r| r.sigma(&v).abs() / r.g.iter().map(|(_, x)| x.abs()).sum::<f64>()).fold(f64::INFINITY, f64::min);
        prop_assume!(margin > 10.0 * h);
        let n = sys.layout.total();
        let mut t = TripletBuilder::square(n);
        sys.contact.add_jacobian(&sys.contact.active_set(&v), &mut t);
        let jac = t.build().to_dense();
        let scale = jac.abs().max();
        for c in 0..n {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[c] += h;
            vm[c] -= h;
            let mut rp = vec![0.0; n];
            let mut rm = vec![0.0; n];
            sys.contact.add_residual(&vp, &mut rp);
            sys.contact.add_residual(&vm, &mut rm);
            for r in 0..n {
                let fd = (rp[r] - rm[r]) / (2.0 * h);
                prop_assert!((fd - jac[(r, c)]).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn b_is_monotone(seed in any::<u64>(), amp in 1e-4..1e-1f64) {
        let sys = patch_system(ConstraintMode::Inequality);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_state(&sys, &mut rng, amp);
        let w = random_state(&sys, &mut rng, amp);
        let (lhs, rhs) = b_monotonicity(&sys.contact, &v, &w);
        prop_assert!(lhs >= rhs - 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
        let (lhs, rhs) = b_monotonicity(&sys.contact, &v, &v);
        prop_assert!(lhs == 0.0 && rhs == 0.0);
    }
}

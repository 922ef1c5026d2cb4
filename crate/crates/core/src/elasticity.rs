//! Plane-strain linear elasticity on P1 triangles and Q1 quadrilaterals.
//!
//! Body degrees of freedom are numbered `2 * node + component`.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{BodyMesh, BoundaryFacet, ElementKind, FacetQuadPoint, Point};
use crate::sparse::{SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// Plane-strain Lamé parameters `(lambda, mu)`.
pub fn lame_plane_strain(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0) || !young.is_finite() {
        return Err(Error::InvalidMaterial(format!(
            "Young's modulus must be positive, got {young}"
        )));
    }
    if !(0.0..0.5).contains(&poisson) {
        return Err(Error::InvalidMaterial(format!(
            "Poisson ratio must lie in [0, 0.5), got {poisson}"
        )));
    }
    let lambda = poisson * young / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    Ok((lambda, mu))
}

impl Material {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        let (lambda, mu) = lame_plane_strain(young, poisson)?;
        Ok(Self {
            young,
            poisson,
            lambda,
            mu,
        })
    }

    /// Voigt constitutive matrix acting on `(e_xx, e_yy, 2 e_xy)`.
    pub fn constitutive(&self) -> Matrix3<f64> {
        let (l, m) = (self.lambda, self.mu);
        Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m)
    }
}

const QUAD_CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Shape function values, physical gradients (`grads[a] = ∇N_a`) and the
/// Jacobian determinant at a reference point. Triangles use barycentric
/// reference coordinates `(xi, eta)` on the unit triangle.
pub(crate) struct ShapeEval {
    pub values: Vec<f64>,
    pub grads: Vec<Vector2<f64>>,
    pub det: f64,
}

pub(crate) fn shape_eval(kind: ElementKind, coords: &[Point], xi: f64, eta: f64) -> ShapeEval {
    let (values, ref_grads): (Vec<f64>, Vec<Vector2<f64>>) = match kind {
        ElementKind::Tri => (
            vec![1.0 - xi - eta, xi, eta],
            vec![
                Vector2::new(-1.0, -1.0),
                Vector2::new(1.0, 0.0),
                Vector2::new(0.0, 1.0),
            ],
        ),
        ElementKind::Quad => QUAD_CORNERS
            .iter()
            .map(|&(a, b)| {
                (
                    0.25 * (1.0 + a * xi) * (1.0 + b * eta),
                    Vector2::new(0.25 * a * (1.0 + b * eta), 0.25 * b * (1.0 + a * xi)),
                )
            })
            .unzip(),
    };
    // J[i][j] = d x_i / d xi_j
    let mut jac = Matrix2::zeros();
    for (p, g) in coords.iter().zip(&ref_grads) {
        jac += p * g.transpose();
    }
    let det = jac.determinant();
    let inv_t = jac
        .try_inverse()
        .map(|m| m.transpose())
        .unwrap_or_else(Matrix2::zeros);
    let grads = ref_grads.iter().map(|g| inv_t * g).collect();
    ShapeEval { values, grads, det }
}

/// Reference coordinates of a physical point (extrapolates outside).
pub(crate) fn reference_coords(kind: ElementKind, coords: &[Point], p: &Point) -> (f64, f64) {
    match kind {
        ElementKind::Tri => {
            let e1 = coords[1] - coords[0];
            let e2 = coords[2] - coords[0];
            let m = Matrix2::new(e1.x, e2.x, e1.y, e2.y);
            let r = m.try_inverse().expect("non-degenerate triangle") * (p - coords[0]);
            (r.x, r.y)
        }
        ElementKind::Quad => {
            let (mut xi, mut eta) = (0.0, 0.0);
            for _ in 0..50 {
                let s = shape_eval(kind, coords, xi, eta);
                let x: Point = coords
                    .iter()
                    .zip(&s.values)
                    .map(|(c, n)| c * *n)
                    .sum();
                let r = x - p;
                let mut jac = Matrix2::zeros();
                for (c, &(a, b)) in coords.iter().zip(QUAD_CORNERS.iter()) {
                    let g = Vector2::new(0.25 * a * (1.0 + b * eta), 0.25 * b * (1.0 + a * xi));
                    jac += c * g.transpose();
                }
                let d = jac.try_inverse().expect("non-degenerate quad") * r;
                xi -= d.x;
                eta -= d.y;
                if d.norm() < 1e-15 {
                    break;
                }
            }
            (xi, eta)
        }
    }
}

/// Strain-displacement matrix rows `(e_xx, e_yy, 2 e_xy)` for given gradients.
fn strain_matrix(grads: &[Vector2<f64>]) -> DMatrix<f64> {
    let n = grads.len();
    let mut b = DMatrix::zeros(3, 2 * n);
    for (a, g) in grads.iter().enumerate() {
        b[(0, 2 * a)] = g.x;
        b[(1, 2 * a + 1)] = g.y;
        b[(2, 2 * a)] = g.y;
        b[(2, 2 * a + 1)] = g.x;
    }
    b
}

fn kind_for(coords: &[Point]) -> ElementKind {
    if coords.len() == 3 {
        ElementKind::Tri
    } else {
        ElementKind::Quad
    }
}

/// Quadrature rule on the reference element: `(xi, eta, weight)`.
fn volume_rule(kind: ElementKind) -> Vec<(f64, f64, f64)> {
    match kind {
        ElementKind::Tri => vec![(1.0 / 3.0, 1.0 / 3.0, 0.5)],
        ElementKind::Quad => {
            let g = 1.0 / 3f64.sqrt();
            vec![(-g, -g, 1.0), (g, -g, 1.0), (g, g, 1.0), (-g, g, 1.0)]
        }
    }
}

/// Element stiffness matrix (6x6 for triangles, 8x8 for quads, 2x2 Gauss).
/// A degenerate element is reported with `element = 0`; assembly substitutes
/// the real index.
pub fn element_stiffness(coords: &[Point], mat: &Material) -> Result<DMatrix<f64>> {
    let kind = kind_for(coords);
    let d = mat.constitutive();
    let d = DMatrix::from_iterator(3, 3, d.iter().copied());
    let mut k = DMatrix::zeros(2 * coords.len(), 2 * coords.len());
    for (xi, eta, w) in volume_rule(kind) {
        let s = shape_eval(kind, coords, xi, eta);
        if s.det <= 0.0 {
            return Err(Error::DegenerateElement {
                element: 0,
                jacobian: s.det,
            });
        }
        let b = strain_matrix(&s.grads);
        k += b.transpose() * &d * &b * (w * s.det);
    }
    // exact symmetry
    let kt = k.transpose();
    Ok((k + kt) * 0.5)
}

pub fn assemble_elasticity(mesh: &BodyMesh, mat: &Material) -> Result<SparseMatrix> {
    let n = mesh.num_dofs();
    let mut t = TripletBuilder::square(n);
    for (e, conn) in mesh.elements().iter().enumerate() {
        let ke = element_stiffness(&mesh.element_coords(e), mat).map_err(|err| match err {
            Error::DegenerateElement { jacobian, .. } => Error::DegenerateElement {
                element: e,
                jacobian,
            },
            other => other,
        })?;
        let dofs: Vec<usize> = conn.iter().flat_map(|&a| [2 * a, 2 * a + 1]).collect();
        for (r, &gi) in dofs.iter().enumerate() {
            for (c, &gj) in dofs.iter().enumerate() {
                t.add(gi, gj, ke[(r, c)]);
            }
        }
    }
    Ok(t.build())
}

/// Consistent nodal load for a constant body force.
pub fn assemble_load(mesh: &BodyMesh, force: &Vector2<f64>) -> Vec<f64> {
    let mut f = vec![0.0; mesh.num_dofs()];
    let kind = mesh.kind();
    let rule = match kind {
        ElementKind::Tri => vec![(1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0), (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0), (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0)],
        ElementKind::Quad => volume_rule(kind),
    };
    for (e, conn) in mesh.elements().iter().enumerate() {
        let coords = mesh.element_coords(e);
        for &(xi, eta, w) in &rule {
            let s = shape_eval(kind, &coords, xi, eta);
            for (a, &node) in conn.iter().enumerate() {
                let c = s.values[a] * w * s.det;
                f[2 * node] += c * force.x;
                f[2 * node + 1] += c * force.y;
            }
        }
    }
    f
}

/// Consistent nodal load for a constant traction on the selected facets.
pub fn assemble_traction(
    mesh: &BodyMesh,
    traction: &Vector2<f64>,
    mut select: impl FnMut(&BoundaryFacet) -> bool,
) -> Vec<f64> {
    let mut f = vec![0.0; mesh.num_dofs()];
    for (i, facet) in mesh.facets().iter().enumerate() {
        if !select(facet) {
            continue;
        }
        let half = 0.5 * mesh.facet_length(i);
        for &node in &facet.nodes {
            f[2 * node] += half * traction.x;
            f[2 * node + 1] += half * traction.y;
        }
    }
    f
}

/// Displacement of body `u` at point `p` using element `e`'s shape functions.
pub fn eval_displacement(mesh: &BodyMesh, e: usize, u: &[f64], p: &Point) -> Vector2<f64> {
    let (dofs, n) = displacement_row(mesh, e, p);
    let mut out = Vector2::zeros();
    for (k, &node) in dofs.iter().enumerate() {
        out.x += n[k] * u[2 * node];
        out.y += n[k] * u[2 * node + 1];
    }
    out
}

/// Element nodes and shape values at `p`.
pub(crate) fn displacement_row(mesh: &BodyMesh, e: usize, p: &Point) -> (Vec<usize>, Vec<f64>) {
    let coords = mesh.element_coords(e);
    let (xi, eta) = reference_coords(mesh.kind(), &coords, p);
    let s = shape_eval(mesh.kind(), &coords, xi, eta);
    (mesh.elements()[e].clone(), s.values)
}

/// Stress `(s_xx, s_yy, s_xy)` in element `e` at point `p`.
pub fn stress_at(mesh: &BodyMesh, mat: &Material, u: &[f64], e: usize, p: &Point) -> Vector3<f64> {
    let coords = mesh.element_coords(e);
    let (xi, eta) = reference_coords(mesh.kind(), &coords, p);
    let s = shape_eval(mesh.kind(), &coords, xi, eta);
    let b = strain_matrix(&s.grads);
    let ue = nalgebra::DVector::from_iterator(
        2 * coords.len(),
        mesh.elements()[e].iter().flat_map(|&a| [u[2 * a], u[2 * a + 1]]),
    );
    let eps = b * ue;
    mat.constitutive() * Vector3::new(eps[0], eps[1], eps[2])
}

/// Linear functional `w -> n·σ(w)·n` evaluated in element `e` at `p`, as
/// `(body dof indices, coefficients)`.
pub fn sigma_n_row(
    mesh: &BodyMesh,
    mat: &Material,
    e: usize,
    p: &Point,
    normal: &Vector2<f64>,
) -> (Vec<usize>, Vec<f64>) {
    let coords = mesh.element_coords(e);
    let (xi, eta) = reference_coords(mesh.kind(), &coords, p);
    let s = shape_eval(mesh.kind(), &coords, xi, eta);
    let b = strain_matrix(&s.grads);
    let m = Vector3::new(normal.x * normal.x, normal.y * normal.y, 2.0 * normal.x * normal.y);
    let dm = mat.constitutive().transpose() * m;
    let dm = nalgebra::DVector::from_iterator(3, dm.iter().copied());
    let row = b.transpose() * dm;
    let dofs = mesh.elements()[e]
        .iter()
        .flat_map(|&a| [2 * a, 2 * a + 1])
        .collect();
    (dofs, row.iter().copied().collect())
}

/// Normal-normal stress at a facet quadrature point, using the facet's
/// adjacent element and outward normal.
pub fn sigma_n(mesh: &BodyMesh, mat: &Material, u: &[f64], qp: &FacetQuadPoint) -> Result<f64> {
    let facet = mesh
        .facets()
        .get(qp.facet)
        .ok_or_else(|| Error::Topology(format!("facet {} does not exist", qp.facet)))?;
    if facet.element >= mesh.elements().len() {
        return Err(Error::Topology(format!(
            "facet {} has no adjacent element",
            qp.facet
        )));
    }
    let n = mesh.facet_normal(qp.facet);
    let (dofs, row) = sigma_n_row(mesh, mat, facet.element, &qp.point, &n);
    Ok(dofs.iter().zip(&row).map(|(&d, c)| c * u[d]).sum())
}

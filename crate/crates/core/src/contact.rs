//! Nitsche contact terms between a body and the hybrid layer.
//!
//! Every pairing is reduced to two global rows: `s` evaluates the body's
//! normal-normal stress and `j` the normal jump. With `gamma = gamma0 / h`
//! and `g = s - gamma j`, the Nitsche stress is `Sigma = g·v + gamma rho`.

use std::fmt;

use crate::elasticity::{displacement_row, sigma_n_row, Material};
use crate::error::{Error, Result};
use crate::geometry::{closest_point, contact_quadrature_by, BodyMesh, FacetTag, InterfaceMesh, Point};
use crate::hybrid::HybridSpace;
use crate::sparse::{SparseRow, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintMode {
    Equality,
    Inequality,
}

impl ConstraintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::Equality => "equality",
            ConstraintMode::Inequality => "inequality",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equality" => Some(ConstraintMode::Equality),
            "inequality" => Some(ConstraintMode::Inequality),
            _ => None,
        }
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `S(Sigma)`: identity for equality, `min(Sigma, 0)` for inequality.
pub fn s_eval(sigma: f64, mode: ConstraintMode) -> f64 {
    match mode {
        ConstraintMode::Equality => sigma,
        ConstraintMode::Inequality => sigma.min(0.0),
    }
}

/// Generalized derivative selector; ties at zero are inactive.
pub fn s_active(sigma: f64, mode: ConstraintMode) -> bool {
    match mode {
        ConstraintMode::Equality => true,
        ConstraintMode::Inequality => sigma < 0.0,
    }
}

/// How the per-pairing penalty `gamma0 / h` is formed from `c * E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaScaling {
    /// `gamma0 = c E`, penalty `c E / h` with the local facet length.
    #[default]
    Facet,
    /// `gamma0 = c E h`, penalty `c E` independent of the mesh.
    Fixed,
}

impl GammaScaling {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaScaling::Facet => "facet",
            GammaScaling::Fixed => "fixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "facet" => Some(GammaScaling::Facet),
            "fixed" => Some(GammaScaling::Fixed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NitscheParams {
    /// Multiplier `c` in `c * E`.
    pub gamma_mult: f64,
    pub young: f64,
    pub scaling: GammaScaling,
}

impl NitscheParams {
    pub fn gamma0(&self, h: f64) -> f64 {
        match self.scaling {
            GammaScaling::Facet => self.gamma_mult * self.young,
            GammaScaling::Fixed => self.gamma_mult * self.young * h,
        }
    }

    /// Per-pairing penalty `gamma0 / h`.
    pub fn gamma(&self, h: f64) -> f64 {
        self.gamma0(h) / h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPairing {
    /// 1 or 2.
    pub body: usize,
    pub point: Point,
    pub weight: f64,
    pub h: f64,
    pub facet: usize,
    pub element: usize,
    pub p0: Point,
    pub segment: usize,
    pub t: f64,
    /// Interface normal pointing into this body.
    pub normal: Point,
    pub gap: f64,
    pub mode: ConstraintMode,
}

impl ContactPairing {
    /// Closest-point record as seen from the interface (normal toward body 1).
    pub(crate) fn closest(&self, interface: &InterfaceMesh) -> crate::geometry::ClosestPointResult {
        crate::geometry::ClosestPointResult {
            p0: self.p0,
            segment: self.segment,
            t: self.t,
            normal: interface.normal(self.segment),
            distance: self.orientation_sign() * self.gap,
        }
    }

    fn orientation_sign(&self) -> f64 {
        if self.body == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

/// One pairing per contact quadrature point of `mesh`. The interface normal
/// points into body 1; body 2 sees it reversed. Gaps are frozen here.
///
/// With `subdivisions = None` each facet is split into enough pieces that no
/// piece is longer than the shortest interface segment.
pub fn build_pairings(
    body: usize,
    mesh: &BodyMesh,
    interface: &InterfaceMesh,
    mode: ConstraintMode,
    n_gauss: usize,
    subdivisions: Option<usize>,
) -> Result<Vec<ContactPairing>> {
    let seg = interface.min_segment_length();
    let qps = contact_quadrature_by(mesh, FacetTag::Contact, n_gauss, |h| match subdivisions {
        Some(s) => s,
        None => (h / seg - 1e-9).ceil().max(1.0) as usize,
    })?;
    if qps.is_empty() {
        return Err(Error::EmptyContact(body));
    }
    let sign = if body == 1 { 1.0 } else { -1.0 };
    Ok(qps
        .iter()
        .map(|qp| {
            let cp = closest_point(&qp.point, interface);
            ContactPairing {
                body,
                point: qp.point,
                weight: qp.weight,
                h: qp.h,
                facet: qp.facet,
                element: mesh.facets()[qp.facet].element,
                p0: cp.p0,
                segment: cp.segment,
                t: cp.t,
                normal: cp.normal * sign,
                gap: cp.distance * sign,
                mode,
            }
        })
        .collect())
}

/// Row `j` (body dofs first, hybrid dofs shifted by `hybrid_offset`) with
/// `j · v = n · (v0(p0) - v_i(z))`.
pub fn jump_row(
    pairing: &ContactPairing,
    mesh: &BodyMesh,
    space: &HybridSpace,
    body_offset: usize,
    hybrid_offset: usize,
) -> SparseRow {
    let n = pairing.normal;
    let (nodes, shape) = displacement_row(mesh, pairing.element, &pairing.point);
    let mut idx = Vec::with_capacity(2 * nodes.len());
    let mut val = Vec::with_capacity(2 * nodes.len());
    for (a, &node) in nodes.iter().enumerate() {
        idx.push(body_offset + 2 * node);
        val.push(-shape[a] * n.x);
        idx.push(body_offset + 2 * node + 1);
        val.push(-shape[a] * n.y);
    }
    let mut row = SparseRow::new(idx, val);
    let h = space.normal_disp_row(&pairing.closest(space.interface()));
    row.add_scaled(pairing.orientation_sign(), &h.shifted(hybrid_offset));
    row.compress()
}

/// Normal jump `[v_n] = n · (v0(p0) - v_i(z))`.
pub fn normal_jump(
    pairing: &ContactPairing,
    mesh: &BodyMesh,
    body_disp: &[f64],
    space: &HybridSpace,
    hybrid_dofs: &[f64],
) -> f64 {
    let v0 = space.eval_normal_disp(hybrid_dofs, &pairing.closest(space.interface()));
    let vi = crate::elasticity::eval_displacement(mesh, pairing.element, body_disp, &pairing.point);
    pairing.orientation_sign() * v0 - pairing.normal.dot(&vi)
}

/// Row `s` with `s · v = sigma_n(v_i)` at the pairing point.
pub fn stress_row(pairing: &ContactPairing, mesh: &BodyMesh, mat: &Material, body_offset: usize) -> SparseRow {
    let n = mesh.facet_normal(pairing.facet);
    let (dofs, coeffs) = sigma_n_row(mesh, mat, pairing.element, &pairing.point, &n);
    SparseRow::new(dofs.iter().map(|d| d + body_offset).collect(), coeffs).compress()
}

/// Assembled rows of one pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct NitscheRow {
    pub s: SparseRow,
    pub j: SparseRow,
    /// `s - gamma j`
    pub g: SparseRow,
    pub gamma: f64,
    pub weight: f64,
    pub rho: f64,
    pub mode: ConstraintMode,
}

impl NitscheRow {
    pub fn new(s: SparseRow, j: SparseRow, gamma: f64, weight: f64, rho: f64, mode: ConstraintMode) -> Self {
        let mut g = s.clone();
        g.add_scaled(-gamma, &j);
        let g = g.compress();
        Self {
            s,
            j,
            g,
            gamma,
            weight,
            rho,
            mode,
        }
    }

    pub fn sigma(&self, v: &[f64]) -> f64 {
        self.g.dot(v) + self.gamma * self.rho
    }

    pub fn remap(&self, map: &impl Fn(usize) -> Option<usize>) -> Self {
        Self::new(
            self.s.remap(map),
            self.j.remap(map),
            self.gamma,
            self.weight,
            self.rho,
            self.mode,
        )
    }
}

/// Snapshot of the contact state at one pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactStateEval {
    pub sigma_n: f64,
    pub jump: f64,
    pub sigma: f64,
    pub s: f64,
    pub active: bool,
}

/// The Nitsche operator `b - c` over a list of pairing rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactOperator {
    pub rows: Vec<NitscheRow>,
}

impl ContactOperator {
    pub fn new(rows: Vec<NitscheRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn evaluate(&self, v: &[f64]) -> Vec<ContactStateEval> {
        self.rows
            .iter()
            .map(|r| {
                let sigma = r.sigma(v);
                ContactStateEval {
                    sigma_n: r.s.dot(v),
                    jump: r.j.dot(v),
                    sigma,
                    s: s_eval(sigma, r.mode),
                    active: s_active(sigma, r.mode),
                }
            })
            .collect()
    }

    pub fn active_set(&self, v: &[f64]) -> Vec<bool> {
        self.rows.iter().map(|r| s_active(r.sigma(v), r.mode)).collect()
    }

    /// `b(v, w) = sum w_q / gamma S(v) DS(w)`
    pub fn b_form(&self, v: &[f64], w: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.weight / r.gamma * s_eval(r.sigma(v), r.mode) * r.g.dot(w))
            .sum()
    }

    /// `c(v, w) = sum w_q / gamma sigma_n(v) sigma_n(w)`
    pub fn c_form(&self, v: &[f64], w: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.weight / r.gamma * r.s.dot(v) * r.s.dot(w))
            .sum()
    }

    /// Contact part of the augmented Lagrangian.
    pub fn energy(&self, v: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let s = s_eval(r.sigma(v), r.mode);
                let sn = r.s.dot(v);
                0.5 * r.weight / r.gamma * (s * s - sn * sn)
            })
            .sum()
    }

    /// `res += grad of energy` at `v`.
    pub fn add_residual(&self, v: &[f64], res: &mut [f64]) {
        for r in &self.rows {
            let c = r.weight / r.gamma;
            let s = s_eval(r.sigma(v), r.mode);
            r.g.axpy(c * s, res);
            r.s.axpy(-c * r.s.dot(v), res);
        }
    }

    /// Jacobian for a fixed active set.
    pub fn add_jacobian(&self, active: &[bool], builder: &mut TripletBuilder) {
        for (r, &on) in self.rows.iter().zip(active) {
            let c = r.weight / r.gamma;
            if on {
                r.g.add_outer(c, &r.g, builder);
            }
            r.s.add_outer(-c, &r.s, builder);
        }
    }

    /// Constant part of the linearization: `rhs -= sum_active w rho g`.
    pub fn add_active_rhs(&self, active: &[bool], rhs: &mut [f64]) {
        for (r, &on) in self.rows.iter().zip(active) {
            if on {
                r.g.axpy(-r.weight * r.rho, rhs);
            }
        }
    }
}

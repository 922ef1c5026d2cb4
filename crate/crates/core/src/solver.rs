//! Global system: dof layout, Dirichlet elimination, mean-value multipliers,
//! the semismooth Newton loop and the direct linear solve.

use std::panic::{catch_unwind, AssertUnwindSafe};

use faer::prelude::*;

use crate::contact::{
    build_pairings, jump_row, stress_row, ConstraintMode, ContactOperator, ContactPairing,
    ContactStateEval, GammaScaling, NitscheParams, NitscheRow,
};
use crate::elasticity::{assemble_elasticity, assemble_load, Material};
use crate::error::{Error, Result};
use crate::geometry::{BodyMesh, Point};
use crate::hybrid::{assemble_a0, HybridModel, HybridSpace};
use crate::sparse::{SparseMatrix, SparseRow, TripletBuilder};

#[derive(Debug, Clone)]
pub struct BodyProblem {
    pub mesh: BodyMesh,
    pub material: Material,
    pub mode: ConstraintMode,
    pub gamma_mult: f64,
    /// Right-hand side over the body's dofs.
    pub load: Vec<f64>,
    /// Body dofs held at zero.
    pub fixed: Vec<usize>,
    /// Directions with a zero-mean displacement multiplier.
    pub mean: Vec<Point>,
}

#[derive(Debug, Clone)]
pub struct HybridProblem {
    pub space: HybridSpace,
    pub model: HybridModel,
    pub mean: Vec<Point>,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub bodies: [BodyProblem; 2],
    pub hybrid: HybridProblem,
    pub n_gauss: usize,
    /// Facet subdivisions for the contact quadrature; `None` picks enough per
    /// facet to resolve the shortest hybrid segment.
    pub subdivisions: Option<usize>,
    pub gamma_scaling: GammaScaling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanConstraint {
    /// 0 for the hybrid layer, otherwise the body id.
    pub owner: usize,
    pub direction: Point,
    /// Row over the reduced dofs.
    pub row: SparseRow,
}

/// Full numbering is `[body 1 | body 2 | hybrid]`; the reduced numbering drops
/// eliminated dofs and appends one slot per multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    body_dofs: [usize; 2],
    hybrid_dofs: usize,
    reduced: Vec<Option<usize>>,
    n_free: usize,
    n_multipliers: usize,
}

impl DofLayout {
    fn offset(&self, block: usize) -> usize {
        match block {
            1 => 0,
            2 => self.body_dofs[0],
            _ => self.body_dofs[0] + self.body_dofs[1],
        }
    }

    pub fn full_size(&self) -> usize {
        self.reduced.len()
    }

    pub fn num_free(&self) -> usize {
        self.n_free
    }

    pub fn num_multipliers(&self) -> usize {
        self.n_multipliers
    }

    pub fn total(&self) -> usize {
        self.n_free + self.n_multipliers
    }

    pub fn body_dof_count(&self, body: usize) -> usize {
        self.body_dofs[body - 1]
    }

    pub fn hybrid_dof_count(&self) -> usize {
        self.hybrid_dofs
    }

    /// Reduced index of `(body, node, component)`; `None` if eliminated.
    pub fn body_dof(&self, body: usize, node: usize, comp: usize) -> Option<usize> {
        self.reduced[self.offset(body) + 2 * node + comp]
    }

    pub fn hybrid_dof(&self, k: usize) -> Option<usize> {
        self.reduced[self.offset(0) + k]
    }

    fn extract(&self, state: &[f64], block: usize, len: usize) -> Vec<f64> {
        let off = self.offset(block);
        (0..len)
            .map(|k| self.reduced[off + k].map_or(0.0, |r| state[r]))
            .collect()
    }

    /// Displacements of `body` (1 or 2) including eliminated zeros.
    pub fn body_values(&self, state: &[f64], body: usize) -> Vec<f64> {
        self.extract(state, body, self.body_dofs[body - 1])
    }

    pub fn hybrid_values(&self, state: &[f64]) -> Vec<f64> {
        self.extract(state, 0, self.hybrid_dofs)
    }

    pub fn multiplier_values<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[self.n_free..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub active: usize,
}

impl std::fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iter {} residual {:.6e} active {}",
            self.iteration, self.residual, self.active
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// Reduced dofs followed by multipliers.
    pub values: Vec<f64>,
    pub log: Vec<IterationRecord>,
    pub active: Vec<bool>,
}

impl SystemState {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-8,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct System {
    pub layout: DofLayout,
    /// Linear part: elastic blocks, a0 and multiplier coupling.
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub contact: ContactOperator,
    /// Pairings aligned with `contact.rows`.
    pub pairings: Vec<ContactPairing>,
    pub means: Vec<MeanConstraint>,
    /// Elastic stiffness of each body over its own full dofs.
    pub elastic: [SparseMatrix; 2],
    pub case2: bool,
}

fn check_body(i: usize, b: &BodyProblem) -> Result<()> {
    if b.load.len() != b.mesh.num_dofs() {
        return Err(Error::Validation(vec![format!(
            "body {i}: load has {} entries, expected {}",
            b.load.len(),
            b.mesh.num_dofs()
        )]));
    }
    if let Some(d) = b.fixed.iter().find(|&&d| d >= b.mesh.num_dofs()) {
        return Err(Error::Validation(vec![format!(
            "body {i}: fixed dof {d} out of range"
        )]));
    }
    if !(b.gamma_mult > 0.0) {
        return Err(Error::Validation(vec![format!(
            "body {i}: gamma multiplier must be positive"
        )]));
    }
    if b.fixed.is_empty() && b.mean.is_empty() {
        return Err(Error::SingularSystem(format!(
            "body {i} has neither Dirichlet dofs nor mean-value constraints"
        )));
    }
    Ok(())
}

/// Assembles the linear blocks, the pairing rows and the reduced layout.
pub fn build_system(problem: &Problem) -> Result<System> {
    for (k, b) in problem.bodies.iter().enumerate() {
        check_body(k + 1, b)?;
    }
    let case2 = problem.hybrid.model.is_case2();
    if !case2
        && problem
            .bodies
            .iter()
            .all(|b| b.mode == ConstraintMode::Inequality)
    {
        return Err(Error::SingularSystem(
            "hybrid layer has no stiffness and no equality tie to either body".into(),
        ));
    }
    let space = &problem.hybrid.space;
    let n1 = problem.bodies[0].mesh.num_dofs();
    let n2 = problem.bodies[1].mesh.num_dofs();
    let n0 = space.dof_count();
    let full = n1 + n2 + n0;
    let offsets = [0, n1, n1 + n2];

    let mut pairings = Vec::new();
    let mut rows = Vec::new();
    for (k, b) in problem.bodies.iter().enumerate() {
        let body = k + 1;
        let ps = build_pairings(
            body,
            &b.mesh,
            space.interface(),
            b.mode,
            problem.n_gauss,
            problem.subdivisions,
        )?;
        let params = NitscheParams {
            gamma_mult: b.gamma_mult,
            young: b.material.young,
            scaling: problem.gamma_scaling,
        };
        for p in ps {
            let s = stress_row(&p, &b.mesh, &b.material, offsets[k]);
            let j = jump_row(&p, &b.mesh, space, offsets[k], offsets[2]);
            rows.push(NitscheRow::new(s, j, params.gamma(p.h), p.weight, p.gap, p.mode));
            pairings.push(p);
        }
    }

    let a0 = assemble_a0(&problem.hybrid.model, space)?;
    let elastic = [
        assemble_elasticity(&problem.bodies[0].mesh, &problem.bodies[0].material)?,
        assemble_elasticity(&problem.bodies[1].mesh, &problem.bodies[1].material)?,
    ];

    // eliminated dofs: Dirichlet, and hybrid dofs no term ever sees
    let mut keep = vec![true; full];
    for (k, b) in problem.bodies.iter().enumerate() {
        for &d in &b.fixed {
            keep[offsets[k] + d] = false;
        }
    }
    let mut seen = vec![false; n0];
    for r in &rows {
        for &i in r.j.indices() {
            if i >= offsets[2] {
                seen[i - offsets[2]] = true;
            }
        }
    }
    for (i, j, _) in a0.iter() {
        seen[i] = true;
        seen[j] = true;
    }
    for (k, s) in seen.iter().enumerate() {
        if !s {
            keep[offsets[2] + k] = false;
        }
    }
    let mut reduced = vec![None; full];
    let mut n_free = 0;
    for (i, r) in reduced.iter_mut().enumerate() {
        if keep[i] {
            *r = Some(n_free);
            n_free += 1;
        }
    }
    let map = |i: usize| reduced[i];

    let mut means = Vec::new();
    for (k, b) in problem.bodies.iter().enumerate() {
        let area = b.mesh.area();
        for d in &b.mean {
            let r = assemble_load(&b.mesh, d);
            let row = SparseRow::from_dense(&r)
                .scaled(1.0 / area)
                .shifted(offsets[k])
                .remap(map);
            if !row.is_empty() {
                means.push(MeanConstraint {
                    owner: k + 1,
                    direction: *d,
                    row,
                });
            }
        }
    }
    for d in &problem.hybrid.mean {
        let row = space.mean_row(d).ok_or_else(|| {
            Error::Validation(vec![format!(
                "hybrid space `{}` cannot carry a mean-value constraint",
                space.kind()
            )])
        })?;
        let row = row.shifted(offsets[2]).remap(map);
        if !row.is_empty() {
            means.push(MeanConstraint {
                owner: 0,
                direction: *d,
                row,
            });
        }
    }

    let total = n_free + means.len();
    let mut t = TripletBuilder::square(total);
    for (k, m) in elastic.iter().enumerate() {
        for (i, j, v) in m.iter() {
            if let (Some(a), Some(b)) = (map(offsets[k] + i), map(offsets[k] + j)) {
                t.add(a, b, v);
            }
        }
    }
    for (i, j, v) in a0.iter() {
        if let (Some(a), Some(b)) = (map(offsets[2] + i), map(offsets[2] + j)) {
            t.add(a, b, v);
        }
    }
    for (m, c) in means.iter().enumerate() {
        for (i, v) in c.row.iter() {
            t.add(n_free + m, i, v);
            t.add(i, n_free + m, v);
        }
    }
    let matrix = t.build();

    let mut rhs = vec![0.0; total];
    for (k, b) in problem.bodies.iter().enumerate() {
        for (i, v) in b.load.iter().enumerate() {
            if let Some(a) = map(offsets[k] + i) {
                rhs[a] += v;
            }
        }
    }

    let contact = ContactOperator::new(rows.iter().map(|r| r.remap(&map)).collect());
    Ok(System {
        layout: DofLayout {
            body_dofs: [n1, n2],
            hybrid_dofs: n0,
            reduced,
            n_free,
            n_multipliers: means.len(),
        },
        matrix,
        rhs,
        contact,
        pairings,
        means,
        elastic,
        case2,
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl System {
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(u);
        for (ri, fi) in r.iter_mut().zip(&self.rhs) {
            *ri -= fi;
        }
        self.contact.add_residual(u, &mut r);
        r
    }

    /// Discrete augmented Lagrangian (multipliers set to zero).
    pub fn lagrangian(&self, u: &[f64]) -> f64 {
        0.5 * self.matrix.bilinear(u, u) - u.iter().zip(&self.rhs).map(|(a, b)| a * b).sum::<f64>()
            + self.contact.energy(u)
    }

    pub fn jacobian(&self, active: &[bool]) -> SparseMatrix {
        let mut t = TripletBuilder::square(self.layout.total());
        t.extend_from(&self.matrix);
        self.contact.add_jacobian(active, &mut t);
        t.build()
    }

    /// Solves the affine system for a fixed active set.
    pub fn solve_active(&self, active: &[bool]) -> Result<Vec<f64>> {
        let j = self.jacobian(active);
        let mut rhs = self.rhs.clone();
        self.contact.add_active_rhs(active, &mut rhs);
        linear_solve_bordered(&j, self.layout.num_free(), &rhs)
    }

    pub fn load_norm(&self) -> f64 {
        norm2(&self.rhs)
    }

    /// `sqrt(a_1(u_1, u_1) + a_2(u_2, u_2))`
    pub fn energy_norm(&self, u: &[f64]) -> f64 {
        (1..=2)
            .map(|b| {
                let v = self.layout.body_values(u, b);
                self.elastic[b - 1].bilinear(&v, &v)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn evaluate_contact(&self, u: &[f64]) -> Vec<ContactStateEval> {
        self.contact.evaluate(u)
    }
}

/// Semismooth Newton (active-set) iteration from the zero state. The first
/// step treats every inequality pairing as active.
pub fn semismooth_newton(system: &System, opts: &NewtonOptions) -> Result<SystemState> {
    semismooth_newton_with(system, opts, |_| {})
}

pub fn semismooth_newton_with(
    system: &System,
    opts: &NewtonOptions,
    mut on_iter: impl FnMut(&IterationRecord),
) -> Result<SystemState> {
    if !(opts.tol_rel > 0.0) || opts.max_iter == 0 {
        return Err(Error::Validation(vec![
            "newton options need tol_rel > 0 and max_iter >= 1".into(),
        ]));
    }
    let load = system.load_norm();
    let tol = if load > 0.0 { opts.tol_rel * load } else { 1e-12 };
    let mut active = vec![true; system.contact.len()];
    let mut history: Vec<Vec<bool>> = vec![active.clone()];
    let mut log = Vec::new();
    for k in 1..=opts.max_iter {
        let u = system.solve_active(&active).map_err(|e| Error::NewtonLinearSolve {
            iteration: k,
            message: e.to_string(),
        })?;
        let residual = norm2(&system.residual(&u));
        let next = system.contact.active_set(&u);
        let rec = IterationRecord {
            iteration: k,
            residual,
            active: next.iter().filter(|a| **a).count(),
        };
        on_iter(&rec);
        log.push(rec);
        if residual <= tol {
            return Ok(SystemState {
                values: u,
                log,
                active: next,
            });
        }
        if next == active || history.iter().any(|h| *h == next) {
            // the active set stalled or cycles without meeting the tolerance
            return Err(Error::NonConvergence { log });
        }
        history.push(next.clone());
        active = next;
    }
    Err(Error::NonConvergence { log })
}

/// A contact element whose local Nitsche operator is indefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityWarning {
    pub body: usize,
    pub element: usize,
    /// Smallest eigenvalue of `K_e - C_e` relative to the largest of `K_e`.
    pub relative_eigenvalue: f64,
}

/// Checks `K_e - sum_q w_q / gamma_q s_q s_q^T` on every element carrying
/// contact points. If all are positive semidefinite, so is the assembled
/// operator for any active set (a sufficient condition only); each element
/// that fails is reported.
pub fn stability_check(problem: &Problem, system: &System) -> Result<Vec<StabilityWarning>> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (q, p) in system.pairings.iter().enumerate() {
        groups.entry((p.body, p.element)).or_default().push(q);
    }
    let mut out = Vec::new();
    for ((body, element), qs) in groups {
        let b = &problem.bodies[body - 1];
        let nodes = &b.mesh.elements()[element];
        let mut k = crate::elasticity::element_stiffness(&b.mesh.element_coords(element), &b.material)?;
        let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for q in qs {
            let p = &system.pairings[q];
            let row = &system.contact.rows[q];
            let n = b.mesh.facet_normal(p.facet);
            let (dofs, coeffs) = crate::elasticity::sigma_n_row(&b.mesh, &b.material, element, &p.point, &n);
            let local: Vec<usize> = dofs
                .iter()
                .map(|d| 2 * nodes.iter().position(|&x| x == d / 2).expect("element dof") + d % 2)
                .collect();
            let c = row.weight / row.gamma;
            for (a, &ia) in local.iter().enumerate() {
                for (bb, &ib) in local.iter().enumerate() {
                    k[(ia, ib)] -= c * coeffs[a] * coeffs[bb];
                }
            }
        }
        let min = k.symmetric_eigenvalues().min();
        if min < -1e-10 * scale {
            out.push(StabilityWarning {
                body,
                element,
                relative_eigenvalue: min / scale,
            });
        }
    }
    Ok(out)
}

type Factor = faer::sparse::linalg::solvers::Lu<usize, f64>;

fn factorize(matrix: &SparseMatrix) -> Result<Factor> {
    let a = matrix.to_faer();
    match catch_unwind(AssertUnwindSafe(|| a.sp_lu())) {
        Ok(Ok(lu)) => Ok(lu),
        Ok(Err(e)) => Err(Error::LinearSolve(format!("factorization failed: {e:?}"))),
        Err(_) => Err(Error::SingularSystem(
            "zero pivot encountered during LU factorization".into(),
        )),
    }
}

/// Solves for every column of `rhs` (column-major, `n` rows each).
fn solve_columns(lu: &Factor, n: usize, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let b = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i]);
    let x = catch_unwind(AssertUnwindSafe(|| lu.solve(&b)))
        .map_err(|_| Error::SingularSystem("triangular solve failed".into()))?;
    let out: Vec<Vec<f64>> = (0..rhs.len())
        .map(|j| (0..n).map(|i| x[(i, j)]).collect())
        .collect();
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("solution is not finite".into()));
    }
    Ok(out)
}

fn check_residual(matrix: &SparseMatrix, rhs: &[f64], x: &[f64]) -> Result<()> {
    let ax = matrix.mul_vec(x);
    let res = ax
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bn = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = 1e-10 * (matrix.norm_inf() * xn + bn);
    if res > bound {
        return Err(Error::SingularSystem(format!(
            "residual {res:.3e} exceeds {bound:.3e}; matrix is numerically singular"
        )));
    }
    Ok(())
}

fn check_shape(matrix: &SparseMatrix, rhs: &[f64]) -> Result<()> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::LinearSolve(format!(
            "shape mismatch: matrix {}x{}, rhs {}",
            n,
            matrix.ncols(),
            rhs.len()
        )));
    }
    if let Some(i) = (0..n).find(|&i| matrix.row(i).next().is_none()) {
        return Err(Error::SingularSystem(format!("row {i} is structurally empty")));
    }
    Ok(())
}

/// Direct sparse LU solve with the residual contract
/// `|A x - b| <= 1e-10 (|A| |x| + |b|)` in the max norm.
pub fn linear_solve(matrix: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    check_shape(matrix, rhs)?;
    let n = matrix.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = factorize(matrix)?;
    let x = solve_columns(&lu, n, &[rhs.to_vec()])?.remove(0);
    check_residual(matrix, rhs, &x)?;
    Ok(x)
}

/// Like [`linear_solve`] for a matrix whose trailing rows and columns past
/// `n_free` are dense borders (mean-value multipliers). Pivoting on dense
/// borders fills the LU factors, so the border is split off instead:
/// `[A B; C D]` is written as `blockdiag(A + a E E^T, I)` plus a rank-`3m`
/// correction, where `E` pins one dof per border. Only the sparse block is
/// factored; the correction is applied through the Woodbury identity. Falls
/// back to the plain solve when the pinned block is singular.
pub fn linear_solve_bordered(matrix: &SparseMatrix, n_free: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    check_shape(matrix, rhs)?;
    let total = matrix.nrows();
    let m = total.saturating_sub(n_free);
    if m == 0 || n_free == 0 {
        return linear_solve(matrix, rhs);
    }
    match bordered(matrix, n_free, rhs) {
        Ok(x) if check_residual(matrix, rhs, &x).is_ok() => Ok(x),
        _ => linear_solve(matrix, rhs),
    }
}

fn bordered(matrix: &SparseMatrix, n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let m = matrix.nrows() - n;
    // border columns B (rows < n), border rows C (cols < n), corner D
    let mut bcol = vec![vec![0.0; n]; m];
    let mut crow = vec![vec![0.0; n]; m];
    let mut corner = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut diag = vec![0.0; n];
    let mut t = TripletBuilder::square(n);
    for (i, j, v) in matrix.iter() {
        match (i < n, j < n) {
            (true, true) => {
                t.add(i, j, v);
                if i == j {
                    diag[i] = v;
                }
            }
            (true, false) => bcol[j - n][i] = v,
            (false, true) => crow[i - n][j] = v,
            (false, false) => corner[(i - n, j - n)] = v,
        }
    }
    // one pinned dof per border, where the border weight is largest
    let mut pins = Vec::with_capacity(m);
    for b in &bcol {
        let k = (0..n)
            .filter(|k| !pins.contains(k))
            .max_by(|&x, &y| b[x].abs().total_cmp(&b[y].abs()))
            .ok_or_else(|| Error::SingularSystem("no dof to pin".into()))?;
        pins.push(k);
    }
    let alpha: Vec<f64> = pins
        .iter()
        .map(|&k| if diag[k].abs() > 0.0 { diag[k].abs() } else { matrix.norm_inf() })
        .collect();
    for (&k, &a) in pins.iter().zip(&alpha) {
        t.add(k, k, a);
    }
    let pinned = t.build();
    let lu = factorize(&pinned)?;

    // z = A0^{-1} b; W = A0^{-1} U with U = [[E, B, 0], [0, 0, I]]
    let mut cols = vec![rhs[..n].to_vec()];
    for &k in &pins {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        cols.push(e);
    }
    cols.extend(bcol.iter().cloned());
    let sol = solve_columns(&lu, n, &cols)?;
    let z_top = &sol[0];
    let w_e = &sol[1..=m];
    let w_b = &sol[m + 1..];
    let z_bot = &rhs[n..];

    // S = [[-alpha, 0, 0], [0, 0, I], [0, I, D - I]], V = [[E, C^T, 0], [0, 0, I]]
    let k3 = 3 * m;
    // V^T x for a vector split into (top, bottom)
    let vt = |top: &[f64], bot: &[f64]| -> nalgebra::DVector<f64> {
        let mut out = nalgebra::DVector::zeros(k3);
        for a in 0..m {
            out[a] = top[pins[a]];
            out[m + a] = crow[a].iter().zip(top).map(|(c, x)| c * x).sum();
            out[2 * m + a] = bot[a];
        }
        out
    };
    let apply_s = |y: &nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
        let mut out = nalgebra::DVector::zeros(k3);
        for a in 0..m {
            out[a] = -alpha[a] * y[a];
            out[m + a] = y[2 * m + a];
            out[2 * m + a] = y[m + a] - y[2 * m + a];
            for b in 0..m {
                out[2 * m + a] += corner[(a, b)] * y[2 * m + b];
            }
        }
        out
    };
    // columns of W: (top, bottom)
    let zero_bot = vec![0.0; m];
    let mut w_cols: Vec<(&[f64], Vec<f64>)> = Vec::with_capacity(k3);
    for c in w_e.iter().chain(w_b) {
        w_cols.push((c.as_slice(), zero_bot.clone()));
    }
    let zero_top = vec![0.0; n];
    for a in 0..m {
        let mut e = vec![0.0; m];
        e[a] = 1.0;
        w_cols.push((zero_top.as_slice(), e));
    }
    let mut cap = nalgebra::DMatrix::<f64>::identity(k3, k3);
    for (j, (top, bot)) in w_cols.iter().enumerate() {
        let col = apply_s(&vt(top, bot));
        for i in 0..k3 {
            cap[(i, j)] += col[i];
        }
    }
    let c = cap
        .lu()
        .solve(&apply_s(&vt(z_top, z_bot)))
        .ok_or_else(|| Error::SingularSystem("bordered capacitance matrix is singular".into()))?;
    let mut x = Vec::with_capacity(n + m);
    for i in 0..n {
        x.push(z_top[i] - w_cols.iter().zip(c.iter()).map(|((t, _), ci)| t[i] * ci).sum::<f64>());
    }
    for a in 0..m {
        x.push(z_bot[a] - w_cols.iter().zip(c.iter()).map(|((_, b), ci)| b[a] * ci).sum::<f64>());
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("solution is not finite".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve() {
        let mut t = TripletBuilder::square(3);
        for i in 0..3 {
            t.add(i, i, 1.0);
        }
        let x = linear_solve(&t.build(), &[1.0, -2.0, 3.5]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn saddle_solve() {
        let mut t = TripletBuilder::square(2);
        t.add(0, 1, 1.0);
        t.add(1, 0, 1.0);
        let x = linear_solve(&t.build(), &[1.0, 2.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bordered_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        // 1D Neumann Laplacian (constant null space) plus a random SPD part
        // acting only on the second half, bordered by two dense rows
        let mut a = nalgebra::DMatrix::<f64>::zeros(n + 2, n + 2);
        for i in 0..n - 1 {
            a[(i, i)] += 1.0;
            a[(i + 1, i + 1)] += 1.0;
            a[(i, i + 1)] -= 1.0;
            a[(i + 1, i)] -= 1.0;
        }
        for k in 0..2 {
            for i in 0..n {
                let b: f64 = rng.gen_range(0.5..1.5);
                a[(i, n + k)] = b;
                a[(n + k, i)] = b * (1.0 + 0.1 * k as f64);
            }
        }
        a[(n + 1, n + 1)] = 0.3;
        let mut t = TripletBuilder::square(n + 2);
        for i in 0..n + 2 {
            for j in 0..n + 2 {
                t.add(i, j, a[(i, j)]);
            }
        }
        let m = t.build();
        let rhs: Vec<f64> = (0..n + 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = bordered(&m, n, &rhs).unwrap();
        let exact = a.lu().solve(&nalgebra::DVector::from_column_slice(&rhs)).unwrap();
        for (xi, ei) in x.iter().zip(exact.iter()) {
            assert!((xi - ei).abs() < 1e-9 * (1.0 + ei.abs()), "{xi} vs {ei}");
        }
        assert!(linear_solve_bordered(&m, n, &rhs).is_ok());
    }

    #[test]
    fn random_spd_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let b = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = &b * b.transpose() + nalgebra::DMatrix::identity(n, n) * n as f64;
        let mut t = TripletBuilder::square(n);
        for i in 0..n {
            for j in 0..n {
                t.add(i, j, a[(i, j)]);
            }
        }
        let m = t.build();
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = linear_solve(&m, &rhs).unwrap();
        let r = m.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&rhs) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let mut t = TripletBuilder::square(2);
        t.add(0, 0, 1.0);
        t.add(0, 1, 1.0);
        t.add(1, 0, 1.0);
        t.add(1, 1, 1.0);
        assert!(linear_solve(&t.build(), &[1.0, 0.0]).is_err());
        let mut t = TripletBuilder::square(2);
        t.add(0, 0, 1.0);
        assert!(matches!(
            linear_solve(&t.build(), &[1.0, 0.0]),
            Err(Error::SingularSystem(_))
        ));
    }
}

//! Independent oracles and experiment drivers: the cylinder contact solution,
//! the complementarity and affine monotonicity lemmas, Hertz metrics,
//! reference-solution convergence studies and the hybrid stiffness sweep.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contact::ContactOperator;
use crate::elasticity::{eval_displacement, reference_coords, Material};
use crate::error::{Error, Result};
use crate::geometry::{BodyMesh, ElementKind, Point};
use crate::scenario::{MeshSpec, Scenario};
use crate::solver::{build_system, semismooth_newton_with, IterationRecord, Problem, System, SystemState};

// ---------------------------------------------------------------- Hertz

/// Plane-strain contact of two cylinders (one of them flat) under line load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HertzSolution {
    pub load: f64,
    pub radius: f64,
    pub e_star: f64,
    pub half_width: f64,
    pub p_max: f64,
}

impl HertzSolution {
    pub fn pressure(&self, x: f64) -> f64 {
        let r = x / self.half_width;
        if r.abs() >= 1.0 {
            0.0
        } else {
            self.p_max * (1.0 - r * r).sqrt()
        }
    }
}

pub fn hertz_oracle(load: f64, radius: f64, e1: f64, nu1: f64, e2: f64, nu2: f64) -> Result<HertzSolution> {
    Material::new(e1, nu1)?;
    Material::new(e2, nu2)?;
    if !(load > 0.0 && radius > 0.0) {
        return Err(Error::InvalidMaterial(format!(
            "Hertz load and radius must be positive (P = {load}, R = {radius})"
        )));
    }
    let e_star = 1.0 / ((1.0 - nu1 * nu1) / e1 + (1.0 - nu2 * nu2) / e2);
    let half_width = (4.0 * load * radius / (std::f64::consts::PI * e_star)).sqrt();
    Ok(HertzSolution {
        load,
        radius,
        e_star,
        half_width,
        p_max: 2.0 * load / (std::f64::consts::PI * half_width),
    })
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Oracle for a Hertz-type scenario: body 1 must be a half-disc, the load is
/// the total downward force on it.
pub fn hertz_oracle_for(s: &Scenario) -> Result<HertzSolution> {
    let radius = match s.bodies[0].mesh {
        MeshSpec::HalfDisc { radius, .. } => radius,
        _ => {
            return Err(Error::Validation(vec![
                "the Hertz comparison needs body1.mesh = halfdisc".into(),
            ]))
        }
    };
    let load: f64 = -s.bodies[0].loads.iter().map(|(_, f)| f[1]).sum::<f64>();
    let [b1, b2] = &s.bodies;
    hertz_oracle(load, radius, b1.young, b1.poisson, b2.young, b2.poisson)
}

// ---------------------------------------------------------------- lemmas

/// Compares `a <= 0, b <= 0, ab = 0` with `a = [a - b]_-`, each side
/// evaluated on its own.
pub fn kkt_lemma_check(a: f64, b: f64) -> bool {
    let complementarity = a <= 0.0 && b <= 0.0 && a * b == 0.0;
    let fixed_point = a == (a - b).min(0.0);
    complementarity == fixed_point
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepCount {
    pub cases: usize,
    pub failures: usize,
}

impl SweepCount {
    fn record(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Grid `{-2, ..., 2}` in steps of 1/4 and `n_random` random pairs, a
/// quarter of them with an exact zero in either slot.
pub fn kkt_sweep(n_random: usize, seed: u64) -> (SweepCount, SweepCount) {
    let mut grid = SweepCount::default();
    for i in -8..=8 {
        for j in -8..=8 {
            grid.record(kkt_lemma_check(i as f64 * 0.25, j as f64 * 0.25));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = SweepCount::default();
    for _ in 0..n_random {
        let mut a: f64 = rng.gen_range(-2.0..2.0);
        let mut b: f64 = rng.gen_range(-2.0..2.0);
        match rng.gen_range(0..8) {
            0 => a = 0.0,
            1 => b = 0.0,
            _ => {}
        }
        random.record(kkt_lemma_check(a, b));
    }
    (grid, random)
}

fn neg_part(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| v.min(0.0))
}

/// `|[B v]_- - [B w]_-|^2 <= ([B v]_- - [B w]_-, D(v - w))` for the affine
/// map `B x = D x + c`; returns `(holds, lhs, rhs)`.
pub fn affine_monotonicity_check(
    d: &DMatrix<f64>,
    c: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> (bool, f64, f64) {
    let bv = d * v + c;
    let bw = d * w + c;
    let diff = neg_part(&bv) - neg_part(&bw);
    let lhs = diff.norm_squared();
    let rhs = diff.dot(&(d * (v - w)));
    let scale = lhs.max(rhs.abs()).max(bv.norm_squared()).max(bw.norm_squared()).max(1.0);
    (rhs - lhs >= -1e-12 * scale, lhs, rhs)
}

/// Random affine instances with dimension `1..=64`.
pub fn affine_sweep(count: usize, seed: u64) -> SweepCount {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SweepCount::default();
    for _ in 0..count {
        let n = rng.gen_range(1..=64);
        let d = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let w = if rng.gen_bool(0.05) {
            v.clone()
        } else {
            DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))
        };
        out.record(affine_monotonicity_check(&d, &c, &v, &w).0);
    }
    out
}

/// `(b(v, v-w) - b(w, v-w), sum w_q / gamma (S(v) - S(w))^2)`.
pub fn b_monotonicity(op: &ContactOperator, v: &[f64], w: &[f64]) -> (f64, f64) {
    let z: Vec<f64> = v.iter().zip(w).map(|(a, b)| a - b).collect();
    let lhs = op.b_form(v, &z) - op.b_form(w, &z);
    let ev = op.evaluate(v);
    let ew = op.evaluate(w);
    let rhs = op
        .rows
        .iter()
        .zip(ev.iter().zip(&ew))
        .map(|(r, (a, b))| r.weight / r.gamma * (a.s - b.s).powi(2))
        .sum();
    (lhs, rhs)
}

// ---------------------------------------------------------------- runs

/// A solved scenario.
pub struct Run {
    pub problem: Problem,
    pub system: System,
    pub state: SystemState,
}

pub fn solve_scenario(s: &Scenario, on_iter: impl FnMut(&IterationRecord)) -> Result<Run> {
    let problem = s.build_problem()?;
    let system = build_system(&problem)?;
    let state = semismooth_newton_with(&system, &s.newton_options(), on_iter)?;
    Ok(Run { problem, system, state })
}

/// Contact state at one quadrature point of a body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureSample {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub sigma: f64,
    pub sigma_n: f64,
    pub s: f64,
    pub active: bool,
}

impl Run {
    pub fn body_displacement(&self, body: usize) -> Vec<f64> {
        self.system.layout.body_values(&self.state.values, body)
    }

    /// Samples of `body` in pairing order.
    pub fn pressure_samples(&self, body: usize) -> Vec<PressureSample> {
        let ev = self.system.evaluate_contact(&self.state.values);
        self.system
            .pairings
            .iter()
            .zip(ev)
            .filter(|(p, _)| p.body == body)
            .map(|(p, e)| PressureSample {
                x: p.point.x,
                y: p.point.y,
                weight: p.weight,
                sigma: e.sigma,
                sigma_n: e.sigma_n,
                s: e.s,
                active: e.active,
            })
            .collect()
    }

    pub fn energy_norm(&self) -> f64 {
        self.system.energy_norm(&self.state.values)
    }

    /// Largest downward displacement `max(-u_y)` over the nodes of `body`.
    pub fn max_downward(&self, body: usize) -> f64 {
        self.body_displacement(body)
            .chunks(2)
            .map(|u| -u[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every inequality pairing has `S <= 0`.
    pub fn sign_invariant_holds(&self) -> bool {
        self.system
            .evaluate_contact(&self.state.values)
            .iter()
            .zip(&self.system.pairings)
            .filter(|(_, p)| p.mode == crate::contact::ConstraintMode::Inequality)
            .all(|(e, _)| e.s <= 0.0)
    }
}

/// Hertz comparison of the contact pressure `-S` on body 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HertzMetrics {
    pub iterations: usize,
    pub p_max: f64,
    /// Half the x-extent of the points with `Sigma < -0.01 p_max`.
    pub half_width: f64,
    /// `int S` over the contact boundary of body 1.
    pub force: f64,
    /// `sqrt(sum w (-S - p_hertz)^2)`.
    pub pressure_l2: f64,
    pub sign_ok: bool,
}

pub fn hertz_metrics(run: &Run, oracle: &HertzSolution) -> HertzMetrics {
    let samples = run.pressure_samples(1);
    let p_max = samples.iter().map(|s| -s.s).fold(0.0, f64::max);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples.iter().filter(|s| s.sigma < -0.01 * p_max) {
        lo = lo.min(s.x);
        hi = hi.max(s.x);
    }
    let half_width = if hi >= lo { 0.5 * (hi - lo) } else { 0.0 };
    let force = samples.iter().map(|s| s.weight * s.s).sum();
    let pressure_l2 = samples
        .iter()
        .map(|s| s.weight * (-s.s - oracle.pressure(s.x)).powi(2))
        .sum::<f64>()
        .sqrt();
    HertzMetrics {
        iterations: run.state.iterations(),
        p_max,
        half_width,
        force,
        pressure_l2,
        sign_ok: run.sign_invariant_holds(),
    }
}

// ---------------------------------------------------------------- transfer

/// Bucket grid over element bounding boxes.
struct Locator<'a> {
    mesh: &'a BodyMesh,
    origin: Point,
    cell: f64,
    dims: (usize, usize),
    buckets: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    fn new(mesh: &'a BodyMesh) -> Self {
        let (mut lo, mut hi) = (Point::repeat(f64::INFINITY), Point::repeat(f64::NEG_INFINITY));
        for p in mesh.nodes() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let n = mesh.elements().len().max(1) as f64;
        let ext = hi - lo;
        let cell = ((ext.x * ext.y).max(1e-300) / n).sqrt().max(1e-12 * ext.norm());
        let dims = (
            ((ext.x / cell).ceil() as usize).max(1),
            ((ext.y / cell).ceil() as usize).max(1),
        );
        let mut loc = Self {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); dims.0 * dims.1],
        };
        for e in 0..mesh.elements().len() {
            let c = mesh.element_coords(e);
            let (mut a, mut b) = (c[0], c[0]);
            for p in &c {
                a = a.inf(p);
                b = b.sup(p);
            }
            let (i0, j0) = loc.cell_of(&a);
            let (i1, j1) = loc.cell_of(&b);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    loc.buckets[j * dims.0 + i].push(e);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: &Point) -> (usize, usize) {
        let q = (p - self.origin) / self.cell;
        (
            (q.x.floor().max(0.0) as usize).min(self.dims.0 - 1),
            (q.y.floor().max(0.0) as usize).min(self.dims.1 - 1),
        )
    }

    fn outside(&self, e: usize, p: &Point) -> f64 {
        let c = self.mesh.element_coords(e);
        let (xi, eta) = reference_coords(self.mesh.kind(), &c, p);
        match self.mesh.kind() {
            ElementKind::Tri => (-xi).max(-eta).max(xi + eta - 1.0).max(0.0),
            ElementKind::Quad => (xi.abs() - 1.0).max(eta.abs() - 1.0).max(0.0),
        }
    }

    /// Element containing `p`, or the one needing least extrapolation.
    fn locate(&self, p: &Point) -> usize {
        let (ci, cj) = self.cell_of(p);
        let mut best = (f64::INFINITY, 0);
        for ring in 0..self.dims.0.max(self.dims.1) {
            let (i0, i1) = (ci.saturating_sub(ring), (ci + ring).min(self.dims.0 - 1));
            let (j0, j1) = (cj.saturating_sub(ring), (cj + ring).min(self.dims.1 - 1));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    if ring > 0 && i != i0 && i != i1 && j != j0 && j != j1 {
                        continue;
                    }
                    for &e in &self.buckets[j * self.dims.0 + i] {
                        let o = self.outside(e, p);
                        if o < best.0 {
                            best = (o, e);
                        }
                    }
                }
            }
            if best.0 <= 1e-12 || (best.0.is_finite() && ring >= 1) {
                break;
            }
        }
        best.1
    }
}

/// Interpolates a displacement field given on `from` at the nodes of `to`.
pub fn transfer_displacement(from: &BodyMesh, u: &[f64], to: &BodyMesh) -> Vec<f64> {
    let loc = Locator::new(from);
    let mut out = Vec::with_capacity(to.num_dofs());
    for p in to.nodes() {
        let v = eval_displacement(from, loc.locate(p), u, p);
        out.push(v.x);
        out.push(v.y);
    }
    out
}

/// Piecewise-linear interpolation through `(x, y)` samples sorted by `x`,
/// constant beyond the ends.
fn interp_sorted(xs: &[(f64, f64)], x: f64) -> f64 {
    match xs.binary_search_by(|s| s.0.total_cmp(&x)) {
        Ok(i) => xs[i].1,
        Err(0) => xs[0].1,
        Err(i) if i == xs.len() => xs[i - 1].1,
        Err(i) => {
            let (a, b) = (xs[i - 1], xs[i]);
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }
    }
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceLevel {
    pub level: usize,
    pub h: f64,
    pub energy_error: f64,
    pub pressure_l2: f64,
    /// Local energy rate against the previous level.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<ConvergenceLevel>,
    pub reference_factor: usize,
    pub energy_rate: Option<f64>,
    pub pressure_rate: Option<f64>,
    /// Set when a level failed; the report then holds the levels before it.
    pub failure: Option<String>,
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn mesh_size(s: &Scenario) -> f64 {
    let h = |m: &MeshSpec| match m {
        MeshSpec::HalfDisc { h_min, .. } | MeshSpec::Block { h_min, .. } => *h_min,
        MeshSpec::Rect { bounds, cells, .. } => {
            ((bounds[1] - bounds[0]) / cells[0] as f64).max((bounds[3] - bounds[2]) / cells[1] as f64)
        }
        MeshSpec::File(_) => f64::NAN,
    };
    h(&s.bodies[0].mesh).max(h(&s.bodies[1].mesh))
}

/// Solves `base` refined by each factor and by `reference`; errors are taken
/// against the reference solution interpolated onto the reference meshes.
/// The pressure error compares `S` on body 1 with the reference profile.
pub fn convergence_study(
    base: &Scenario,
    factors: &[usize],
    reference: usize,
    mut on_level: impl FnMut(usize, &ConvergenceLevel),
) -> Result<ConvergenceReport> {
    if factors.len() < 3 {
        return Err(Error::Validation(vec![
            "a convergence study needs at least 3 levels".into(),
        ]));
    }
    let mut report = ConvergenceReport {
        levels: Vec::new(),
        reference_factor: reference,
        energy_rate: None,
        pressure_rate: None,
        failure: None,
    };
    let fine = match solve_scenario(&base.refined(reference), |_| {}) {
        Ok(r) => r,
        Err(e) => {
            report.failure = Some(format!("reference level: {e}"));
            return Ok(report);
        }
    };
    let fine_u = [fine.body_displacement(1), fine.body_displacement(2)];
    let mut fine_p: Vec<(f64, f64)> = fine.pressure_samples(1).iter().map(|s| (s.x, s.s)).collect();
    fine_p.sort_by(|a, b| a.0.total_cmp(&b.0));

    for (level, &k) in factors.iter().enumerate() {
        let s = base.refined(k);
        let run = match solve_scenario(&s, |_| {}) {
            Ok(r) => r,
            Err(e) => {
                report.failure = Some(format!("level {level} (x{k}): {e}"));
                break;
            }
        };
        let mut energy = 0.0;
        for b in 0..2 {
            let coarse = run.body_displacement(b + 1);
            let moved = transfer_displacement(&run.problem.bodies[b].mesh, &coarse, &fine.problem.bodies[b].mesh);
            let e: Vec<f64> = fine_u[b].iter().zip(&moved).map(|(a, c)| a - c).collect();
            energy += fine.system.elastic[b].bilinear(&e, &e);
        }
        let pressure_l2 = run
            .pressure_samples(1)
            .iter()
            .map(|p| p.weight * (p.s - interp_sorted(&fine_p, p.x)).powi(2))
            .sum::<f64>()
            .sqrt();
        let h = mesh_size(&s);
        let energy_error = energy.max(0.0).sqrt();
        let rate = report.levels.last().and_then(|prev: &ConvergenceLevel| {
            fit_rate(&[prev.h, h], &[prev.energy_error, energy_error])
        });
        let lvl = ConvergenceLevel {
            level,
            h,
            energy_error,
            pressure_l2,
            rate,
        };
        on_level(level, &lvl);
        report.levels.push(lvl);
    }
    let h: Vec<f64> = report.levels.iter().map(|l| l.h).collect();
    let e: Vec<f64> = report.levels.iter().map(|l| l.energy_error).collect();
    let p: Vec<f64> = report.levels.iter().map(|l| l.pressure_l2).collect();
    if report.levels.len() >= 3 {
        report.energy_rate = fit_rate(&h, &e);
        report.pressure_rate = fit_rate(&h, &p);
    }
    Ok(report)
}

// ---------------------------------------------------------------- sweeps

/// Hertz pressure error against the oracle for each hybrid constant count.
pub fn hybrid_resolution_sweep(base: &Scenario, counts: &[usize]) -> Result<Vec<(usize, HertzMetrics)>> {
    let oracle = hertz_oracle_for(base)?;
    counts
        .iter()
        .map(|&n| {
            let mut s = base.clone();
            s.set_hybrid_count(n);
            let run = solve_scenario(&s, |_| {})?;
            Ok((n, hertz_metrics(&run, &oracle)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessPoint {
    pub stiffness: f64,
    pub max_downward: f64,
    pub energy_norm: f64,
    pub iterations: usize,
}

/// Solves `base` with each hybrid stiffness (same model kind).
pub fn stiffness_sweep(base: &Scenario, stiffness: &[f64]) -> Result<Vec<(StiffnessPoint, Run)>> {
    use crate::hybrid::HybridModel;
    stiffness
        .iter()
        .map(|&k| {
            let mut s = base.clone();
            s.hybrid.model = match s.hybrid.model {
                HybridModel::Beam { .. } => HybridModel::Beam { stiffness: k },
                _ => HybridModel::String { stiffness: k },
            };
            let run = solve_scenario(&s, |_| {})?;
            Ok((
                StiffnessPoint {
                    stiffness: k,
                    max_downward: run.max_downward(1),
                    energy_norm: run.energy_norm(),
                    iterations: run.state.iterations(),
                },
                run,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hertz_reference_constants() {
        let h = hertz_oracle(50.0, 1.0, 2000.0, 0.3, 7000.0, 0.3).unwrap();
        assert!((h.e_star - 1709.4).abs() < 0.05);
        assert!((h.half_width - 0.1930).abs() < 5e-4);
        assert!((h.p_max - 164.9).abs() < 0.1);
        let total = adaptive_simpson(&|x| h.pressure(x), -h.half_width, h.half_width, 1e-12);
        assert!((total - 50.0).abs() < 1e-8 * 50.0, "{total}");
        assert_eq!(h.pressure(h.half_width), 0.0);
        assert_eq!(h.pressure(-h.half_width), 0.0);
    }

    #[test]
    fn hertz_limits() {
        let h = hertz_oracle(10.0, 2.0, 500.0, 0.0, 500.0, 0.0).unwrap();
        assert!((h.e_star - 250.0).abs() < 1e-12);
        let h4 = hertz_oracle(40.0, 2.0, 500.0, 0.0, 500.0, 0.0).unwrap();
        assert!((h4.half_width / h.half_width - 2.0).abs() < 1e-12);
        assert!(hertz_oracle(1.0, 1.0, 100.0, 0.5, 100.0, 0.3).is_err());
    }

    #[test]
    fn kkt_examples() {
        assert!(kkt_lemma_check(0.0, -1.0));
        assert!(kkt_lemma_check(-2.0, 0.0));
        let (grid, random) = kkt_sweep(1000, 1);
        assert_eq!(grid.cases, 289);
        assert!(grid.passed() && random.passed());
    }

    #[test]
    fn affine_hand_example() {
        let d = DMatrix::identity(1, 1);
        let c = DVector::zeros(1);
        let (ok, lhs, rhs) = affine_monotonicity_check(&d, &c, &DVector::from_element(1, -1.0), &DVector::from_element(1, 1.0));
        assert!(ok);
        assert_eq!((lhs, rhs), (1.0, 2.0));
        let v = DVector::from_element(1, 0.3);
        assert_eq!(affine_monotonicity_check(&d, &c, &v, &v), (true, 0.0, 0.0));
    }

    #[test]
    fn rate_fit_recovers_slope() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        assert!((fit_rate(&h, &e).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn transfer_reproduces_linear_fields() {
        use crate::geometry::FacetTag;
        use crate::meshgen::rect_mesh;
        let a = rect_mesh(0.0, 1.0, 0.0, 1.0, 3, 3, |_, _| FacetTag::Neumann).unwrap();
        let b = rect_mesh(0.0, 1.0, 0.0, 1.0, 7, 5, |_, _| FacetTag::Neumann).unwrap();
        let f = |p: &Point| [0.3 * p.x - 0.1 * p.y + 0.2, 0.5 * p.y];
        let u: Vec<f64> = a.nodes().iter().flat_map(f).collect();
        let v = transfer_displacement(&a, &u, &b);
        for (p, w) in b.nodes().iter().zip(v.chunks(2)) {
            let e = f(p);
            assert!((e[0] - w[0]).abs() < 1e-12 && (e[1] - w[1]).abs() < 1e-12);
        }
    }
}

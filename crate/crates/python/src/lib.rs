use std::collections::BTreeMap;
use std::path::PathBuf;

use nitsche_hybrid::bench::{self, HertzSolution};
use nitsche_hybrid::contact::ConstraintMode;
use nitsche_hybrid::hybrid::HybridModel;
use nitsche_hybrid::output::{run_summary, write_run};
use nitsche_hybrid::scenario;
use nitsche_hybrid::solver::stability_check;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pynitsche, NitscheError, PyException);

fn err(e: nitsche_hybrid::Error) -> PyErr {
    NitscheError::new_err(e.to_string())
}

fn mode(name: &str) -> PyResult<ConstraintMode> {
    ConstraintMode::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown mode `{name}`")))
}

/// A complete two-body contact problem description.
#[pyclass(module = "pynitsche")]
#[derive(Clone)]
struct Scenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    #[pyo3(signature = (constants=1000, h_min=0.008))]
    fn hertz(constants: usize, h_min: f64) -> Self {
        Self {
            inner: scenario::Scenario::hertz_with(constants, h_min),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (mode="inequality", pressure=1.0, n=4))]
    fn patch(mode: &str, pressure: f64, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::Scenario::patch(self::mode(mode)?, pressure, n),
        })
    }

    /// Hertz geometry with a P1 layer; `stiffness=None` is the stiffness-free layer.
    #[staticmethod]
    #[pyo3(signature = (stiffness=None, segments=100, h_min=0.02))]
    fn string_layer(stiffness: Option<f64>, segments: usize, h_min: f64) -> Self {
        Self {
            inner: scenario::Scenario::string_layer(stiffness, segments, h_min),
        }
    }

    #[staticmethod]
    fn template(name: &str) -> PyResult<Self> {
        scenario::Scenario::template(name)
            .map(|inner| Self { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown template `{name}`")))
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        scenario::Scenario::parse(text).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        scenario::Scenario::load(&path).map(|inner| Self { inner }).map_err(err)
    }

    fn write(&self) -> String {
        self.inner.write()
    }

    fn validation_errors(&self) -> Vec<String> {
        self.inner.validation_errors()
    }

    fn refined(&self, k: usize) -> Self {
        Self {
            inner: self.inner.refined(k),
        }
    }

    fn set_hybrid_count(&mut self, count: usize) {
        self.inner.set_hybrid_count(count);
    }

    /// Sets `c` in `gamma = c E / h` on both bodies.
    fn set_gamma_mult(&mut self, c: f64) {
        for b in &mut self.inner.bodies {
            b.gamma_mult = c;
        }
    }

    fn set_stiffness(&mut self, k: f64) -> PyResult<()> {
        self.inner.hybrid.model = match self.inner.hybrid.model {
            HybridModel::String { .. } => HybridModel::String { stiffness: k },
            HybridModel::Beam { .. } => HybridModel::Beam { stiffness: k },
            HybridModel::None => return Err(PyValueError::new_err("the hybrid layer has no model")),
        };
        Ok(())
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }

    #[setter]
    fn set_tol(&mut self, tol: f64) {
        self.inner.tol = tol;
    }

    #[getter]
    fn max_iter(&self) -> usize {
        self.inner.max_iter
    }

    #[setter]
    fn set_max_iter(&mut self, n: usize) {
        self.inner.max_iter = n;
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(mode1={}, mode2={}, hybrid={})",
            self.inner.bodies[0].mode.as_str(),
            self.inner.bodies[1].mode.as_str(),
            self.inner.hybrid.model.name()
        )
    }
}

/// Analytic Hertz line-contact solution.
#[pyclass(module = "pynitsche", frozen)]
struct Hertz {
    inner: HertzSolution,
}

#[pymethods]
impl Hertz {
    #[getter]
    fn load(&self) -> f64 {
        self.inner.load
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    #[getter]
    fn e_star(&self) -> f64 {
        self.inner.e_star
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    #[getter]
    fn p_max(&self) -> f64 {
        self.inner.p_max
    }

    fn pressure(&self, x: f64) -> f64 {
        self.inner.pressure(x)
    }

    fn __repr__(&self) -> String {
        format!("Hertz(a={:.6}, p_max={:.4})", self.inner.half_width, self.inner.p_max)
    }
}

/// A converged solve.
#[pyclass(module = "pynitsche", frozen)]
struct Run {
    inner: bench::Run,
}

#[pymethods]
impl Run {
    #[getter]
    fn iterations(&self) -> usize {
        self.inner.state.iterations()
    }

    #[getter]
    fn dofs(&self) -> usize {
        self.inner.system.layout.total()
    }

    /// `(iteration, residual, active)` per Newton step.
    fn log(&self) -> Vec<(usize, f64, usize)> {
        self.inner.state.log.iter().map(|r| (r.iteration, r.residual, r.active)).collect()
    }

    fn energy_norm(&self) -> f64 {
        self.inner.energy_norm()
    }

    fn max_downward(&self, body: usize) -> PyResult<f64> {
        check_body(body)?;
        Ok(self.inner.max_downward(body))
    }

    /// Nodal displacements `[ux0, uy0, ux1, ...]` of body 1 or 2.
    fn displacement(&self, body: usize) -> PyResult<Vec<f64>> {
        check_body(body)?;
        Ok(self.inner.body_displacement(body))
    }

    fn hybrid_values(&self) -> Vec<f64> {
        self.inner.system.layout.hybrid_values(&self.inner.state.values)
    }

    /// Rows `(x, y, weight, Sigma, sigma_n, S, active)` at the contact points.
    fn pressure(&self, body: usize) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64, bool)>> {
        check_body(body)?;
        Ok(self
            .inner
            .pressure_samples(body)
            .iter()
            .map(|p| (p.x, p.y, p.weight, p.sigma, p.sigma_n, p.s, p.active))
            .collect())
    }

    fn sign_invariant_holds(&self) -> bool {
        self.inner.sign_invariant_holds()
    }

    fn summary(&self) -> BTreeMap<String, String> {
        run_summary(&self.inner).0.into_iter().collect()
    }

    /// `(body, element, relative eigenvalue)` for each contact element whose
    /// local Nitsche operator is indefinite.
    fn stability_warnings(&self) -> PyResult<Vec<(usize, usize, f64)>> {
        let w = stability_check(&self.inner.problem, &self.inner.system).map_err(err)?;
        Ok(w.iter().map(|w| (w.body, w.element, w.relative_eigenvalue)).collect())
    }

    /// Writes the VTK meshes, pressure table, iteration log and summary.
    #[pyo3(signature = (directory, oracle=None))]
    fn write(&self, directory: PathBuf, oracle: Option<&Hertz>) -> PyResult<()> {
        let summary = run_summary(&self.inner);
        write_run(&directory, &self.inner, oracle.map(|o| &o.inner), &summary).map_err(err)
    }
}

fn check_body(body: usize) -> PyResult<()> {
    if body == 1 || body == 2 {
        Ok(())
    } else {
        Err(PyValueError::new_err(format!("body must be 1 or 2, got {body}")))
    }
}

/// Semismooth Newton solve; releases the GIL while running.
#[pyfunction]
fn solve(py: Python<'_>, scenario: &Scenario) -> PyResult<Run> {
    let s = scenario.inner.clone();
    py.allow_threads(move || bench::solve_scenario(&s, |_| {}))
        .map(|inner| Run { inner })
        .map_err(err)
}

#[pyfunction]
fn hertz_oracle(load: f64, radius: f64, e1: f64, nu1: f64, e2: f64, nu2: f64) -> PyResult<Hertz> {
    bench::hertz_oracle(load, radius, e1, nu1, e2, nu2)
        .map(|inner| Hertz { inner })
        .map_err(err)
}

#[pyfunction]
fn hertz_oracle_for(scenario: &Scenario) -> PyResult<Hertz> {
    bench::hertz_oracle_for(&scenario.inner)
        .map(|inner| Hertz { inner })
        .map_err(err)
}

/// Hertz comparison of a run: iterations, p_max, half_width, force,
/// pressure_l2 and sign_ok.
#[pyfunction]
fn hertz_metrics(run: &Run, oracle: &Hertz) -> BTreeMap<&'static str, f64> {
    let m = bench::hertz_metrics(&run.inner, &oracle.inner);
    BTreeMap::from([
        ("iterations", m.iterations as f64),
        ("p_max", m.p_max),
        ("half_width", m.half_width),
        ("force", m.force),
        ("pressure_l2", m.pressure_l2),
        ("sign_ok", if m.sign_ok { 1.0 } else { 0.0 }),
    ])
}

#[pyfunction]
fn kkt_lemma_check(a: f64, b: f64) -> bool {
    bench::kkt_lemma_check(a, b)
}

/// `{"grid": (cases, failures), "random": ..., "affine": ...}`
#[pyfunction]
#[pyo3(signature = (samples=100_000, seed=2024))]
fn lemma_sweeps(py: Python<'_>, samples: usize, seed: u64) -> BTreeMap<&'static str, (usize, usize)> {
    py.allow_threads(|| {
        let (grid, random) = bench::kkt_sweep(samples, seed);
        let affine = bench::affine_sweep(samples, seed);
        BTreeMap::from([
            ("grid", (grid.cases, grid.failures)),
            ("random", (random.cases, random.failures)),
            ("affine", (affine.cases, affine.failures)),
        ])
    })
}

#[pymodule]
fn pynitsche(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NitscheError", m.py().get_type::<NitscheError>())?;
    m.add_class::<Scenario>()?;
    m.add_class::<Run>()?;
    m.add_class::<Hertz>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(hertz_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(hertz_oracle_for, m)?)?;
    m.add_function(wrap_pyfunction!(hertz_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_lemma_check, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_sweeps, m)?)?;
    Ok(())
}

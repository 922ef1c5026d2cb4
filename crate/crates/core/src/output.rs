//! Run artifacts: legacy VTK meshes with point displacements, pressure and
//! convergence CSV files, the iteration log and a key-value summary.

use std::fmt::Write as _;
use std::path::Path;

use crate::bench::{ConvergenceReport, HertzSolution, PressureSample, Run};
use crate::error::{Error, Result};
use crate::geometry::{BodyMesh, ElementKind};
use crate::solver::IterationRecord;

pub fn vtk(mesh: &BodyMesh, u: &[f64], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", p.x, p.y);
    }
    let npe = mesh.kind().nodes_per_element();
    let ne = mesh.elements().len();
    let _ = writeln!(s, "CELLS {ne} {}", ne * (npe + 1));
    for e in mesh.elements() {
        let idx: Vec<String> = e.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{npe} {}", idx.join(" "));
    }
    let cell_type = match mesh.kind() {
        ElementKind::Tri => 5,
        ElementKind::Quad => 9,
    };
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "{cell_type}");
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS displacement double", mesh.num_nodes());
    for d in u.chunks(2) {
        let _ = writeln!(s, "{} {} 0", d[0], d[1]);
    }
    s
}

/// One row per sample sorted by `x`; `hertz_p` only with an oracle.
pub fn pressure_csv(samples: &[PressureSample], oracle: Option<&HertzSolution>) -> String {
    let mut rows: Vec<&PressureSample> = samples.iter().collect();
    rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut s = String::from(if oracle.is_some() {
        "x,Sigma,sigma_n,hertz_p\n"
    } else {
        "x,Sigma,sigma_n\n"
    });
    for r in rows {
        let _ = write!(s, "{},{},{}", r.x, r.sigma, r.sigma_n);
        if let Some(o) = oracle {
            let _ = write!(s, ",{}", o.pressure(r.x));
        }
        s.push('\n');
    }
    s
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("level,h,energy_error,pressure_l2,rate\n");
    for l in &report.levels {
        let rate = l.rate.map_or(String::new(), |r| r.to_string());
        let _ = writeln!(s, "{},{},{},{},{rate}", l.level, l.h, l.energy_error, l.pressure_l2);
    }
    s
}

pub fn iteration_log(log: &[IterationRecord]) -> String {
    log.iter().map(|r| format!("{r}\n")).collect()
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary(pub Vec<(String, String)>);

impl Summary {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Energy, extreme contact stress and active fraction of a run.
pub fn run_summary(run: &Run) -> Summary {
    let mut s = Summary::default();
    let u = &run.state.values;
    let ev = run.system.evaluate_contact(u);
    let max_sigma = ev.iter().map(|e| e.sigma.abs()).fold(0.0, f64::max);
    let active = ev.iter().filter(|e| e.active).count();
    s.push("dofs", run.system.layout.total());
    s.push("pairings", ev.len());
    s.push("iterations", run.state.iterations());
    s.push("final_residual", run.state.log.last().map_or(0.0, |r| r.residual));
    s.push("energy_norm", run.energy_norm());
    s.push("lagrangian", run.system.lagrangian(u));
    s.push("max_abs_sigma", max_sigma);
    s.push("active_fraction", active as f64 / ev.len().max(1) as f64);
    s.push("contact_force_body1", run.pressure_samples(1).iter().map(|p| p.weight * p.s).sum::<f64>());
    s.push("max_downward_body1", run.max_downward(1));
    if let Ok(w) = crate::solver::stability_check(&run.problem, &run.system) {
        s.push("stability_warnings", w.len());
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `body1.vtk`, `body2.vtk`, `pressure.csv` (body 1),
/// `iterations.log` and `summary.txt` into `dir`.
pub fn write_run(dir: &Path, run: &Run, oracle: Option<&HertzSolution>, summary: &Summary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for b in 1..=2 {
        let mesh = &run.problem.bodies[b - 1].mesh;
        write_file(
            &dir.join(format!("body{b}.vtk")),
            &vtk(mesh, &run.body_displacement(b), &format!("body {b} displacement")),
        )?;
    }
    write_file(&dir.join("pressure.csv"), &pressure_csv(&run.pressure_samples(1), oracle))?;
    write_file(&dir.join("iterations.log"), &iteration_log(&run.state.log))?;
    write_file(&dir.join("summary.txt"), &summary.render())
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nitsche_hybrid::bench::{
    affine_sweep, convergence_study, hertz_metrics, hertz_oracle_for, kkt_sweep, solve_scenario,
    stiffness_sweep, HertzSolution, Run,
};
use nitsche_hybrid::contact::ConstraintMode;
use nitsche_hybrid::hybrid::{HybridModel, HybridSpaceKind};
use nitsche_hybrid::output::{convergence_csv, run_summary, write_file, write_run, Summary};
use nitsche_hybrid::scenario::Scenario;
use nitsche_hybrid::solver::stability_check;
use nitsche_hybrid::Error;

#[derive(Parser)]
#[command(name = "nitsche-hybrid", version, about = "Hybrid-layer Nitsche contact solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario file (or built-in template) and write all outputs.
    Solve(Common),
    /// Hertz benchmark against the cylinder contact solution.
    HertzBench(Common),
    /// Uniform-pressure patch test on stacked blocks.
    PatchTest(Common),
    /// Mesh-refinement study against a finer reference solution.
    Converge(Common),
    /// Randomized sweeps of the complementarity and monotonicity lemmas.
    Lemmas {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Max downward displacement of body 1 versus hybrid layer stiffness.
    StiffnessSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated stiffness values.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 20.0, 200.0])]
        stiffness: Vec<f64>,
    },
    /// Print a built-in scenario (hertz, patch, string).
    Template { name: String },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Scenario file, or the name of a built-in template.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Nitsche multiplier c (gamma_i = c E_i) for both bodies.
    #[arg(long)]
    gamma_mult: Option<f64>,
    /// Number of hybrid segments.
    #[arg(long)]
    constants: Option<usize>,
    /// Body mesh refinement factor.
    #[arg(long)]
    refine: Option<usize>,
    /// Coupling mode of body 1.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    hybrid: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Error(Error),
    Acceptance(String),
    /// A study stopped early because a level did not converge.
    Partial(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn invalid(msg: String) -> Failure {
    Failure::Error(Error::Validation(vec![msg]))
}

impl Common {
    fn scenario(&self, default: impl FnOnce() -> Scenario) -> std::result::Result<Scenario, Failure> {
        let mut s = match &self.scenario {
            None => default(),
            Some(name) if !Path::new(name).exists() => {
                Scenario::template(name).ok_or_else(|| invalid(format!("no scenario file or template named `{name}`")))?
            }
            Some(path) => Scenario::load(Path::new(path))?,
        };
        if let Some(c) = self.gamma_mult {
            for b in &mut s.bodies {
                b.gamma_mult = c;
            }
        }
        if let Some(n) = self.constants {
            s.set_hybrid_count(n);
        }
        if let Some(k) = self.refine {
            s = s.refined(k);
        }
        if let Some(m) = &self.mode {
            s.bodies[0].mode =
                ConstraintMode::parse(m).ok_or_else(|| invalid(format!("unknown mode `{m}` (equality, inequality)")))?;
        }
        if let Some(h) = &self.hybrid {
            s.hybrid.space =
                HybridSpaceKind::parse(h).ok_or_else(|| invalid(format!("unknown hybrid space `{h}` (p0, p1, beam)")))?;
        }
        if let Some(m) = &self.model {
            let k = s.hybrid.model.stiffness();
            s.hybrid.model = match m.as_str() {
                "none" => HybridModel::None,
                "string" => HybridModel::String { stiffness: k },
                "beam" => HybridModel::Beam { stiffness: k },
                other => return Err(invalid(format!("unknown hybrid model `{other}` (none, string, beam)"))),
            };
        }
        let errors = s.validation_errors();
        if !errors.is_empty() {
            return Err(Failure::Error(Error::Validation(errors)));
        }
        Ok(s)
    }

    fn solve(&self, s: &Scenario) -> std::result::Result<Run, Failure> {
        let quiet = self.quiet;
        let run = solve_scenario(s, |r| {
            if !quiet {
                eprintln!("{r}");
            }
        })?;
        let warnings = stability_check(&run.problem, &run.system)?;
        if let Some(w) = warnings.first() {
            eprintln!(
                "warning: Nitsche operator indefinite on {} contact element(s), e.g. body {} element {} \
                 (relative eigenvalue {:.2e}); increase gamma_mult",
                warnings.len(),
                w.body,
                w.element,
                w.relative_eigenvalue
            );
        }
        Ok(run)
    }
}

fn check(summary: &mut Summary, failures: &mut Vec<String>, name: &str, ok: bool, detail: String) {
    summary.push(&format!("check_{name}"), if ok { "pass" } else { "fail" });
    if !ok {
        failures.push(format!("{name}: {detail}"));
    }
}

fn finish(dir: &Path, summary: &Summary, failures: Vec<String>, quiet: bool) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    write_file(&dir.join("summary.txt"), &summary.render())?;
    if !quiet {
        print!("{}", summary.render());
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(failures.join("; ")))
    }
}

fn solve(c: &Common) -> Outcome {
    let s = c.scenario(|| Scenario::hertz(1000))?;
    let run = c.solve(&s)?;
    let oracle = hertz_oracle_for(&s).ok();
    let summary = run_summary(&run);
    write_run(&c.out, &run, oracle.as_ref(), &summary)?;
    write_file(&c.out.join("scenario.txt"), &s.write())?;
    if !c.quiet {
        print!("{}", summary.render());
    }
    Ok(())
}

fn hertz_bench(c: &Common) -> Outcome {
    let s = c.scenario(|| Scenario::hertz(1000))?;
    let oracle: HertzSolution = hertz_oracle_for(&s)?;
    let start = std::time::Instant::now();
    let run = c.solve(&s)?;
    let elapsed = start.elapsed().as_secs_f64();
    let m = hertz_metrics(&run, &oracle);
    let mut summary = run_summary(&run);
    summary.push("seconds", elapsed);
    summary.push("hertz_p_max", oracle.p_max);
    summary.push("hertz_half_width", oracle.half_width);
    summary.push("hertz_load", oracle.load);
    summary.push("p_max", m.p_max);
    summary.push("p_max_rel_error", (m.p_max - oracle.p_max) / oracle.p_max);
    summary.push("half_width", m.half_width);
    summary.push("half_width_rel_error", (m.half_width - oracle.half_width) / oracle.half_width);
    summary.push("contact_force", m.force);
    summary.push("pressure_l2_error", m.pressure_l2);
    let mut failures = Vec::new();
    let p_err = ((m.p_max - oracle.p_max) / oracle.p_max).abs();
    let a_err = ((m.half_width - oracle.half_width) / oracle.half_width).abs();
    let f_err = ((m.force + oracle.load) / oracle.load).abs();
    check(&mut summary, &mut failures, "iterations", m.iterations <= 25, format!("{} > 25", m.iterations));
    check(&mut summary, &mut failures, "p_max", p_err <= 0.15, format!("relative error {p_err:.3}"));
    check(&mut summary, &mut failures, "half_width", a_err <= 0.20, format!("relative error {a_err:.3}"));
    check(&mut summary, &mut failures, "force", f_err <= 0.05, format!("relative error {f_err:.3}"));
    check(&mut summary, &mut failures, "sign", m.sign_ok, "S > 0 at some point".into());
    write_run(&c.out, &run, Some(&oracle), &summary)?;
    finish(&c.out, &summary, failures, c.quiet)
}

fn patch_test(c: &Common) -> Outcome {
    let modes: Vec<ConstraintMode> = match &c.mode {
        Some(m) => vec![ConstraintMode::parse(m).ok_or_else(|| invalid(format!("unknown mode `{m}`")))?],
        None => vec![ConstraintMode::Equality, ConstraintMode::Inequality],
    };
    let pressure = 1.0;
    let mut summary = Summary::default();
    let mut failures = Vec::new();
    for mode in modes {
        let base = Common {
            mode: None,
            ..c.clone()
        };
        let s = base.scenario(|| Scenario::patch(mode, pressure, 4))?;
        let run = c.solve(&s)?;
        let dev = run
            .pressure_samples(1)
            .iter()
            .chain(run.pressure_samples(2).iter())
            .map(|p| (p.sigma + pressure).abs())
            .fold(0.0, f64::max);
        let limit = if mode == ConstraintMode::Equality { 1 } else { 3 };
        let name = mode.as_str();
        summary.push(&format!("{name}_max_sigma_deviation"), dev);
        summary.push(&format!("{name}_iterations"), run.state.iterations());
        check(&mut summary, &mut failures, &format!("{name}_sigma"), dev <= 1e-8, format!("max |Sigma + p| = {dev:e}"));
        check(
            &mut summary,
            &mut failures,
            &format!("{name}_iterations"),
            run.state.iterations() <= limit,
            format!("{} > {limit}", run.state.iterations()),
        );
        let dir = c.out.join(name);
        write_run(&dir, &run, None, &run_summary(&run))?;
    }
    finish(&c.out, &summary, failures, c.quiet)
}

fn converge(c: &Common) -> Outcome {
    let s = c.scenario(|| Scenario::hertz_with(1000, 0.04))?;
    let quiet = c.quiet;
    let report = convergence_study(&s, &[1, 2, 4], 8, |_, l| {
        if !quiet {
            eprintln!("level {} h {} energy_error {} pressure_l2 {}", l.level, l.h, l.energy_error, l.pressure_l2);
        }
    })?;
    std::fs::create_dir_all(&c.out).map_err(|e| Error::Io { path: c.out.clone(), source: e })?;
    write_file(&c.out.join("convergence.csv"), &convergence_csv(&report))?;
    let mut summary = Summary::default();
    summary.push("reference_factor", report.reference_factor);
    summary.push("energy_rate", report.energy_rate.map_or("n/a".into(), |r| r.to_string()));
    summary.push("pressure_rate", report.pressure_rate.map_or("n/a".into(), |r| r.to_string()));
    if let Some(f) = &report.failure {
        summary.push("failure", f);
        finish(&c.out, &summary, vec![], quiet)?;
        return Err(Failure::Partial(f.clone()));
    }
    let mut failures = Vec::new();
    let ok = report.energy_rate.is_some_and(|r| (0.8..=1.2).contains(&r));
    check(&mut summary, &mut failures, "energy_rate", ok, format!("rate {:?} outside [0.8, 1.2]", report.energy_rate));
    finish(&c.out, &summary, failures, quiet)
}

fn lemmas(samples: usize, seed: u64) -> Outcome {
    let (grid, random) = kkt_sweep(samples, seed);
    let affine = affine_sweep(samples, seed.wrapping_add(1));
    println!("kkt grid: {} of {} passed", grid.cases - grid.failures, grid.cases);
    println!("kkt random: {} of {} passed", random.cases - random.failures, random.cases);
    println!("affine monotonicity: {} of {} passed", affine.cases - affine.failures, affine.cases);
    if grid.passed() && random.passed() && affine.passed() {
        Ok(())
    } else {
        Err(Failure::Acceptance("lemma sweep found counterexamples".into()))
    }
}

fn sweep(c: &Common, stiffness: &[f64]) -> Outcome {
    let s = c.scenario(|| Scenario::string_layer(Some(0.0), 100, 0.02))?;
    let points = stiffness_sweep(&s, stiffness)?;
    let mut csv = String::from("stiffness,max_downward,energy_norm,iterations\n");
    for (p, _) in &points {
        csv.push_str(&format!("{},{},{},{}\n", p.stiffness, p.max_downward, p.energy_norm, p.iterations));
    }
    std::fs::create_dir_all(&c.out).map_err(|e| Error::Io { path: c.out.clone(), source: e })?;
    write_file(&c.out.join("sweep.csv"), &csv)?;
    let mut summary = Summary::default();
    let mut failures = Vec::new();
    let mut sorted: Vec<_> = points.iter().map(|(p, _)| (p.stiffness, p.max_downward)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decreasing = sorted.windows(2).all(|w| w[1].1 < w[0].1);
    check(&mut summary, &mut failures, "stiffening", decreasing, "max downward displacement is not strictly decreasing".into());
    if !c.quiet {
        print!("{csv}");
    }
    finish(&c.out, &summary, failures, c.quiet)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => solve(c),
        Command::HertzBench(c) => hertz_bench(c),
        Command::PatchTest(c) => patch_test(c),
        Command::Converge(c) => converge(c),
        Command::Lemmas { samples, seed } => lemmas(*samples, *seed),
        Command::StiffnessSweep { common, stiffness } => sweep(common, stiffness),
        Command::Template { name } => match Scenario::template(name) {
            Some(s) => {
                print!("{}", s.write());
                Ok(())
            }
            None => Err(invalid(format!("unknown template `{name}` (hertz, patch, string)"))),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Acceptance(msg)) => {
            eprintln!("acceptance check failed: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("study aborted: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Validation(_) | Error::Parse { .. } => 2,
                Error::NonConvergence { .. } | Error::NewtonLinearSolve { .. } => 3,
                _ => 1,
            })
        }
    }
}

//! Batch experiment driver behind the `sadi` binary.
//!
//! Exit codes: 0 success, 1 flagged drift check, 2 invalid config or
//! experiment, 3 I/O failure.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ModelConfig, SolverKind};
use crate::di_solver::{
    path_sup_distance, solve_filippov_reference, solve_forward_backward, solve_queue_exact,
};
use crate::diagnostics::{longrun_ensemble, narrow_convergence_sweep, write_longrun_csv, TargetSet};
use crate::models::{kernel_prox_sgd, kernel_queue, kernel_spp, run_chain, Kernel};
use crate::rng::derive_seed;
use crate::setvalued::queue_map_eval;
use crate::stability::{
    ph_check_monte_carlo, prox_sgd_lyapunov, queue_lyapunov, queue_lyapunov_with_constant, PhReport,
};
use crate::state::{fmt_f64, Path, StateVector, StepSize};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SADI_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "sadi", version, about = "Constant-step stochastic approximation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run seeded chains and write `trajectory_<seed>.csv`.
    Simulate(RunArgs),
    /// Solve the limiting inclusion and write `di_solution.csv`.
    #[command(name = "di_solve", alias = "di-solve")]
    DiSolve(RunArgs),
    /// Sup-distance sweep over a step grid.
    Converge(RunArgs),
    /// Long-run and ergodic statistics.
    Longrun(RunArgs),
    /// Monte Carlo check of the Lyapunov drift inequality.
    #[command(name = "ph_check", alias = "ph-check")]
    PhCheck(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to $SADI_OUT_DIR, then the config's
    /// `out_dir`, then the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid experiment: {0}")]
    Experiment(#[from] crate::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Experiment(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Flagged,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Flagged) => 1,
        Err(e) => {
            eprintln!("sadi: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let args = match &cli.command {
        Command::Simulate(a) | Command::DiSolve(a) | Command::Converge(a) | Command::Longrun(a) | Command::PhCheck(a) => a,
    };
    let source = fs::read_to_string(&args.config)
        .map_err(|e| ConfigError { line: None, message: format!("cannot read {}: {e}", args.config.display()) })?;
    let cfg = ExperimentConfig::parse(&source)?;
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let workers = args.workers.or(cfg.workers);
    if workers == Some(0) {
        return Err(ConfigError { line: None, message: "--workers must be at least 1".into() }.into());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| std::io::Error::other(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg, &out),
        Command::DiSolve(_) => cmd_di_solve(&cfg, &out),
        Command::Converge(_) => cmd_converge(&cfg, &out),
        Command::Longrun(_) => cmd_longrun(&cfg, &out),
        Command::PhCheck(_) => cmd_ph_check(&cfg, &out),
    })
}

fn missing(section: &str) -> CliError {
    ConfigError { line: None, message: format!("missing [{section}] section") }.into()
}

fn state(v: &[f64]) -> Result<StateVector, CliError> {
    Ok(StateVector::new(v.to_vec())?)
}

/// Writes through a temporary file in `dir` renamed into place on success.
pub fn write_atomic(
    dir: &FsPath,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

pub fn build_kernel(cfg: &ExperimentConfig) -> Result<Box<dyn Kernel>, CliError> {
    let invalid = || ConfigError { line: None, message: "model parameters are inconsistent".into() };
    Ok(match &cfg.model {
        ModelConfig::Queue { .. } => Box::new(kernel_queue(cfg.queue_spec().ok_or_else(invalid)?)),
        ModelConfig::ProxSgd { .. } => Box::new(kernel_prox_sgd(cfg.prox_sgd_problem().ok_or_else(invalid)?)),
        _ => Box::new(kernel_spp(cfg.spp_spec().ok_or_else(invalid)?)),
    })
}

/// Default target of the long-run statistics for each model.
pub fn default_target(cfg: &ExperimentConfig) -> Result<TargetSet, CliError> {
    let invalid = || ConfigError { line: None, message: "model parameters are inconsistent".into() };
    Ok(match &cfg.model {
        ModelConfig::Queue { lambda, .. } => TargetSet::Point(StateVector::zeros(lambda.len())),
        ModelConfig::ProxSgd { .. } => {
            let p = cfg.prox_sgd_problem().ok_or_else(invalid)?;
            TargetSet::Point(p.stationary_point().ok_or_else(invalid)?)
        }
        _ => {
            let spec = cfg.spp_spec().ok_or_else(invalid)?;
            match spec.mean_zero() {
                Some(z) => TargetSet::Point(z),
                None => TargetSet::Residual(std::sync::Arc::new(move |x| {
                    spec.distance_to_zeros(x).unwrap_or(f64::INFINITY)
                })),
            }
        }
    })
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &FsPath) -> Result<Outcome, CliError> {
    let s = cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    let kernel = build_kernel(cfg)?;
    let gamma = StepSize::new(s.gamma)?;
    let a = state(&s.initial)?;
    let seeds: Vec<u64> = match &s.seeds {
        Some(list) => list.clone(),
        None => (0..s.replicates.unwrap_or(1) as u64).map(|j| derive_seed(cfg.seed, j)).collect(),
    };
    let trajs = seeds
        .par_iter()
        .map(|&seed| run_chain(kernel.as_ref(), &a, gamma, s.steps, seed))
        .collect::<crate::Result<Vec<_>>>()?;
    for t in &trajs {
        let path = write_atomic(out, &format!("trajectory_{}.csv", t.seed()), |w| t.write_csv(w))?;
        eprintln!("wrote {}", path.display());
    }
    println!("simulate: {} trajectories of {} steps at gamma={}", trajs.len(), s.steps, fmt_f64(s.gamma));
    Ok(Outcome::Ok)
}

fn cmd_di_solve(cfg: &ExperimentConfig, out: &FsPath) -> Result<Outcome, CliError> {
    let d = cfg.di_solve.as_ref().ok_or_else(|| missing("di_solve"))?;
    let a = state(&d.initial)?;
    let (rows, deviation, step) = match d.solver {
        SolverKind::Exact => {
            let field = cfg.queue_spec().ok_or_else(|| missing("model"))?.field;
            let path = solve_queue_exact(&field, &a, d.horizon)?;
            write_atomic(out, "di_solution.csv", |w| path.write_csv(w, d.grid_points))?;
            println!("di_solve: breakpoints {:?}", path.breakpoint_times().iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>());
            (path.breakpoint_times().len(), 0.0, 0.0)
        }
        SolverKind::Reference => {
            let field = cfg.queue_spec().ok_or_else(|| missing("model"))?.field;
            let step = d.step.ok_or_else(|| missing("di_solve.step"))?;
            let eval = |x: &StateVector| queue_map_eval(&field, x);
            let sol = solve_filippov_reference(&eval, &a, d.horizon, step)?;
            let exact = solve_queue_exact(&field, &a, d.horizon)?;
            let dev = path_sup_distance(&sol, &exact, d.horizon)?;
            write_atomic(out, "di_solution.csv", |w| sol.write_csv(w))?;
            (sol.samples().len(), dev, step)
        }
        SolverKind::ForwardBackward => {
            let p = cfg.prox_sgd_problem().ok_or_else(|| missing("model"))?;
            let step = d.step.ok_or_else(|| missing("di_solve.step"))?;
            let sol = solve_forward_backward(&p, &a, d.horizon, step)?;
            let fine = solve_forward_backward(&p, &a, d.horizon, step / 10.0)?;
            let dev = path_sup_distance(&sol, &fine, d.horizon.min(sol.horizon()))?;
            write_atomic(out, "di_solution.csv", |w| sol.write_csv(w))?;
            (sol.samples().len(), dev, step)
        }
    };
    let solver = match d.solver {
        SolverKind::Exact => "exact",
        SolverKind::Reference => "reference",
        SolverKind::ForwardBackward => "forward_backward",
    };
    write_atomic(out, "di_summary.csv", |w| {
        writeln!(w, "solver,horizon,step,rows,sup_deviation")?;
        writeln!(w, "{solver},{},{},{rows},{}", fmt_f64(d.horizon), fmt_f64(step), fmt_f64(deviation))
    })?;
    println!("di_solve: solver={solver} rows={rows} sup_deviation={}", fmt_f64(deviation));
    Ok(Outcome::Ok)
}

fn cmd_converge(cfg: &ExperimentConfig, out: &FsPath) -> Result<Outcome, CliError> {
    let c = cfg.converge.as_ref().ok_or_else(|| missing("converge"))?;
    let kernel = build_kernel(cfg)?;
    let a = state(&c.initial)?;
    let limit: Box<dyn Path + Sync> = if let Some(q) = cfg.queue_spec() {
        Box::new(solve_queue_exact(&q.field, &a, c.horizon)?)
    } else {
        let p = cfg.prox_sgd_problem().ok_or_else(|| missing("model"))?;
        let smallest = c.gammas.last().copied().unwrap_or(0.01);
        let step = c.reference_step.unwrap_or(smallest / 10.0);
        Box::new(solve_forward_backward(&p, &a, c.horizon, step)?)
    };
    let sweep = narrow_convergence_sweep(kernel.as_ref(), limit.as_ref(), &a, &c.gammas, c.horizon, c.replicates, c.eps, cfg.seed)?;
    write_atomic(out, "converge_records.csv", |w| sweep.write_records_csv(w))?;
    write_atomic(out, "converge_summary.csv", |w| sweep.write_summary_csv(w))?;
    for s in sweep.summary() {
        println!(
            "converge: gamma={} exceedance={} median={} q90={}",
            fmt_f64(s.gamma),
            fmt_f64(s.exceedance),
            fmt_f64(s.median),
            fmt_f64(s.q90)
        );
    }
    Ok(Outcome::Ok)
}

fn cmd_longrun(cfg: &ExperimentConfig, out: &FsPath) -> Result<Outcome, CliError> {
    let l = cfg.longrun.as_ref().ok_or_else(|| missing("longrun"))?;
    let kernel = build_kernel(cfg)?;
    let a = state(&l.initial)?;
    let target = match &l.target {
        Some(t) => TargetSet::Point(state(t)?),
        None => default_target(cfg)?,
    };
    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    for &g in &l.gammas {
        let stats = longrun_ensemble(kernel.as_ref(), &a, StepSize::new(g)?, l.burnin(), l.iterations, l.replicates, cfg.seed, &target, l.eps)?;
        let m = stats.len() as f64;
        let frac = stats.iter().map(|s| s.fraction_within_eps).sum::<f64>() / m;
        let erg = stats.iter().map(|s| s.ergodic_distance).sum::<f64>() / m;
        eprintln!("longrun: gamma={} done", fmt_f64(g));
        println!("longrun: gamma={} fraction_within_eps={} ergodic_distance={}", fmt_f64(g), fmt_f64(frac), fmt_f64(erg));
        rows.push((g, frac, erg));
        per_seed.extend(stats.into_iter().map(|s| (g, s)));
    }
    write_atomic(out, "longrun.csv", |w| write_longrun_csv(w, &rows))?;
    write_atomic(out, "longrun_replicates.csv", |w| {
        writeln!(w, "gamma,seed,fraction_within_eps,ergodic_distance")?;
        for (g, s) in &per_seed {
            writeln!(w, "{},{},{},{}", fmt_f64(*g), s.seed, fmt_f64(s.fraction_within_eps), fmt_f64(s.ergodic_distance))?;
        }
        Ok(())
    })?;
    Ok(Outcome::Ok)
}

/// Probe points at step `gamma`: explicit probes plus the grid, restricted
/// to the lattice `γℕ^N` for queue models.
pub fn probe_points(cfg: &ExperimentConfig, gamma: f64) -> Vec<StateVector> {
    let Some(p) = &cfg.ph_check else { return Vec::new() };
    let mut raw = p.probes.clone();
    if let Some(g) = &p.grid {
        raw.extend(g.points(cfg.model.dim()));
    }
    let queue = matches!(cfg.model, ModelConfig::Queue { .. });
    raw.into_iter()
        .filter_map(|x| {
            if !queue {
                return StateVector::new(x).ok();
            }
            let mut snapped = Vec::with_capacity(x.len());
            for c in x {
                let k = (c / gamma).round();
                if k < 0.0 || (c / gamma - k).abs() > 1e-6 {
                    return None;
                }
                snapped.push(k * gamma);
            }
            StateVector::new(snapped).ok()
        })
        .collect()
}

fn cmd_ph_check(cfg: &ExperimentConfig, out: &FsPath) -> Result<Outcome, CliError> {
    let p = cfg.ph_check.as_ref().ok_or_else(|| missing("ph_check"))?;
    let kernel = build_kernel(cfg)?;
    let spec = if let Some(q) = cfg.queue_spec() {
        let derived = queue_lyapunov(&q)?;
        match p.constant {
            Some(c) => queue_lyapunov_with_constant(&q, c),
            None => derived,
        }
    } else {
        let problem = cfg.prox_sgd_problem().ok_or_else(|| missing("model"))?;
        prox_sgd_lyapunov(&problem, p.sppl_beta.unwrap_or(1.0), true)?
    };
    let mut report = PhReport::default();
    for (i, &g) in p.gammas.iter().enumerate() {
        let probes = probe_points(cfg, g);
        if probes.is_empty() {
            return Err(ConfigError { line: None, message: format!("no probe lies on the lattice of gamma={g}") }.into());
        }
        let r = ph_check_monte_carlo(kernel.as_ref(), &spec, &probes, StepSize::new(g)?, p.samples, derive_seed(cfg.seed, i as u64))?;
        eprintln!("ph_check: gamma={} probes={} flags={}", fmt_f64(g), r.records.len(), r.flags());
        report.extend(r);
    }
    write_atomic(out, "ph_report.csv", |w| report.write_csv(w))?;
    println!(
        "ph_check: probes={} flags={} negative_psi={}",
        report.records.len(),
        report.flags(),
        report.negative_psi()
    );
    Ok(if report.flags() > 0 { Outcome::Flagged } else { Outcome::Ok })
}

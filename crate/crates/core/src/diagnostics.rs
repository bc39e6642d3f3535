//! Empirical statistics for the limit theorems: sup-distance sweeps over a
//! step grid, long-run and ergodic statistics against declared target sets,
//! the prox-gradient stationarity residual and one-dimensional W₁ between
//! occupation measures.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::di_solver::path_sup_distance;
use crate::error::{check_dim, Error, Result};
use crate::models::{run_chain, Kernel, ProxSgdProblem};
use crate::prox;
use crate::rng::{derive_seed, NoiseStream};
use crate::setvalued::{project_onto_hull, ConvexValue};
use crate::state::{cesaro_window, fmt_f64, InterpolatedPath, OccupationMeasure, Path, StateVector, StepSize, Trajectory};

/// Number of bootstrap resamples behind [`ConvergenceSweep::median_band`].
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

pub type DistanceFn = Arc<dyn Fn(&StateVector) -> f64 + Send + Sync>;

/// A set the iterates should concentrate on, known per model.
#[derive(Clone)]
pub enum TargetSet {
    Point(StateVector),
    FiniteSet(Vec<StateVector>),
    Hull(ConvexValue),
    /// A nonnegative function vanishing exactly on the set.
    Residual(DistanceFn),
}

impl std::fmt::Debug for TargetSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetSet::Point(p) => write!(f, "Point({p})"),
            TargetSet::FiniteSet(s) => write!(f, "FiniteSet({} points)", s.len()),
            TargetSet::Hull(h) => write!(f, "Hull({} generators)", h.generators().len()),
            TargetSet::Residual(_) => write!(f, "Residual"),
        }
    }
}

impl TargetSet {
    pub fn distance(&self, x: &StateVector) -> Result<f64> {
        match self {
            TargetSet::Point(p) => {
                check_dim(p.dim(), x.dim())?;
                Ok(p.distance(x))
            }
            TargetSet::FiniteSet(s) => {
                let mut best = f64::INFINITY;
                for p in s {
                    check_dim(p.dim(), x.dim())?;
                    best = best.min(p.distance(x));
                }
                if s.is_empty() {
                    return Err(Error::Argument("finite target set is empty".into()));
                }
                Ok(best)
            }
            TargetSet::Hull(h) => Ok(project_onto_hull(h, x)?.distance(x)),
            TargetSet::Residual(f) => Ok(f(x)),
        }
    }
}

/// Sup-distance records of a sweep over a step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSweep {
    pub gammas: Vec<f64>,
    pub horizon: f64,
    pub eps: f64,
    /// `records[i]` holds `(seed, d_T)` for `gammas[i]`.
    pub records: Vec<Vec<(u64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    pub gamma: f64,
    pub exceedance: f64,
    pub median: f64,
    pub q90: f64,
}

/// Linear-interpolation quantile of a sample (`q ∈ [0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    sorted_quantile(&v, q)
}

fn sorted_quantile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

impl ConvergenceSweep {
    pub fn distances(&self, i: usize) -> Vec<f64> {
        self.records[i].iter().map(|r| r.1).collect()
    }

    pub fn summary(&self) -> Vec<SweepSummary> {
        (0..self.gammas.len())
            .map(|i| {
                let d = self.distances(i);
                let exceed = d.iter().filter(|x| **x > self.eps).count() as f64 / d.len().max(1) as f64;
                SweepSummary { gamma: self.gammas[i], exceedance: exceed, median: quantile(&d, 0.5), q90: quantile(&d, 0.9) }
            })
            .collect()
    }

    /// Percentile bootstrap 95% band of the median at grid index `i`.
    pub fn median_band(&self, i: usize, seed: u64) -> (f64, f64) {
        let d = self.distances(i);
        let mut noise = NoiseStream::new(seed, i as u64);
        let mut medians: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                let resample: Vec<f64> = (0..d.len()).map(|_| d[noise.random_range(0..d.len())]).collect();
                quantile(&resample, 0.5)
            })
            .collect();
        medians.sort_by(f64::total_cmp);
        (sorted_quantile(&medians, 0.025), sorted_quantile(&medians, 0.975))
    }

    /// CSV `gamma,seed,sup_distance`.
    pub fn write_records_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "gamma,seed,sup_distance")?;
        for (g, recs) in self.gammas.iter().zip(&self.records) {
            for (seed, d) in recs {
                writeln!(w, "{},{},{}", fmt_f64(*g), seed, fmt_f64(*d))?;
            }
        }
        Ok(())
    }

    /// CSV `gamma,exceedance,median,q90`.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "gamma,exceedance,median,q90")?;
        for s in self.summary() {
            writeln!(w, "{},{},{},{}", fmt_f64(s.gamma), fmt_f64(s.exceedance), fmt_f64(s.median), fmt_f64(s.q90))?;
        }
        Ok(())
    }
}

/// Number of steps covering `[0, T]` at step `gamma`.
pub fn steps_for_horizon(horizon: f64, gamma: f64) -> usize {
    (horizon / gamma - 1e-9).ceil() as usize
}

/// For each step size, runs `m` chains from `a` over `[0, T]` and records
/// `d_T(X_γ, limit)`. Chain `j` uses seed `derive_seed(seed, j)` at every
/// step size.
#[allow(clippy::too_many_arguments)]
pub fn narrow_convergence_sweep(
    kernel: &dyn Kernel,
    limit: &(dyn Path + Sync),
    a: &StateVector,
    gammas: &[f64],
    horizon: f64,
    m: usize,
    eps: f64,
    seed: u64,
) -> Result<ConvergenceSweep> {
    if gammas.is_empty() || gammas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Argument("step grid must be non-empty and strictly decreasing".into()));
    }
    if m == 0 {
        return Err(Error::Argument("need at least one chain per step size".into()));
    }
    if !(eps > 0.0) || !(horizon > 0.0) {
        return Err(Error::Argument("eps and T must be positive".into()));
    }
    let mut records = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let gamma = StepSize::new(g)?;
        let n = steps_for_horizon(horizon, g);
        let recs = (0..m as u64)
            .into_par_iter()
            .map(|j| {
                let s = derive_seed(seed, j);
                let traj = run_chain(kernel, a, gamma, n, s)?;
                let d = path_sup_distance(&InterpolatedPath::new(traj), limit, horizon)?;
                Ok((s, d))
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(recs);
    }
    Ok(ConvergenceSweep { gammas: gammas.to_vec(), horizon, eps, records })
}

fn check_trajectories(trajs: &[Trajectory], burnin: usize) -> Result<()> {
    if trajs.is_empty() {
        return Err(Error::Argument("no trajectories".into()));
    }
    if trajs.iter().any(|t| burnin >= t.len()) {
        return Err(Error::Argument(format!("burn-in {burnin} leaves no iterates")));
    }
    Ok(())
}

/// Fraction of post-burn-in iterates within `eps` of `target`, averaged
/// over trajectories.
pub fn longrun_fraction(trajs: &[Trajectory], target: &TargetSet, eps: f64, burnin: usize) -> Result<f64> {
    check_trajectories(trajs, burnin)?;
    let mut total = 0.0;
    for t in trajs {
        let tail = &t.states()[burnin..];
        let mut inside = 0usize;
        for x in tail {
            if target.distance(x)? <= eps {
                inside += 1;
            }
        }
        total += inside as f64 / tail.len() as f64;
    }
    Ok(total / trajs.len() as f64)
}

/// Distance of each trajectory's post-burn-in Cesàro mean to `target`,
/// averaged over trajectories.
pub fn ergodic_distance(trajs: &[Trajectory], target: &TargetSet, burnin: usize) -> Result<f64> {
    check_trajectories(trajs, burnin)?;
    let mut total = 0.0;
    for t in trajs {
        total += target.distance(&cesaro_window(t, burnin, t.len() - 1)?)?;
    }
    Ok(total / trajs.len() as f64)
}

/// Long-run statistics of one chain computed on the fly.
#[derive(Debug, Clone, PartialEq)]
pub struct LongrunStats {
    pub seed: u64,
    pub fraction_within_eps: f64,
    pub cesaro_mean: StateVector,
    pub ergodic_distance: f64,
}

/// Runs `burnin + n` steps from `a` without storing the path and returns
/// the statistics of the last `n + 1` iterates.
#[allow(clippy::too_many_arguments)]
pub fn longrun_streaming(
    kernel: &dyn Kernel,
    a: &StateVector,
    gamma: StepSize,
    burnin: usize,
    n: usize,
    seed: u64,
    target: &TargetSet,
    eps: f64,
) -> Result<LongrunStats> {
    kernel.check_state(a, gamma)?;
    let mut noise = NoiseStream::new(seed, 0);
    let mut x = a.clone();
    for _ in 0..burnin {
        x = kernel.sample_step(&x, gamma, &mut noise)?;
    }
    let mut sum = x.as_slice().to_vec();
    let mut inside = usize::from(target.distance(&x)? <= eps);
    for _ in 0..n {
        x = kernel.sample_step(&x, gamma, &mut noise)?;
        for (s, c) in sum.iter_mut().zip(x.iter()) {
            *s += c;
        }
        inside += usize::from(target.distance(&x)? <= eps);
    }
    let count = (n + 1) as f64;
    let mean = StateVector::new(sum.into_iter().map(|s| s / count).collect())?;
    Ok(LongrunStats {
        seed,
        fraction_within_eps: inside as f64 / count,
        ergodic_distance: target.distance(&mean)?,
        cesaro_mean: mean,
    })
}

/// [`longrun_streaming`] over seeds `derive_seed(seed, j)`, `j < m`.
#[allow(clippy::too_many_arguments)]
pub fn longrun_ensemble(
    kernel: &dyn Kernel,
    a: &StateVector,
    gamma: StepSize,
    burnin: usize,
    n: usize,
    m: usize,
    seed: u64,
    target: &TargetSet,
    eps: f64,
) -> Result<Vec<LongrunStats>> {
    (0..m as u64)
        .into_par_iter()
        .map(|j| longrun_streaming(kernel, a, gamma, burnin, n, derive_seed(seed, j), target, eps))
        .collect()
}

/// CSV `gamma,fraction_within_eps,ergodic_distance`, one row per step size.
pub fn write_longrun_csv<W: Write>(mut w: W, rows: &[(f64, f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "gamma,fraction_within_eps,ergodic_distance")?;
    for (g, f, e) in rows {
        writeln!(w, "{},{},{}", fmt_f64(*g), fmt_f64(*f), fmt_f64(*e))?;
    }
    Ok(())
}

/// `‖(prox_{γr}(x − γ∇L(x)) − x)/γ‖`, zero exactly at stationary points.
pub fn stationarity_residual(problem: &ProxSgdProblem, x: &StateVector, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let g = problem.mean_gradient(x)?;
    let y = prox::prox(problem.regularizer(), gamma, &x.axpy(-gamma, &g))?;
    Ok(y.sub(x).norm() / gamma)
}

/// W₁ between the `coordinate` marginals: `∫ |F_μ(t) − F_ν(t)| dt`.
pub fn wasserstein_1d(mu: &OccupationMeasure, nu: &OccupationMeasure, coordinate: usize) -> Result<f64> {
    check_dim(mu.dim(), nu.dim())?;
    if coordinate >= mu.dim() {
        return Err(Error::Argument(format!("coordinate {coordinate} out of range")));
    }
    // signed mass events: +w for mu, -w for nu
    let mut events: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .map(|(x, w)| (x[coordinate], *w))
        .chain(nu.atoms().iter().map(|(x, w)| (x[coordinate], -*w)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut diff = 0.0;
    for w in events.windows(2) {
        diff += w[0].1;
        total += diff.abs() * (w[1].0 - w[0].0);
    }
    Ok(total)
}

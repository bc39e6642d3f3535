//! Solvers for the limiting differential inclusion `ẋ ∈ H(x)`.
//!
//! [`solve_queue_exact`] integrates the priority-queue mean field event by
//! event in closed form. [`solve_forward_backward`] discretizes
//! `ẋ ∈ -∇L(x) - ∂r(x)`. [`solve_filippov_reference`] is a slow explicit
//! scheme for any finitely generated map, used to cross-check the exact solver.

use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::models::ProxSgdProblem;
use crate::prox;
use crate::setvalued::{project_onto_hull, stability_check, ConvexValue, QueueMeanField};
use crate::state::{fmt_f64, time_slack, Path, StateVector};

/// Hitting times closer than this are treated as one event.
pub const EVENT_MERGE_TOL: f64 = 1e-13;
/// Maximum number of events before [`solve_queue_exact`] gives up.
pub const EVENT_BUDGET: usize = 1_000_000;
/// Uniform points added to the breakpoint grid by [`path_sup_distance`].
pub const SUP_GRID_POINTS: usize = 10_000;

/// A continuous piecewise-linear path given by its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    breakpoints: Vec<f64>,
    nodes: Vec<StateVector>,
    velocities: Vec<StateVector>,
}

impl PiecewisePath {
    pub fn new(breakpoints: Vec<f64>, nodes: Vec<StateVector>, velocities: Vec<StateVector>) -> Result<Self> {
        if breakpoints.len() < 2 || nodes.len() != breakpoints.len() || velocities.len() + 1 != breakpoints.len() {
            return Err(Error::Argument("a piecewise path needs m+1 breakpoints, m+1 nodes and m velocities".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::Argument("first breakpoint must be 0".into()));
        }
        let n = nodes[0].dim();
        for i in 0..velocities.len() {
            let (t0, t1) = (breakpoints[i], breakpoints[i + 1]);
            if !(t1 > t0) {
                return Err(Error::Argument(format!("breakpoints not increasing at index {i}")));
            }
            check_dim(n, nodes[i + 1].dim())?;
            check_dim(n, velocities[i].dim())?;
            let pred = nodes[i].axpy(t1 - t0, &velocities[i]);
            let err = pred.distance(&nodes[i + 1]);
            if err > 1e-12 * nodes[i + 1].norm().max(1.0) {
                return Err(Error::Argument(format!("segment {i} does not end at the next node (gap {err:e})")));
            }
        }
        Ok(PiecewisePath { breakpoints, nodes, velocities })
    }

    pub fn breakpoint_times(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn nodes(&self) -> &[StateVector] {
        &self.nodes
    }

    pub fn segment_velocities(&self) -> &[StateVector] {
        &self.velocities
    }

    pub fn segments(&self) -> usize {
        self.velocities.len()
    }

    /// Index of the segment containing `t` (the later one at a breakpoint).
    pub fn segment_at(&self, t: f64) -> usize {
        let i = self.breakpoints.partition_point(|&b| b <= t);
        i.saturating_sub(1).min(self.segments() - 1)
    }

    /// Writes `t,x_1,...,x_N,segment_id` at every breakpoint merged with
    /// `grid` uniform points on `[0, horizon]`.
    pub fn write_csv<W: Write>(&self, mut w: W, grid: usize) -> std::io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim() {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(w, "{header},segment_id")?;
        for t in merged_grid(std::slice::from_ref(&self.breakpoints), self.horizon(), grid) {
            let x = self.eval(t).map_err(std::io::Error::other)?;
            let mut line = fmt_f64(t);
            for c in x.iter() {
                line.push(',');
                line.push_str(&fmt_f64(*c));
            }
            writeln!(w, "{line},{}", self.segment_at(t))?;
        }
        Ok(())
    }
}

impl Path for PiecewisePath {
    fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty")
    }

    fn eval(&self, t: f64) -> Result<StateVector> {
        let h = self.horizon();
        if !(t >= 0.0) || t > h + time_slack(h) {
            return Err(Error::Range(format!("time {t} outside [0, {h}]")));
        }
        let i = self.segment_at(t);
        Ok(self.nodes[i].axpy(t - self.breakpoints[i], &self.velocities[i]))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// Samples of a numerical solution on the grid `0, step, 2 step, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    step: f64,
    samples: Vec<StateVector>,
}

impl DenseSolution {
    pub fn new(step: f64, samples: Vec<StateVector>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Argument(format!("step must be positive, got {step}")));
        }
        if samples.is_empty() {
            return Err(Error::Argument("dense solution needs at least one sample".into()));
        }
        for s in &samples {
            check_dim(samples[0].dim(), s.dim())?;
        }
        Ok(DenseSolution { step, samples })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[StateVector] {
        &self.samples
    }

    pub fn terminal(&self) -> &StateVector {
        self.samples.last().expect("non-empty")
    }

    /// Writes `t,x_1,...,x_N,segment_id` at every sample; segment `k` joins
    /// samples `k` and `k + 1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim() {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(w, "{header},segment_id")?;
        let last_segment = self.samples.len().saturating_sub(2);
        for (k, x) in self.samples.iter().enumerate() {
            let mut line = fmt_f64(k as f64 * self.step);
            for c in x.iter() {
                line.push(',');
                line.push_str(&fmt_f64(*c));
            }
            writeln!(w, "{line},{}", k.min(last_segment))?;
        }
        Ok(())
    }
}

impl Path for DenseSolution {
    fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    fn horizon(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.step
    }

    fn eval(&self, t: f64) -> Result<StateVector> {
        let h = self.horizon();
        if !(t >= 0.0) || t > h + time_slack(h) {
            return Err(Error::Range(format!("time {t} outside [0, {h}]")));
        }
        let last = self.samples.len() - 1;
        let u = t / self.step;
        let k = (u.floor() as usize).min(last);
        let frac = u - k as f64;
        if k == last || frac <= 0.0 {
            return Ok(self.samples[k].clone());
        }
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        Ok(a.axpy(frac, &b.sub(a)))
    }

    fn breakpoints(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.step).collect()
    }
}

/// Face velocity of the queue DI at a nonnegative `x`.
///
/// Coordinates in the zero prefix consume the service budget in priority
/// order: queue `j` needs a share `λ_j/η_j` to stay empty. The first
/// positive queue is served with whatever budget remains.
pub fn queue_face_velocity(field: &QueueMeanField, x: &StateVector) -> StateVector {
    let (lambda, eta) = (field.lambda(), field.eta());
    let mut budget = 1.0;
    let mut v = lambda.to_vec();
    for j in 0..x.dim() {
        if budget <= 0.0 {
            break;
        }
        let need = lambda[j] / eta[j];
        if x[j] > 0.0 {
            v[j] = lambda[j] - budget * eta[j];
            break;
        }
        if need < budget {
            v[j] = 0.0;
            budget -= need;
        } else {
            v[j] = lambda[j] - budget * eta[j];
            budget = 0.0;
        }
    }
    StateVector::from_raw(v)
}

/// Exact solution of `ẋ ∈ H(x)` for the queue mean field on `[0, T]`.
pub fn solve_queue_exact(field: &QueueMeanField, a: &StateVector, horizon: f64) -> Result<PiecewisePath> {
    check_dim(field.dim(), a.dim())?;
    if let Some(c) = a.iter().find(|c| **c < 0.0) {
        return Err(Error::Domain(format!("initial state must be nonnegative, got coordinate {c}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
    }
    let stable = stability_check(field).stable;
    let mut times = vec![0.0];
    let mut nodes = vec![a.clone()];
    let mut vels = Vec::new();
    let mut x = a.clone();
    let mut t = 0.0;
    loop {
        if vels.len() > EVENT_BUDGET {
            return Err(Error::EventBudget(EVENT_BUDGET));
        }
        let v = queue_face_velocity(field, &x);
        let absorbed = stable && x.iter().all(|c| *c == 0.0);
        let hit = if absorbed {
            None
        } else {
            (0..x.dim())
                .filter(|&k| x[k] > 0.0 && v[k] < 0.0)
                .map(|k| x[k] / -v[k])
                .min_by(f64::total_cmp)
        };
        match hit {
            Some(tau) if t + tau < horizon => {
                let mut next = x.axpy(tau, &v).into_vec();
                for k in 0..next.len() {
                    if x[k] > 0.0 && v[k] < 0.0 && x[k] / -v[k] - tau <= EVENT_MERGE_TOL {
                        next[k] = 0.0;
                    }
                }
                t += tau;
                x = StateVector::from_raw(next);
                times.push(t);
                nodes.push(x.clone());
                vels.push(v);
            }
            _ => {
                let end = x.axpy(horizon - t, &v);
                times.push(horizon);
                nodes.push(end);
                vels.push(v);
                break;
            }
        }
    }
    PiecewisePath::new(times, nodes, vels)
}

fn grid_len(horizon: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
    }
    Ok((horizon / step - 1e-9).ceil() as usize)
}

/// Forward–backward scheme `y ↦ prox_{step r}(y - step ∇L(y))` on `[0, T]`.
pub fn solve_forward_backward(problem: &ProxSgdProblem, a: &StateVector, horizon: f64, step: f64) -> Result<DenseSolution> {
    check_dim(problem.dim(), a.dim())?;
    let c = problem.lipschitz();
    if step * c > 1.0 {
        return Err(Error::Parameter(format!("step {step} exceeds 1/C = {}", 1.0 / c)));
    }
    let n = grid_len(horizon, step)?;
    let mut y = a.clone();
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(y.clone());
    for _ in 0..n {
        let g = problem.mean_gradient(&y)?;
        y = prox::prox(problem.regularizer(), step, &y.axpy(-step, &g))?;
        samples.push(y.clone());
    }
    DenseSolution::new(step, samples)
}

/// Explicit projected scheme for a finitely generated map on the orthant.
///
/// Each step takes the point of `H(ŷ)` closest to the previous realized
/// velocity `(y_j - y_{j-1})/step`, where `ŷ` zeroes coordinates below
/// `10 step`; coordinates are clipped at 0. Using the realized rather than
/// the selected velocity lets the scheme find sliding modes: on a face the
/// clipped coordinate feeds back a velocity that pulls the selection onto
/// the face.
pub fn solve_filippov_reference(
    map: &dyn Fn(&StateVector) -> Result<ConvexValue>,
    a: &StateVector,
    horizon: f64,
    step: f64,
) -> Result<DenseSolution> {
    let n = grid_len(horizon, step)?;
    let snap_tol = 10.0 * step;
    let snap = |y: &StateVector| y.map(|c| if c < snap_tol { 0.0 } else { c });
    let mut y = a.clone();
    let mut prev_v = map(&snap(&y))?.least_norm();
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(y.clone());
    for _ in 0..n {
        let hull = map(&snap(&y))?;
        let v = project_onto_hull(&hull, &prev_v)?;
        let next = y.axpy(step, &v).map(|c| c.max(0.0));
        prev_v = next.sub(&y).scale(1.0 / step);
        y = next;
        samples.push(y.clone());
    }
    DenseSolution::new(step, samples)
}

/// Sorted union of `sets` clipped to `[0, T]` and `points` uniform times.
fn merged_grid(sets: &[Vec<f64>], horizon: f64, points: usize) -> Vec<f64> {
    let mut ts: Vec<f64> = sets.iter().flatten().copied().filter(|t| *t >= 0.0 && *t <= horizon).collect();
    let m = points.max(1);
    ts.extend((0..=m).map(|i| horizon * i as f64 / m as f64));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `d_T(p, q) = sup_{t ≤ T} ‖p(t) - q(t)‖` over breakpoints and a uniform grid.
pub fn path_sup_distance(p: &dyn Path, q: &dyn Path, horizon: f64) -> Result<f64> {
    check_dim(p.dim(), q.dim())?;
    for h in [p.horizon(), q.horizon()] {
        if h + time_slack(h) < horizon {
            return Err(Error::Range(format!("path ends at {h}, before T = {horizon}")));
        }
    }
    let grid = merged_grid(&[p.breakpoints(), q.breakpoints()], horizon, SUP_GRID_POINTS);
    let mut sup: f64 = 0.0;
    for t in grid {
        sup = sup.max(p.eval(t)?.distance(&q.eval(t)?));
    }
    Ok(sup)
}

/// The metric `Σ_n 2^{-n} (1 ∧ d_n(p, q))` truncated to `n ≤ ⌊T⌋`.
/// The dropped tail is at most `2^{-⌊T⌋}`.
pub fn path_weighted_distance(p: &dyn Path, q: &dyn Path, horizon: f64) -> Result<f64> {
    let last = horizon.floor() as i32;
    let mut total = 0.0;
    for n in 0..=last {
        let d = if n == 0 {
            p.eval(0.0)?.distance(&q.eval(0.0)?)
        } else {
            path_sup_distance(p, q, n as f64)?
        };
        total += 0.5f64.powi(n) * d.min(1.0);
    }
    Ok(total)
}

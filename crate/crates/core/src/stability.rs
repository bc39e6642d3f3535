//! Drift-criterion machinery: Lyapunov quadruples `(V, ψ, α, β)`, Monte
//! Carlo checks of `P_γV ≤ V − α(γ)ψ + β(γ)` and the proximal
//! Polyak–Łojasiewicz functional.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::models::{Kernel, ProxSgdProblem, QueueChainSpec};
use crate::prox;
use crate::rng::NoiseStream;
use crate::setvalued::stability_check;
use crate::state::{fmt_f64, StateVector, StepSize};

/// Flagging threshold in standard errors.
pub const FLAG_SIGMAS: f64 = 3.0;
/// Fewest one-step samples accepted by [`ph_check_monte_carlo`].
pub const MIN_PH_SAMPLES: usize = 1000;

pub type StateFn = Arc<dyn Fn(&StateVector) -> f64 + Send + Sync>;
pub type StateGradFn = Arc<dyn Fn(&StateVector) -> StateVector + Send + Sync>;
pub type StepFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LyapunovSpec {
    pub name: String,
    pub v: StateFn,
    pub psi: StateFn,
    pub alpha: StepFn,
    pub beta: StepFn,
    /// `∇V` when `V` is smooth. Enables a control variate in the check.
    pub grad_v: Option<StateGradFn>,
    pub coercive_psi: bool,
}

impl std::fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("name", &self.name)
            .field("coercive_psi", &self.coercive_psi)
            .field("smooth", &self.grad_v.is_some())
            .finish()
    }
}

impl LyapunovSpec {
    /// `max β(γ)/α(γ)` over `gammas`; errors if it is not finite.
    pub fn beta_over_alpha(&self, gammas: &[f64]) -> Result<f64> {
        let mut sup = f64::NEG_INFINITY;
        for &g in gammas {
            let a = (self.alpha)(g);
            if !(a > 0.0) {
                return Err(Error::Specification(format!("alpha({g}) = {a} is not positive")));
            }
            sup = sup.max((self.beta)(g) / a);
        }
        if !sup.is_finite() {
            return Err(Error::Specification("beta/alpha is unbounded on the step grid".into()));
        }
        Ok(sup)
    }

    /// `V(x) − α(γ)ψ(x) + β(γ)`, the bound on `P_γV(x)`.
    pub fn bound(&self, x: &StateVector, gamma: f64) -> f64 {
        (self.v)(x) - (self.alpha)(gamma) * (self.psi)(x) + (self.beta)(gamma)
    }
}

fn weighted_sum(x: &StateVector, eta: &[f64]) -> f64 {
    x.iter().zip(eta).map(|(c, e)| c / e).sum()
}

/// Constant `C` in `P_γV ≤ V − γψ + γ²C` for the queue chain.
///
/// With `S = Σ x^k/η_k` and `D = Σ_j A_j/η_j − B_k/η_k` (`k` the served
/// queue, `B_k ~ Bernoulli(η_k)`), `E V(x₊) = S² + 2γS·E[D] + γ²E[D²]`
/// exactly, and `2S·E[D] ≤ −ψ`. Writing `D = Σ_j Δ_j/η_j` with
/// `Δ_j = A_j − B_j 1{j = k}` and bounding each term separately,
///
/// `E[D²] ≤ Σ_j max(E A_j², E A_j² + η_j(1 − 2λ_j))/η_j² + Σ_{j≠l} λ_jλ_l/(η_jη_l)`.
///
/// The cross terms use `E[Δ_kΔ_l] = (λ_k − η_k)λ_l ≤ λ_kλ_l`. `E A²` is `λ`
/// for Bernoulli and `λ + λ²` for Poisson arrivals.
pub fn queue_lyapunov_constant(spec: &QueueChainSpec) -> f64 {
    let (lambda, eta) = (spec.field.lambda(), spec.field.eta());
    let n = lambda.len();
    let mut c = 0.0;
    for j in 0..n {
        let a2 = spec.arrival_second_moment(j);
        c += a2.max(a2 + eta[j] * (1.0 - 2.0 * lambda[j])) / (eta[j] * eta[j]);
        for l in 0..n {
            if l != j {
                c += lambda[j] * lambda[l] / (eta[j] * eta[l]);
            }
        }
    }
    c
}

/// Exact `E[V(x₊) | x]` for `V = (Σ x^k/η_k)²` on the grid `γℕ^N`.
pub fn queue_expected_v(spec: &QueueChainSpec, x: &StateVector, gamma: f64) -> Result<f64> {
    let (lambda, eta) = (spec.field.lambda(), spec.field.eta());
    check_dim(lambda.len(), x.dim())?;
    let s = weighted_sum(x, eta);
    let rho: f64 = lambda.iter().zip(eta).map(|(l, e)| l / e).sum();
    let n = lambda.len();
    // E[(Σ A_j/η_j)²]
    let mut q = 0.0;
    for j in 0..n {
        q += spec.arrival_second_moment(j) / (eta[j] * eta[j]);
        for l in 0..n {
            if l != j {
                q += lambda[j] * lambda[l] / (eta[j] * eta[l]);
            }
        }
    }
    let (mean_d, second_d) = match x.iter().position(|c| *c > 0.0) {
        Some(k) => (rho - 1.0, q - 2.0 * rho + 1.0 / eta[k]),
        None => (rho, q),
    };
    Ok(s * s + 2.0 * gamma * s * mean_d + gamma * gamma * second_d)
}

/// `V = (Σ x^k/η_k)²`, `ψ = 2(1 − ρ)Σ x^k/η_k`, `α(γ) = γ`, `β(γ) = Cγ²`
/// with `C` from [`queue_lyapunov_constant`].
pub fn queue_lyapunov(spec: &QueueChainSpec) -> Result<LyapunovSpec> {
    let report = stability_check(&spec.field);
    if !report.stable {
        return Err(Error::Precondition(format!("queue field is unstable (load {})", report.load)));
    }
    let c = queue_lyapunov_constant(spec);
    Ok(queue_lyapunov_with_constant(spec, c))
}

/// As [`queue_lyapunov`] with a caller-chosen `C`. Used to build
/// deliberately wrong Lyapunov pairs.
pub fn queue_lyapunov_with_constant(spec: &QueueChainSpec, c: f64) -> LyapunovSpec {
    let eta: Arc<[f64]> = spec.field.eta().into();
    let load = stability_check(&spec.field).load;
    let (e1, e2, e3) = (eta.clone(), eta.clone(), eta);
    LyapunovSpec {
        name: format!("queue C={c}"),
        v: Arc::new(move |x| weighted_sum(x, &e1).powi(2)),
        psi: Arc::new(move |x| 2.0 * (1.0 - load) * weighted_sum(x, &e2)),
        alpha: Arc::new(|g| g),
        beta: Arc::new(move |g| c * g * g),
        grad_v: Some(Arc::new(move |x| {
            let s = weighted_sum(x, &e3);
            StateVector::from_raw(e3.iter().map(|e| 2.0 * s / e).collect())
        })),
        coercive_psi: load < 1.0,
    }
}

/// `V = L + r − min(L + r)`, `ψ = βV − W − ¼‖∇L‖²`, `α(γ) = γ`, `β(γ) = 0`.
pub fn prox_sgd_lyapunov(problem: &ProxSgdProblem, sppl_beta: f64, coercive_psi: bool) -> Result<LyapunovSpec> {
    if !(sppl_beta > 0.0) {
        return Err(Error::Parameter(format!("SPPL constant must be positive, got {sppl_beta}")));
    }
    let min = problem
        .minimum()
        .ok_or_else(|| Error::Specification("minimum of L + r is not known for this problem".into()))?;
    let (p1, p2) = (problem.clone(), problem.clone());
    let v = move |p: &ProxSgdProblem, x: &StateVector| p.objective(x).map(|o| o - min).unwrap_or(f64::INFINITY);
    Ok(LyapunovSpec {
        name: format!("prox_sgd beta={sppl_beta}"),
        v: Arc::new(move |x| v(&p1, x)),
        psi: Arc::new(move |x| {
            let w = p2.gradient_variance(x).unwrap_or(f64::NAN);
            let g = p2.mean_gradient(x).map(|g| g.dot(&g)).unwrap_or(f64::NAN);
            sppl_beta * v(&p2, x) - w - 0.25 * g
        }),
        alpha: Arc::new(|g| g),
        beta: Arc::new(|_| 0.0),
        grad_v: None,
        coercive_psi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhRecord {
    pub probe_id: usize,
    pub gamma: f64,
    pub x: StateVector,
    /// Estimated `P_γV(x) − V(x) + α(γ)ψ(x) − β(γ)`.
    pub gap: f64,
    pub stderr: f64,
    pub flag: bool,
    pub psi_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhReport {
    pub records: Vec<PhRecord>,
}

impl PhReport {
    pub fn flags(&self) -> usize {
        self.records.iter().filter(|r| r.flag).count()
    }

    /// Probes where `ψ < 0`; reported, not rejected.
    pub fn negative_psi(&self) -> usize {
        self.records.iter().filter(|r| r.psi_negative).count()
    }

    pub fn extend(&mut self, other: PhReport) {
        self.records.extend(other.records);
    }

    /// CSV `probe_id,gamma,x_1..x_N,gap,stderr,flag`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.records.first().map_or(0, |r| r.x.dim());
        let mut header = String::from("probe_id,gamma");
        for i in 1..=n {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(w, "{header},gap,stderr,flag")?;
        for r in &self.records {
            let mut line = format!("{},{}", r.probe_id, fmt_f64(r.gamma));
            for c in r.x.iter() {
                line.push(',');
                line.push_str(&fmt_f64(*c));
            }
            writeln!(w, "{line},{},{},{}", fmt_f64(r.gap), fmt_f64(r.stderr), u8::from(r.flag))?;
        }
        Ok(())
    }
}

/// Estimates the drift gap at each probe from `m` one-step samples.
///
/// Probe `i` uses stream `(seed, i)`. When the kernel has an exact drift `g`
/// and `V` is smooth, the estimator averages `V(x₊) − ⟨∇V(x), x₊ − x⟩` and
/// adds back `γ⟨∇V(x), g(x)⟩`, which is unbiased and removes the first-order
/// noise.
pub fn ph_check_monte_carlo(
    kernel: &dyn Kernel,
    spec: &LyapunovSpec,
    probes: &[StateVector],
    gamma: StepSize,
    m: usize,
    seed: u64,
) -> Result<PhReport> {
    if m < MIN_PH_SAMPLES {
        return Err(Error::Argument(format!("need at least {MIN_PH_SAMPLES} samples per probe, got {m}")));
    }
    let g = gamma.gamma();
    let records = probes
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            kernel.check_state(x, gamma)?;
            let mut noise = NoiseStream::new(seed, i as u64);
            let control = match (&spec.grad_v, kernel.exact_drift(x, gamma)?) {
                (Some(grad), Some(drift)) => Some((grad(x), drift)),
                _ => None,
            };
            let (mut mean, mut m2) = (0.0, 0.0);
            for j in 1..=m {
                let next = kernel.sample_step(x, gamma, &mut noise)?;
                let mut y = (spec.v)(&next);
                if let Some((dv, _)) = &control {
                    y -= dv.dot(&next.sub(x));
                }
                let d = y - mean;
                mean += d / j as f64;
                m2 += d * (y - mean);
            }
            if let Some((dv, drift)) = &control {
                mean += g * dv.dot(drift);
            }
            let stderr = (m2.max(0.0) / (m as f64 - 1.0) / m as f64).sqrt();
            let psi = (spec.psi)(x);
            let gap = mean - spec.bound(x, g);
            Ok(PhRecord {
                probe_id: i,
                gamma: g,
                x: x.clone(),
                gap,
                stderr,
                flag: gap > FLAG_SIGMAS * stderr,
                psi_negative: psi < 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhReport { records })
}

/// `D(x, C) = −2C min_y [⟨grad, y − x⟩ + (C/2)‖y − x‖² + r(y) − r(x)]`,
/// minimized at `y = prox_{r/C}(x − grad/C)`.
pub fn ppl_functional(problem: &ProxSgdProblem, grad: &StateVector, x: &StateVector, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("C must be positive, got {c}")));
    }
    check_dim(x.dim(), grad.dim())?;
    let r = problem.regularizer();
    let y = prox::prox(r, 1.0 / c, &x.axpy(-1.0 / c, grad))?;
    let d = y.sub(x);
    let bracket = grad.dot(&d) + 0.5 * c * d.dot(&d) + r.value(&y)? - r.value(x)?;
    Ok(-2.0 * c * bracket)
}

/// `½ E D_{ℓ(ξ,·), r}(x, 1/γ) − β[(L + r)(x) − min]` with standard error.
pub fn sppl_gap(
    problem: &ProxSgdProblem,
    x: &StateVector,
    gamma: StepSize,
    beta: f64,
    m: usize,
    noise: &mut NoiseStream,
) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let min = problem
        .minimum()
        .ok_or_else(|| Error::Specification("minimum of L + r is not known for this problem".into()))?;
    let (mut mean, mut m2) = (0.0, 0.0);
    for j in 1..=m {
        let s = problem.sample(noise);
        let y = 0.5 * ppl_functional(problem, &problem.sample_gradient(&s, x), x, 1.0 / gamma.gamma())?;
        let d = y - mean;
        mean += d / j as f64;
        m2 += d * (y - mean);
    }
    let stderr = (m2 / (m as f64 - 1.0) / m as f64).sqrt();
    Ok((mean - beta * (problem.objective(x)? - min), stderr))
}

/// `W(x) = E‖∇ℓ(ξ, x) − ∇L(x)‖²` from the problem's closed form, with zero
/// standard error.
pub fn variance_w(problem: &ProxSgdProblem, x: &StateVector) -> Result<(f64, f64)> {
    Ok((problem.gradient_variance(x)?, 0.0))
}

/// Monte Carlo estimate of `W(x)` and its standard error.
pub fn variance_w_monte_carlo(
    problem: &ProxSgdProblem,
    x: &StateVector,
    m: usize,
    noise: &mut NoiseStream,
) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let grad = problem.mean_gradient(x)?;
    let (mut mean, mut m2) = (0.0, 0.0);
    for j in 1..=m {
        let s = problem.sample(noise);
        let dev = problem.sample_gradient(&s, x).sub(&grad);
        let y = dev.dot(&dev);
        let d = y - mean;
        mean += d / j as f64;
        m2 += d * (y - mean);
    }
    Ok((mean, (m2.max(0.0) / (m as f64 - 1.0) / m as f64).sqrt()))
}

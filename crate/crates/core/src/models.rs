//! The three Markov kernels: proximal stochastic gradient, the fluid-scaled
//! priority-queue chain and the stochastic proximal point iteration.
//!
//! Each kernel draws one transition `x -> x + γ h_γ(ξ, x)` from a caller-owned
//! [`NoiseStream`] and, where a closed form exists, exposes the exact drift
//! `g_γ(x) = E[h_γ(ξ, x)]`.
//!
//! Moment conditions are not machine-checked. They hold per model as follows:
//! the queue chain has increments bounded by `γ(max arrivals + 1)`, with
//! arrivals of finite second moment; prox-SGD gradients are Gaussian and
//! `‖h_γ‖ ≤ ‖∂⁰r(x)‖ + 2‖∇ℓ(ξ,x)‖`; resolvents are nonexpansive.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::prox::{self, AffineOperator, ConvexFunction, MonotoneOperator};
use crate::quadrature::gaussian_expectation;
use crate::rng::NoiseStream;
use crate::setvalued::QueueMeanField;
use crate::state::{StateVector, StepSize, Trajectory};

fn std_normal(noise: &mut NoiseStream) -> f64 {
    StandardNormal.sample(noise)
}

/// Tolerance of the per-coordinate quadrature behind the prox-SGD drift.
pub const DRIFT_QUADRATURE_TOL: f64 = 1e-10;

/// A transition kernel `P_γ`.
pub trait Kernel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Human-readable parameter listing.
    fn describe(&self) -> String;
    /// Checks that `x` is a valid state at step `gamma`.
    fn check_state(&self, x: &StateVector, _gamma: StepSize) -> Result<()> {
        check_dim(self.dim(), x.dim())
    }
    fn sample_step(&self, x: &StateVector, gamma: StepSize, noise: &mut NoiseStream) -> Result<StateVector>;
    /// Exact drift `g_γ(x)`, or `None` when only Monte Carlo is available.
    fn exact_drift(&self, x: &StateVector, gamma: StepSize) -> Result<Option<StateVector>>;
}

// ---------------------------------------------------------------------------
// prox-SGD

/// Stochastic smooth loss `ℓ(ξ, ·)`.
#[derive(Debug, Clone)]
pub enum LossFamily {
    /// `ℓ(s, x) = ½‖x - s‖²` with `s ~ Normal(mean, σ² I)`.
    GaussianQuadratic { mean: StateVector, sigma: f64 },
    /// `ℓ(s, x) = ½ xᵀ Q_s x - b_sᵀ x` with `Q_s = Q + σ S`, `b_s = b + σ z`,
    /// `S` symmetric with `N(0,1)` diagonal and `N(0,½)` off-diagonal entries
    /// and `z ~ N(0, I)`. Individual losses are indefinite; the mean is not.
    RandomQuadratic { mean_matrix: DMatrix<f64>, mean_offset: DVector<f64>, sigma: f64 },
}

/// One draw of the loss; knows its own gradient.
#[derive(Debug, Clone)]
pub enum LossSample {
    Shift(StateVector),
    Quadratic { matrix: DMatrix<f64>, offset: DVector<f64> },
    /// Zero-noise draw of a random quadratic.
    MeanQuadratic,
}

#[derive(Debug, Clone)]
pub struct ProxSgdProblem {
    loss: LossFamily,
    regularizer: ConvexFunction,
    lipschitz: f64,
}

impl ProxSgdProblem {
    /// The convex desk problem `ℓ(s,x) = ½‖x - s‖²`, `s ~ N(m, σ²I)`, with
    /// regularizer `r`. `∇L(x) = x - m` is 1-Lipschitz.
    pub fn gaussian_quadratic(mean: StateVector, sigma: f64, regularizer: ConvexFunction) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Parameter(format!("sigma must be nonnegative, got {sigma}")));
        }
        regularizer.value(&mean)?;
        Ok(ProxSgdProblem { loss: LossFamily::GaussianQuadratic { mean, sigma }, regularizer, lipschitz: 1.0 })
    }

    /// Canonical instance: `m`, `σ` and `r = ρ‖·‖₁`.
    pub fn canonical(mean: StateVector, sigma: f64, rho: f64) -> Result<Self> {
        Self::gaussian_quadratic(mean, sigma, ConvexFunction::l1(rho)?)
    }

    /// Non-convex exploration family. `mean_matrix` must be symmetric positive
    /// definite; the declared Lipschitz constant is its largest eigenvalue.
    pub fn random_quadratic(
        mean_matrix: DMatrix<f64>,
        mean_offset: DVector<f64>,
        sigma: f64,
        regularizer: ConvexFunction,
    ) -> Result<Self> {
        let n = mean_offset.len();
        if mean_matrix.nrows() != n || mean_matrix.ncols() != n || n == 0 {
            return Err(Error::Parameter("mean matrix must be N x N with N = len(offset)".into()));
        }
        if (&mean_matrix - mean_matrix.transpose()).abs().max() > 1e-12 {
            return Err(Error::Parameter("mean matrix must be symmetric".into()));
        }
        let eig = mean_matrix.clone().symmetric_eigenvalues();
        if eig.min() <= 0.0 {
            return Err(Error::Parameter("mean matrix must be positive definite".into()));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Parameter(format!("sigma must be nonnegative, got {sigma}")));
        }
        Ok(ProxSgdProblem {
            lipschitz: eig.max(),
            loss: LossFamily::RandomQuadratic { mean_matrix, mean_offset, sigma },
            regularizer,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.loss {
            LossFamily::GaussianQuadratic { mean, .. } => mean.dim(),
            LossFamily::RandomQuadratic { mean_offset, .. } => mean_offset.len(),
        }
    }

    pub fn loss(&self) -> &LossFamily {
        &self.loss
    }

    pub fn regularizer(&self) -> &ConvexFunction {
        &self.regularizer
    }

    /// Declared Lipschitz constant `C` of `∇L`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn sigma(&self) -> f64 {
        match &self.loss {
            LossFamily::GaussianQuadratic { sigma, .. } | LossFamily::RandomQuadratic { sigma, .. } => *sigma,
        }
    }

    pub fn sample(&self, noise: &mut NoiseStream) -> LossSample {
        match &self.loss {
            LossFamily::GaussianQuadratic { mean, sigma } => {
                if *sigma == 0.0 {
                    return LossSample::Shift(mean.clone());
                }
                let s = mean
                    .iter()
                    .map(|m| m + sigma * std_normal(noise))
                    .collect::<Vec<f64>>();
                LossSample::Shift(StateVector::from_raw(s))
            }
            LossFamily::RandomQuadratic { mean_matrix, mean_offset, sigma } => {
                if *sigma == 0.0 {
                    return LossSample::MeanQuadratic;
                }
                let n = mean_offset.len();
                let mut q = mean_matrix.clone();
                let off = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
                for i in 0..n {
                    let d = std_normal(noise);
                    q[(i, i)] += sigma * d;
                    for j in (i + 1)..n {
                        let e = sigma * off.sample(noise);
                        q[(i, j)] += e;
                        q[(j, i)] += e;
                    }
                }
                let b = mean_offset + DVector::from_fn(n, |_, _| sigma * std_normal(noise));
                LossSample::Quadratic { matrix: q, offset: b }
            }
        }
    }

    /// `∇ℓ(ξ, x)` for a drawn `ξ`.
    pub fn sample_gradient(&self, sample: &LossSample, x: &StateVector) -> StateVector {
        match (sample, &self.loss) {
            (LossSample::Shift(s), _) => x.sub(s),
            (LossSample::Quadratic { matrix, offset }, _) => quad_grad(matrix, offset, x),
            (LossSample::MeanQuadratic, LossFamily::RandomQuadratic { mean_matrix, mean_offset, .. }) => {
                quad_grad(mean_matrix, mean_offset, x)
            }
            (LossSample::MeanQuadratic, LossFamily::GaussianQuadratic { mean, .. }) => x.sub(mean),
        }
    }

    /// `∇L(x) = E ∇ℓ(ξ, x)`.
    pub fn mean_gradient(&self, x: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), x.dim())?;
        Ok(match &self.loss {
            LossFamily::GaussianQuadratic { mean, .. } => x.sub(mean),
            LossFamily::RandomQuadratic { mean_matrix, mean_offset, .. } => quad_grad(mean_matrix, mean_offset, x),
        })
    }

    /// `L(x) = E ℓ(ξ, x)`.
    pub fn mean_loss(&self, x: &StateVector) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        Ok(match &self.loss {
            LossFamily::GaussianQuadratic { mean, sigma } => {
                0.5 * x.distance(mean).powi(2) + 0.5 * self.dim() as f64 * sigma * sigma
            }
            LossFamily::RandomQuadratic { mean_matrix, mean_offset, .. } => {
                let v = DVector::from_column_slice(x.as_slice());
                0.5 * v.dot(&(mean_matrix * &v)) - mean_offset.dot(&v)
            }
        })
    }

    /// `(L + r)(x)`.
    pub fn objective(&self, x: &StateVector) -> Result<f64> {
        Ok(self.mean_loss(x)? + self.regularizer.value(x)?)
    }

    /// The unique zero of `∇L + ∂r` when known in closed form: for the
    /// Gaussian quadratic family it is `prox_r(m)` with unit step.
    pub fn stationary_point(&self) -> Option<StateVector> {
        match &self.loss {
            LossFamily::GaussianQuadratic { mean, .. } => prox::prox(&self.regularizer, 1.0, mean).ok(),
            LossFamily::RandomQuadratic { .. } => None,
        }
    }

    /// `min (L + r)` when known.
    pub fn minimum(&self) -> Option<f64> {
        self.stationary_point().and_then(|x| self.objective(&x).ok())
    }

    /// Closed form of `W(x) = E‖∇ℓ(ξ,x) - ∇L(x)‖²`.
    pub fn gradient_variance(&self, x: &StateVector) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        let n = self.dim() as f64;
        Ok(match &self.loss {
            LossFamily::GaussianQuadratic { sigma, .. } => n * sigma * sigma,
            LossFamily::RandomQuadratic { sigma, .. } => {
                sigma * sigma * (x.dot(x) * (1.0 + (n - 1.0) / 2.0) + n)
            }
        })
    }
}

fn quad_grad(q: &DMatrix<f64>, b: &DVector<f64>, x: &StateVector) -> StateVector {
    let v = q * DVector::from_column_slice(x.as_slice()) - b;
    StateVector::from_raw(v.iter().copied().collect())
}

/// `x_{n+1} = prox_{γr}(x_n - γ ∇ℓ(ξ_{n+1}, x_n))`.
#[derive(Debug, Clone)]
pub struct ProxSgdKernel {
    problem: ProxSgdProblem,
}

pub fn kernel_prox_sgd(problem: ProxSgdProblem) -> ProxSgdKernel {
    ProxSgdKernel { problem }
}

impl ProxSgdKernel {
    pub fn problem(&self) -> &ProxSgdProblem {
        &self.problem
    }

    /// The transition for a given draw.
    pub fn step_with(&self, sample: &LossSample, x: &StateVector, gamma: StepSize) -> Result<StateVector> {
        let g = self.problem.sample_gradient(sample, x);
        prox::prox(&self.problem.regularizer, gamma.gamma(), &x.axpy(-gamma.gamma(), &g))
    }

    /// `h_γ(ξ, x) = γ^{-1}(prox_{γr}(x - γ∇ℓ(ξ,x)) - x)`.
    pub fn h_gamma(&self, sample: &LossSample, x: &StateVector, gamma: StepSize) -> Result<StateVector> {
        Ok(self.step_with(sample, x, gamma)?.sub(x).scale(1.0 / gamma.gamma()))
    }
}

impl Kernel for ProxSgdKernel {
    fn name(&self) -> &str {
        "prox_sgd"
    }

    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn describe(&self) -> String {
        format!("prox_sgd loss={:?} r={:?} C={}", self.problem.loss, self.problem.regularizer, self.problem.lipschitz)
    }

    fn sample_step(&self, x: &StateVector, gamma: StepSize, noise: &mut NoiseStream) -> Result<StateVector> {
        check_dim(self.dim(), x.dim())?;
        let s = self.problem.sample(noise);
        self.step_with(&s, x, gamma)
    }

    /// For the Gaussian quadratic family with a separable regularizer, the
    /// pre-prox point is `N((1-γ)x + γm, γ²σ²I)` and each coordinate of the
    /// expected step is a one-dimensional Gaussian integral.
    fn exact_drift(&self, x: &StateVector, gamma: StepSize) -> Result<Option<StateVector>> {
        check_dim(self.dim(), x.dim())?;
        let r = &self.problem.regularizer;
        let g = gamma.gamma();
        match &self.problem.loss {
            LossFamily::GaussianQuadratic { mean, sigma } if r.is_separable() => {
                let tau = g * sigma;
                let mut drift = Vec::with_capacity(x.dim());
                for i in 0..x.dim() {
                    let mu = (1.0 - g) * x[i] + g * mean[i];
                    let f = |z: f64| r.prox_scalar(i, g, z).unwrap_or(f64::NAN);
                    let e = gaussian_expectation(&f, mu, tau, &r.prox_kinks(i, g), DRIFT_QUADRATURE_TOL);
                    drift.push((e - x[i]) / g);
                }
                StateVector::new(drift).map(Some)
            }
            LossFamily::RandomQuadratic { sigma, .. } if *sigma == 0.0 => {
                Ok(Some(self.h_gamma(&LossSample::MeanQuadratic, x, gamma)?))
            }
            _ => Ok(None),
        }
    }
}

// ---------------------------------------------------------------------------
// queues

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalLaw {
    Bernoulli,
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueChainSpec {
    pub field: QueueMeanField,
    pub arrivals: ArrivalLaw,
}

impl QueueChainSpec {
    pub fn new(field: QueueMeanField, arrivals: ArrivalLaw) -> Result<Self> {
        if arrivals == ArrivalLaw::Bernoulli && field.lambda().iter().any(|l| *l > 1.0) {
            return Err(Error::Parameter("Bernoulli arrivals need rates <= 1".into()));
        }
        Ok(QueueChainSpec { field, arrivals })
    }

    /// `E[A²]` of one queue's arrivals.
    pub fn arrival_second_moment(&self, k: usize) -> f64 {
        let l = self.field.lambda()[k];
        match self.arrivals {
            ArrivalLaw::Bernoulli => l,
            ArrivalLaw::Poisson => l + l * l,
        }
    }
}

/// Fluid-scaled queue chain living on `γℕ^N`.
#[derive(Debug, Clone)]
pub struct QueueKernel {
    spec: QueueChainSpec,
    poisson: Vec<Option<Poisson<f64>>>,
}

pub fn kernel_queue(spec: QueueChainSpec) -> QueueKernel {
    let poisson = spec
        .field
        .lambda()
        .iter()
        .map(|&l| match spec.arrivals {
            ArrivalLaw::Poisson => Some(Poisson::new(l).expect("positive rate")),
            ArrivalLaw::Bernoulli => None,
        })
        .collect();
    QueueKernel { spec, poisson }
}

impl QueueKernel {
    pub fn spec(&self) -> &QueueChainSpec {
        &self.spec
    }

    pub fn field(&self) -> &QueueMeanField {
        &self.spec.field
    }

    /// Queue lengths `y = x/γ`; errors off the grid.
    pub fn counts(&self, x: &StateVector, gamma: StepSize) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.dim())?;
        let g = gamma.gamma();
        x.iter()
            .map(|&c| {
                let y = c / g;
                let r = y.round();
                if r < 0.0 || (y - r).abs() > 1e-6 {
                    Err(Error::Domain(format!("{c} is not a point of the grid {g}·ℕ")))
                } else {
                    Ok(r)
                }
            })
            .collect()
    }

    /// `γ y` with the same rounding as every state the chain produces.
    pub fn grid_point(counts: &[f64], gamma: StepSize) -> StateVector {
        StateVector::from_raw(counts.iter().map(|y| gamma.gamma() * y).collect())
    }
}

impl Kernel for QueueKernel {
    fn name(&self) -> &str {
        "queue"
    }

    fn dim(&self) -> usize {
        self.spec.field.dim()
    }

    fn describe(&self) -> String {
        format!(
            "queue lambda={:?} eta={:?} arrivals={:?}",
            self.spec.field.lambda(),
            self.spec.field.eta(),
            self.spec.arrivals
        )
    }

    fn check_state(&self, x: &StateVector, gamma: StepSize) -> Result<()> {
        self.counts(x, gamma).map(|_| ())
    }

    fn sample_step(&self, x: &StateVector, gamma: StepSize, noise: &mut NoiseStream) -> Result<StateVector> {
        let mut y = self.counts(x, gamma)?;
        let served = y.iter().position(|&c| c > 0.0);
        for (k, yk) in y.iter_mut().enumerate() {
            *yk += match &self.poisson[k] {
                Some(p) => p.sample(noise),
                None => f64::from(u8::from(noise.bernoulli(self.spec.field.lambda()[k]))),
            };
        }
        if let Some(k) = served {
            if noise.bernoulli(self.spec.field.eta()[k]) {
                y[k] -= 1.0;
            }
        }
        Ok(Self::grid_point(&y, gamma))
    }

    /// `g^k(x) = λ_k - η_k 1{x^k > 0, x^j = 0 for j < k}`.
    fn exact_drift(&self, x: &StateVector, gamma: StepSize) -> Result<Option<StateVector>> {
        let y = self.counts(x, gamma)?;
        let mut g = self.spec.field.lambda().to_vec();
        if let Some(k) = y.iter().position(|&c| c > 0.0) {
            g[k] -= self.spec.field.eta()[k];
        }
        Ok(Some(StateVector::from_raw(g)))
    }
}

// ---------------------------------------------------------------------------
// stochastic proximal point

/// Law of the random monotone operator `A(ξ, ·)`.
#[derive(Debug, Clone)]
pub enum SppFamily {
    /// `A(s, x) = x - s`, `s ~ N(mean, σ² I)`. Mean operator zero: `mean`.
    GaussianShift { mean: StateVector, sigma: f64 },
    /// `A(s, ·) = ∂‖· - s‖₁` with iid coordinates `s_i = ±magnitude`.
    /// The mean operator vanishes on the box `[-magnitude, magnitude]^N`.
    SignedShift { magnitude: f64, dim: usize },
    /// Deterministic affine operator.
    Affine(AffineOperator),
}

#[derive(Debug, Clone)]
pub struct SppSpec {
    family: SppFamily,
}

impl SppSpec {
    pub fn new(family: SppFamily) -> Result<Self> {
        match &family {
            SppFamily::GaussianShift { sigma, .. } if !(sigma.is_finite() && *sigma >= 0.0) => {
                return Err(Error::Parameter("sigma must be nonnegative".into()))
            }
            SppFamily::SignedShift { magnitude, dim } if !(*magnitude > 0.0) || *dim == 0 => {
                return Err(Error::Parameter("signed shift needs positive magnitude and dimension".into()))
            }
            _ => {}
        }
        Ok(SppSpec { family })
    }

    pub fn family(&self) -> &SppFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            SppFamily::GaussianShift { mean, .. } => mean.dim(),
            SppFamily::SignedShift { dim, .. } => *dim,
            SppFamily::Affine(a) => a.dim(),
        }
    }

    /// Draws `A(ξ, ·)`.
    pub fn sample_operator(&self, noise: &mut NoiseStream) -> MonotoneOperator {
        match &self.family {
            SppFamily::GaussianShift { mean, sigma } => {
                let n = mean.dim();
                let s: Vec<f64> = mean.iter().map(|m| m + sigma * std_normal(noise)).collect();
                let op = AffineOperator::new(
                    DMatrix::identity(n, n),
                    DVector::from_iterator(n, s.iter().map(|v| -v)),
                )
                .expect("identity is monotone");
                MonotoneOperator::Affine(op)
            }
            SppFamily::SignedShift { magnitude, dim } => {
                let s: Vec<f64> =
                    (0..*dim).map(|_| if noise.bernoulli(0.5) { *magnitude } else { -*magnitude }).collect();
                MonotoneOperator::Subdifferential(ConvexFunction::shifted(
                    ConvexFunction::l1(1.0).expect("unit weight"),
                    StateVector::from_raw(s),
                ))
            }
            SppFamily::Affine(a) => MonotoneOperator::Affine(a.clone()),
        }
    }

    /// Zero of the mean operator when it is a single point.
    pub fn mean_zero(&self) -> Option<StateVector> {
        match &self.family {
            SppFamily::GaussianShift { mean, .. } => Some(mean.clone()),
            SppFamily::SignedShift { .. } => None,
            SppFamily::Affine(a) => a.zero(),
        }
    }

    /// Distance from `x` to the zero set of the mean operator.
    pub fn distance_to_zeros(&self, x: &StateVector) -> Option<f64> {
        match &self.family {
            SppFamily::SignedShift { magnitude, .. } => Some(
                x.iter().map(|c| (c.abs() - magnitude).max(0.0).powi(2)).sum::<f64>().sqrt(),
            ),
            _ => self.mean_zero().map(|z| z.distance(x)),
        }
    }
}

/// `x_{n+1} = (I + γ A(ξ_{n+1}, ·))^{-1}(x_n)`.
#[derive(Debug, Clone)]
pub struct SppKernel {
    spec: SppSpec,
}

pub fn kernel_spp(spec: SppSpec) -> SppKernel {
    SppKernel { spec }
}

impl SppKernel {
    pub fn spec(&self) -> &SppSpec {
        &self.spec
    }

    /// `h_γ(ξ, x) = -Yosida_γ(A(ξ,·))(x)`.
    pub fn h_gamma(&self, op: &MonotoneOperator, x: &StateVector, gamma: StepSize) -> Result<StateVector> {
        Ok(prox::yosida(op, gamma.gamma(), x)?.scale(-1.0))
    }
}

impl Kernel for SppKernel {
    fn name(&self) -> &str {
        "spp"
    }

    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn describe(&self) -> String {
        format!("spp family={:?}", self.spec.family)
    }

    fn sample_step(&self, x: &StateVector, gamma: StepSize, noise: &mut NoiseStream) -> Result<StateVector> {
        check_dim(self.dim(), x.dim())?;
        let g = gamma.gamma();
        match &self.spec.family {
            // resolvent of x - s in closed form
            SppFamily::GaussianShift { mean, sigma } => Ok(StateVector::from_raw(
                x.iter()
                    .zip(mean.iter())
                    .map(|(xi, m)| {
                        let s = m + sigma * std_normal(noise);
                        (xi + g * s) / (1.0 + g)
                    })
                    .collect(),
            )),
            _ => {
                let op = self.spec.sample_operator(noise);
                prox::resolvent(&op, g, x)
            }
        }
    }

    fn exact_drift(&self, x: &StateVector, gamma: StepSize) -> Result<Option<StateVector>> {
        check_dim(self.dim(), x.dim())?;
        let g = gamma.gamma();
        Ok(Some(match &self.spec.family {
            SppFamily::GaussianShift { mean, .. } => mean.sub(x).scale(1.0 / (1.0 + g)),
            SppFamily::SignedShift { magnitude, .. } => {
                let c = *magnitude;
                let step = |xi: f64, s: f64| s + (xi - s).signum() * ((xi - s).abs() - g).max(0.0);
                StateVector::from_raw(
                    x.iter().map(|&xi| (0.5 * (step(xi, c) + step(xi, -c)) - xi) / g).collect(),
                )
            }
            SppFamily::Affine(a) => prox::yosida(&MonotoneOperator::Affine(a.clone()), g, x)?.scale(-1.0),
        }))
    }
}

// ---------------------------------------------------------------------------
// generic operations

/// Monte Carlo drift with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub mean: StateVector,
    pub stderr: Vec<f64>,
}

/// Sample mean of `γ^{-1}(x₊ - x)` over `m` fresh transitions.
pub fn drift_estimate(
    kernel: &dyn Kernel,
    x: &StateVector,
    gamma: StepSize,
    m: usize,
    noise: &mut NoiseStream,
) -> Result<DriftEstimate> {
    if m < 2 {
        return Err(Error::Argument("drift estimate needs at least two samples".into()));
    }
    kernel.check_state(x, gamma)?;
    let n = x.dim();
    // Welford: identical samples give exactly zero spread
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for j in 1..=m {
        let next = kernel.sample_step(x, gamma, noise)?;
        for i in 0..n {
            let h = (next[i] - x[i]) / gamma.gamma();
            let d = h - mean[i];
            mean[i] += d / j as f64;
            m2[i] += d * (h - mean[i]);
        }
    }
    let mf = m as f64;
    let stderr = m2.iter().map(|s| (s.max(0.0) / (mf - 1.0) / mf).sqrt()).collect();
    Ok(DriftEstimate { mean: StateVector::from_raw(mean), stderr })
}

/// Runs `n` transitions from `a` on the stream `(seed, 0)`.
pub fn run_chain(kernel: &dyn Kernel, a: &StateVector, gamma: StepSize, n: usize, seed: u64) -> Result<Trajectory> {
    run_chain_thinned(kernel, a, gamma, n, seed, 1)
}

/// As [`run_chain`], keeping every `stride`-th iterate (and always `x_0`).
pub fn run_chain_thinned(
    kernel: &dyn Kernel,
    a: &StateVector,
    gamma: StepSize,
    n: usize,
    seed: u64,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::Argument("stride must be positive".into()));
    }
    kernel.check_state(a, gamma)?;
    let mut noise = NoiseStream::new(seed, 0);
    let mut states = Vec::with_capacity(n / stride + 1);
    states.push(a.clone());
    let mut x = a.clone();
    for k in 1..=n {
        x = kernel.sample_step(&x, gamma, &mut noise)?;
        if k % stride == 0 {
            states.push(x.clone());
        }
    }
    Trajectory::with_stride(gamma, states, seed, stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::decompose_increment;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    fn step(g: f64) -> StepSize {
        StepSize::new(g).unwrap()
    }

    fn canonical_queue() -> QueueKernel {
        let f = QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8]).unwrap();
        kernel_queue(QueueChainSpec::new(f, ArrivalLaw::Bernoulli).unwrap())
    }

    fn close(a: &StateVector, b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn queue_drift_examples() {
        let k = canonical_queue();
        let g = step(0.1);
        assert!(close(&k.exact_drift(&sv(&[0.3, 0.2]), g).unwrap().unwrap(), &[-0.4, 0.2], 1e-15));
        assert!(close(&k.exact_drift(&sv(&[0.0, 0.2]), g).unwrap().unwrap(), &[0.1, -0.6], 1e-15));
        assert!(close(&k.exact_drift(&sv(&[0.0, 0.0]), g).unwrap().unwrap(), &[0.1, 0.2], 0.0));
        assert!(matches!(k.exact_drift(&sv(&[0.05, 0.0]), g), Err(Error::Domain(_))));
        assert!(matches!(k.exact_drift(&sv(&[-0.1, 0.0]), g), Err(Error::Domain(_))));
    }

    #[test]
    fn queue_noise_part_is_increment_minus_drift() {
        let k = canonical_queue();
        let g = step(0.1);
        let x = sv(&[0.3, 0.2]);
        let mut noise = NoiseStream::new(11, 0);
        let next = k.sample_step(&x, g, &mut noise).unwrap();
        let drift = k.exact_drift(&x, g).unwrap().unwrap();
        let d = decompose_increment(&x, &next, g, &drift).unwrap();
        let want = next.sub(&x).sub(&sv(&[-0.04, 0.02]));
        assert!(close(&d.noise_part, want.as_slice(), 1e-15));
        assert!(close(&d.drift_part.add(&d.noise_part), next.sub(&x).as_slice(), 1e-12));
    }

    #[test]
    fn queue_trajectory_stays_on_grid_with_bounded_increments() {
        let k = canonical_queue();
        let g = step(0.1);
        let t = run_chain(&k, &sv(&[1.0, 1.0]), g, 5000, 3).unwrap();
        for w in t.states().windows(2) {
            assert!(w[1].sub(&w[0]).norm_inf() <= 2.0 * 0.1 + 1e-15);
        }
        for x in t.states() {
            for &c in x.iter() {
                assert!(c >= 0.0);
                assert_eq!(c, 0.1 * (c / 0.1).round());
            }
        }
    }

    #[test]
    fn poisson_arrivals_run() {
        let f = QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8]).unwrap();
        let k = kernel_queue(QueueChainSpec::new(f, ArrivalLaw::Poisson).unwrap());
        let t = run_chain(&k, &sv(&[0.0, 0.0]), step(0.1), 1000, 1).unwrap();
        assert_eq!(t.len(), 1001);
        let spec = k.spec();
        assert!((spec.arrival_second_moment(0) - 0.11).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_needs_rates_at_most_one() {
        let f = QueueMeanField::new(vec![1.5], vec![1.0]).unwrap();
        assert!(QueueChainSpec::new(f.clone(), ArrivalLaw::Bernoulli).is_err());
        assert!(QueueChainSpec::new(f, ArrivalLaw::Poisson).is_ok());
    }

    #[test]
    fn prox_sgd_deterministic_examples() {
        // r = 0, ℓ = ½‖x‖² (s ≡ 0): one step is (1-γ)x
        let p = ProxSgdProblem::gaussian_quadratic(sv(&[0.0, 0.0]), 0.0, ConvexFunction::Zero).unwrap();
        let k = kernel_prox_sgd(p);
        let mut noise = NoiseStream::new(0, 0);
        let x = sv(&[1.0, -2.0]);
        let next = k.sample_step(&x, step(0.1), &mut noise).unwrap();
        assert!(close(&next, &[0.9, -1.8], 1e-15));

        let p = ProxSgdProblem::canonical(sv(&[2.0, -0.3]), 0.0, 0.5).unwrap();
        let star = p.stationary_point().unwrap();
        assert!(close(&star, &[1.5, 0.0], 1e-15));
        let k = kernel_prox_sgd(p);
        let next = k.sample_step(&star, step(0.1), &mut noise).unwrap();
        assert!(close(&next, &[1.5, 0.0], 1e-15));
        let est = drift_estimate(&k, &sv(&[0.3, 0.3]), step(0.1), 10, &mut noise).unwrap();
        assert_eq!(est.stderr, vec![0.0, 0.0]);
    }

    #[test]
    fn prox_sgd_h_gamma_bound() {
        let p = ProxSgdProblem::canonical(sv(&[2.0, -0.3]), 1.0, 0.5).unwrap();
        let k = kernel_prox_sgd(p.clone());
        let mut noise = NoiseStream::new(5, 0);
        let g = step(0.1);
        for i in 0..200 {
            let x = sv(&[(i as f64 * 0.37).sin() * 4.0, if i % 3 == 0 { 0.0 } else { (i as f64).cos() }]);
            let s = p.sample(&mut noise);
            let h = k.h_gamma(&s, &x, g).unwrap();
            let lhs = h.norm();
            let rhs = prox::least_norm_subgradient(p.regularizer(), &x).unwrap().norm()
                + 2.0 * p.sample_gradient(&s, &x).norm();
            assert!(lhs <= rhs + 1e-10);
        }
    }

    #[test]
    fn prox_sgd_random_quadratic_family() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DVector::from_column_slice(&[1.0, -1.0]);
        let p = ProxSgdProblem::random_quadratic(q.clone(), b.clone(), 0.5, ConvexFunction::l1(0.1).unwrap()).unwrap();
        assert!(p.lipschitz() > 2.0 && p.lipschitz() < 2.5);
        assert!(p.stationary_point().is_none());
        let k = kernel_prox_sgd(p.clone());
        assert!(k.exact_drift(&sv(&[0.0, 0.0]), step(0.1)).unwrap().is_none());
        let t = run_chain(&k, &sv(&[0.0, 0.0]), step(0.05), 200, 9).unwrap();
        assert_eq!(t.len(), 201);
        assert!(ProxSgdProblem::random_quadratic(-q, b, 0.5, ConvexFunction::Zero).is_err());
    }

    #[test]
    fn spp_examples() {
        let g = step(0.5);
        let spec = SppSpec::new(SppFamily::GaussianShift { mean: sv(&[1.0]), sigma: 0.0 }).unwrap();
        let k = kernel_spp(spec);
        let mut noise = NoiseStream::new(1, 0);
        assert!(close(&k.sample_step(&sv(&[1.0]), g, &mut noise).unwrap(), &[1.0], 1e-15));
        assert!(close(&k.sample_step(&sv(&[0.0]), g, &mut noise).unwrap(), &[1.0 / 3.0], 1e-15));

        let spec = SppSpec::new(SppFamily::SignedShift { magnitude: 1.0, dim: 1 }).unwrap();
        let k = kernel_spp(spec);
        let mut seen = [false, false];
        for _ in 0..64 {
            let x1 = k.sample_step(&sv(&[0.0]), g, &mut noise).unwrap()[0];
            assert!((x1.abs() - 0.5).abs() < 1e-15);
            seen[usize::from(x1 > 0.0)] = true;
        }
        assert_eq!(seen, [true, true]);
        assert!(close(&k.exact_drift(&sv(&[0.0]), g).unwrap().unwrap(), &[0.0], 0.0));

        let op = AffineOperator::from_rows(&[vec![0.1, 1.0], vec![-1.0, 0.1]], &[0.0, 0.0]).unwrap();
        let k = kernel_spp(SppSpec::new(SppFamily::Affine(op)).unwrap());
        let t = run_chain(&k, &sv(&[1.0, 1.0]), step(0.1), 2000, 0).unwrap();
        let last = t.states().last().unwrap();
        assert!(last.norm() < 1e-3);
        for w in t.states().windows(2) {
            assert!(w[1].norm() <= w[0].norm() + 1e-15);
        }
    }

    #[test]
    fn spp_sampled_operators_are_monotone_and_h_gamma_is_minus_yosida() {
        let spec = SppSpec::new(SppFamily::GaussianShift { mean: sv(&[1.0, 2.0]), sigma: 1.0 }).unwrap();
        let k = kernel_spp(spec.clone());
        let mut noise = NoiseStream::new(2, 0);
        let x = sv(&[0.5, -0.5]);
        for _ in 0..20 {
            let op = spec.sample_operator(&mut noise);
            let h = k.h_gamma(&op, &x, step(0.2)).unwrap();
            let next = prox::resolvent(&op, 0.2, &x).unwrap();
            assert!(close(&next, x.axpy(0.2, &h).as_slice(), 1e-14));
        }
    }

    #[test]
    fn run_chain_contracts() {
        let k = canonical_queue();
        let a = sv(&[0.5, 0.5]);
        let t = run_chain(&k, &a, step(0.1), 0, 1).unwrap();
        assert_eq!(t.states(), std::slice::from_ref(&a));
        let t1 = run_chain(&k, &a, step(0.1), 500, 77).unwrap();
        let t2 = run_chain(&k, &a, step(0.1), 500, 77).unwrap();
        assert_eq!(t1, t2);
        let thin = run_chain_thinned(&k, &a, step(0.1), 500, 77, 10).unwrap();
        assert_eq!(thin.len(), 51);
        assert_eq!(thin.states()[50], t1.states()[500]);
        assert!((thin.horizon() - t1.horizon()).abs() < 1e-12);
        assert!(run_chain(&k, &sv(&[0.55, 0.5]), step(0.1), 5, 1).is_err());
        assert!(drift_estimate(&k, &a, step(0.1), 1, &mut NoiseStream::new(0, 0)).is_err());
    }
}

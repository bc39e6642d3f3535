//! Experiment configuration files.
//!
//! A config is a TOML document with a top-level `seed`, a `[model]` table and
//! one optional table per subcommand. Numeric fields are validated after
//! parsing and every validation error carries the line of the offending key.
//!
//! ```toml
//! seed = 42
//!
//! [model]
//! kind = "queue"
//! lambda = [0.1, 0.2]
//! eta = [0.5, 0.8]
//!
//! [simulate]
//! gamma = 0.1
//! initial = [1.0, 1.0]
//! steps = 100
//! seeds = [1, 2, 3]
//! ```

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ArrivalLaw, ProxSgdProblem, QueueChainSpec, SppFamily, SppSpec};
use crate::prox::{AffineOperator, ConvexFunction};
use crate::setvalued::QueueMeanField;
use crate::state::StateVector;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError { line, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrivals {
    #[default]
    Bernoulli,
    Poisson,
}

impl From<Arrivals> for ArrivalLaw {
    fn from(a: Arrivals) -> Self {
        match a {
            Arrivals::Bernoulli => ArrivalLaw::Bernoulli,
            Arrivals::Poisson => ArrivalLaw::Poisson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Queue {
        lambda: Vec<f64>,
        eta: Vec<f64>,
        #[serde(default)]
        arrivals: Arrivals,
    },
    /// `ℓ(s,x) = ½‖x − s‖²`, `s ~ N(mean, σ²I)`, `r = rho‖·‖₁`.
    ProxSgd { mean: Vec<f64>, sigma: f64, rho: f64 },
    SppGaussianShift { mean: Vec<f64>, sigma: f64 },
    SppSignedShift { magnitude: f64, dim: usize },
    SppAffine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
}

impl ModelConfig {
    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::Queue { lambda, .. } => lambda.len(),
            ModelConfig::ProxSgd { mean, .. } | ModelConfig::SppGaussianShift { mean, .. } => mean.len(),
            ModelConfig::SppSignedShift { dim, .. } => *dim,
            ModelConfig::SppAffine { offset, .. } => offset.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub gamma: f64,
    pub initial: Vec<f64>,
    /// Number of transitions `n`.
    pub steps: usize,
    /// Explicit chain seeds. When absent, `replicates` seeds are derived from
    /// the top-level seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    ForwardBackward,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiSolveConfig {
    pub solver: SolverKind,
    pub initial: Vec<f64>,
    pub horizon: f64,
    /// Step of the forward–backward and reference schemes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Uniform points added to the breakpoints of an exact solution.
    #[serde(default)]
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub gammas: Vec<f64>,
    pub initial: Vec<f64>,
    pub horizon: f64,
    pub replicates: usize,
    pub eps: f64,
    /// Forward–backward step of the limit path for prox-SGD; defaults to a
    /// tenth of the smallest step size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongrunConfig {
    pub gammas: Vec<f64>,
    pub initial: Vec<f64>,
    /// Iterates kept after burn-in.
    pub iterations: usize,
    /// Defaults to 10% of `iterations`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burnin: Option<usize>,
    pub replicates: usize,
    pub eps: f64,
    /// Target point; defaults to the model's known zero set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
}

impl LongrunConfig {
    pub fn burnin(&self) -> usize {
        self.burnin.unwrap_or(self.iterations / 10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhCheckConfig {
    pub gammas: Vec<f64>,
    pub samples: usize,
    /// Explicit probe points.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
    /// Per-coordinate probe grid `lower, lower + spacing, ... ≤ upper`,
    /// snapped to each step size's lattice for queue models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<ProbeGrid>,
    /// Overrides the derived constant `C` of the queue drift bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// SPPL constant for prox-SGD models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sppl_beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGrid {
    pub lower: f64,
    pub upper: f64,
    pub spacing: f64,
}

impl ProbeGrid {
    pub fn axis(&self) -> Vec<f64> {
        let n = ((self.upper - self.lower) / self.spacing + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lower + i as f64 * self.spacing).collect()
    }

    /// Cartesian product of the axis with itself in dimension `dim`.
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let mut out: Vec<Vec<f64>> = vec![vec![]];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub di_solve: Option<DiSolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longrun: Option<LongrunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ph_check: Option<PhCheckConfig>,
}

/// Line (1-based) of `key` inside `[section]`, or of the section header
/// when the key is absent. `section = ""` addresses top-level keys.
pub fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

struct Checker<'a> {
    source: Option<&'a str>,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
        let line = self.source.and_then(|s| locate(s, section, key));
        ConfigError::at(line, format!("{}{key}: {}", if section.is_empty() { String::new() } else { format!("{section}.") }, msg.into()))
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> Result<(), ConfigError> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(self.fail(section, key, format!("must be positive, got {v}")))
        }
    }

    fn step(&self, section: &str, key: &str, v: f64) -> Result<(), ConfigError> {
        if v > 0.0 && v < 1.0 {
            Ok(())
        } else {
            Err(self.fail(section, key, format!("step size must lie in (0, 1), got {v}")))
        }
    }

    fn decreasing(&self, section: &str, key: &str, g: &[f64]) -> Result<(), ConfigError> {
        if g.is_empty() {
            return Err(self.fail(section, key, "must not be empty"));
        }
        for v in g {
            self.step(section, key, *v)?;
        }
        if g.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(self.fail(section, key, "must be strictly decreasing"));
        }
        Ok(())
    }

    fn finite(&self, section: &str, key: &str, v: &[f64]) -> Result<(), ConfigError> {
        if v.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(self.fail(section, key, "entries must be finite"))
        }
    }

    fn dim(&self, section: &str, key: &str, v: &[f64], n: usize) -> Result<(), ConfigError> {
        self.finite(section, key, v)?;
        if v.len() == n {
            Ok(())
        } else {
            Err(self.fail(section, key, format!("expected {n} coordinates, got {}", v.len())))
        }
    }

    fn count(&self, section: &str, key: &str, v: usize) -> Result<(), ConfigError> {
        if v > 0 {
            Ok(())
        } else {
            Err(self.fail(section, key, "must be at least 1"))
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config.
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| source[..s.start].matches('\n').count() + 1);
            ConfigError::at(line, e.message().to_string())
        })?;
        cfg.validate_with(Some(source))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(None)
    }

    fn validate_with(&self, source: Option<&str>) -> Result<(), ConfigError> {
        let c = Checker { source };
        if self.workers == Some(0) {
            return Err(c.fail("", "workers", "must be at least 1"));
        }
        self.validate_model(&c)?;
        let n = self.model.dim();
        if let Some(s) = &self.simulate {
            c.step("simulate", "gamma", s.gamma)?;
            c.dim("simulate", "initial", &s.initial, n)?;
            match (&s.seeds, s.replicates) {
                (Some(seeds), None) if !seeds.is_empty() => {
                    let unique: std::collections::BTreeSet<_> = seeds.iter().collect();
                    if unique.len() != seeds.len() {
                        return Err(c.fail("simulate", "seeds", "seeds must be distinct"));
                    }
                }
                (None, Some(r)) => c.count("simulate", "replicates", r)?,
                _ => return Err(c.fail("simulate", "seeds", "give exactly one of a non-empty `seeds` list or `replicates`")),
            }
        }
        if let Some(d) = &self.di_solve {
            c.positive("di_solve", "horizon", d.horizon)?;
            c.dim("di_solve", "initial", &d.initial, n)?;
            let queue = matches!(self.model, ModelConfig::Queue { .. });
            match d.solver {
                SolverKind::Exact | SolverKind::Reference if !queue => {
                    return Err(c.fail("di_solve", "solver", "exact and reference solvers need a queue model"))
                }
                SolverKind::ForwardBackward if !matches!(self.model, ModelConfig::ProxSgd { .. }) => {
                    return Err(c.fail("di_solve", "solver", "forward_backward needs a prox_sgd model"))
                }
                SolverKind::ForwardBackward | SolverKind::Reference => match d.step {
                    Some(s) => c.positive("di_solve", "step", s)?,
                    None => return Err(c.fail("di_solve", "step", "required by this solver")),
                },
                SolverKind::Exact => {}
            }
        }
        if let Some(v) = &self.converge {
            c.decreasing("converge", "gammas", &v.gammas)?;
            c.dim("converge", "initial", &v.initial, n)?;
            c.positive("converge", "horizon", v.horizon)?;
            c.count("converge", "replicates", v.replicates)?;
            c.positive("converge", "eps", v.eps)?;
            if let Some(s) = v.reference_step {
                c.positive("converge", "reference_step", s)?;
            }
            if !matches!(self.model, ModelConfig::Queue { .. } | ModelConfig::ProxSgd { .. }) {
                return Err(c.fail("model", "kind", "converge needs a queue or prox_sgd model"));
            }
        }
        if let Some(l) = &self.longrun {
            c.decreasing("longrun", "gammas", &l.gammas)?;
            c.dim("longrun", "initial", &l.initial, n)?;
            c.count("longrun", "iterations", l.iterations)?;
            c.count("longrun", "replicates", l.replicates)?;
            c.positive("longrun", "eps", l.eps)?;
            if let Some(t) = &l.target {
                c.dim("longrun", "target", t, n)?;
            }
        }
        if let Some(p) = &self.ph_check {
            c.decreasing("ph_check", "gammas", &p.gammas)?;
            if p.samples < crate::stability::MIN_PH_SAMPLES {
                return Err(c.fail("ph_check", "samples", format!("must be at least {}", crate::stability::MIN_PH_SAMPLES)));
            }
            for probe in &p.probes {
                c.dim("ph_check", "probes", probe, n)?;
            }
            if let Some(g) = &p.grid {
                c.finite("ph_check", "grid", &[g.lower, g.upper])?;
                c.positive("ph_check", "grid", g.spacing)?;
                if g.upper < g.lower {
                    return Err(c.fail("ph_check", "grid", "upper must not be below lower"));
                }
            }
            if p.probes.is_empty() && p.grid.is_none() {
                return Err(c.fail("ph_check", "probes", "probe list is empty"));
            }
            if let Some(k) = p.constant {
                c.finite("ph_check", "constant", &[k])?;
            }
            match (&self.model, p.sppl_beta) {
                (ModelConfig::ProxSgd { .. }, Some(b)) => c.positive("ph_check", "sppl_beta", b)?,
                (ModelConfig::ProxSgd { .. }, None) => return Err(c.fail("ph_check", "sppl_beta", "required for prox_sgd")),
                (ModelConfig::Queue { .. }, _) => {}
                _ => return Err(c.fail("model", "kind", "ph_check needs a queue or prox_sgd model")),
            }
        }
        Ok(())
    }

    fn validate_model(&self, c: &Checker<'_>) -> Result<(), ConfigError> {
        match &self.model {
            ModelConfig::Queue { lambda, eta, arrivals } => {
                c.finite("model", "lambda", lambda)?;
                if lambda.is_empty() || lambda.iter().any(|l| *l <= 0.0) {
                    return Err(c.fail("model", "lambda", "rates must be positive and non-empty"));
                }
                if *arrivals == Arrivals::Bernoulli && lambda.iter().any(|l| *l > 1.0) {
                    return Err(c.fail("model", "lambda", "Bernoulli rates must not exceed 1"));
                }
                c.dim("model", "eta", eta, lambda.len())?;
                if eta.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                    return Err(c.fail("model", "eta", "service probabilities must lie in (0, 1]"));
                }
            }
            ModelConfig::ProxSgd { mean, sigma, rho } => {
                c.finite("model", "mean", mean)?;
                if mean.is_empty() {
                    return Err(c.fail("model", "mean", "must not be empty"));
                }
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(c.fail("model", "sigma", "must be nonnegative"));
                }
                if !(*rho >= 0.0 && rho.is_finite()) {
                    return Err(c.fail("model", "rho", "must be nonnegative"));
                }
            }
            ModelConfig::SppGaussianShift { mean, sigma } => {
                c.finite("model", "mean", mean)?;
                if mean.is_empty() {
                    return Err(c.fail("model", "mean", "must not be empty"));
                }
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(c.fail("model", "sigma", "must be nonnegative"));
                }
            }
            ModelConfig::SppSignedShift { magnitude, dim } => {
                c.positive("model", "magnitude", *magnitude)?;
                c.count("model", "dim", *dim)?;
            }
            ModelConfig::SppAffine { matrix, offset } => {
                c.finite("model", "offset", offset)?;
                if offset.is_empty() || matrix.len() != offset.len() || matrix.iter().any(|r| r.len() != offset.len()) {
                    return Err(c.fail("model", "matrix", "must be square and match the offset length"));
                }
                AffineOperator::from_rows(matrix, offset).map_err(|e| c.fail("model", "matrix", e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn queue_spec(&self) -> Option<QueueChainSpec> {
        match &self.model {
            ModelConfig::Queue { lambda, eta, arrivals } => {
                let field = QueueMeanField::new(lambda.clone(), eta.clone()).ok()?;
                QueueChainSpec::new(field, (*arrivals).into()).ok()
            }
            _ => None,
        }
    }

    pub fn prox_sgd_problem(&self) -> Option<ProxSgdProblem> {
        match &self.model {
            ModelConfig::ProxSgd { mean, sigma, rho } => {
                let r = if *rho == 0.0 { ConvexFunction::Zero } else { ConvexFunction::l1(*rho).ok()? };
                ProxSgdProblem::gaussian_quadratic(StateVector::new(mean.clone()).ok()?, *sigma, r).ok()
            }
            _ => None,
        }
    }

    pub fn spp_spec(&self) -> Option<SppSpec> {
        let family = match &self.model {
            ModelConfig::SppGaussianShift { mean, sigma } => {
                SppFamily::GaussianShift { mean: StateVector::new(mean.clone()).ok()?, sigma: *sigma }
            }
            ModelConfig::SppSignedShift { magnitude, dim } => SppFamily::SignedShift { magnitude: *magnitude, dim: *dim },
            ModelConfig::SppAffine { matrix, offset } => {
                let n = offset.len();
                let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                SppFamily::Affine(AffineOperator::new(m, DVector::from_column_slice(offset)).ok()?)
            }
            _ => return None,
        };
        SppSpec::new(family).ok()
    }
}

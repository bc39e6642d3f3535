//! Proximity operators, Moreau envelope gradients, least-norm subgradients,
//! resolvents and Yosida regularizations.
//!
//! Catalog functions have closed forms. [`ConvexFunction::Custom`] falls back to
//! an accelerated gradient solve of the prox objective, which is 1-strongly
//! convex, so a gradient norm below `tol` certifies a distance below `tol` to
//! the minimizer.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::state::StateVector;

pub const CUSTOM_PROX_TOL: f64 = 1e-12;
pub const CUSTOM_PROX_MAX_ITER: usize = 100_000;

pub type ValueOracle = Arc<dyn Fn(&StateVector) -> f64 + Send + Sync>;
pub type GradientOracle = Arc<dyn Fn(&StateVector) -> Result<StateVector> + Send + Sync>;

/// A user-supplied convex function. The gradient oracle must return an
/// element of the subdifferential; the prox solver assumes it is a gradient.
#[derive(Clone)]
pub struct CustomFunction {
    pub name: String,
    pub value: ValueOracle,
    pub subgradient: GradientOracle,
}

impl fmt::Debug for CustomFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFunction").field("name", &self.name).finish()
    }
}

/// Regularizers `r`. Vector parameters of length one broadcast over every
/// coordinate.
#[derive(Debug, Clone)]
pub enum ConvexFunction {
    Zero,
    /// `Σ w_i |x_i|`
    WeightedL1(Vec<f64>),
    /// `(c/2) ‖x‖²`
    SquaredL2(f64),
    /// Indicator of `[lower, upper]`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Indicator of the nonnegative orthant.
    NonnegIndicator,
    /// `inner(x - center)`
    Shifted { inner: Box<ConvexFunction>, center: StateVector },
    Custom(CustomFunction),
}

fn broadcast(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}

fn check_broadcast(v: &[f64], n: usize) -> Result<()> {
    if v.len() == 1 || v.len() == n {
        Ok(())
    } else {
        Err(Error::Dimension { expected: n, got: v.len() })
    }
}

fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

impl ConvexFunction {
    pub fn l1(rho: f64) -> Result<Self> {
        Self::weighted_l1(vec![rho])
    }

    pub fn weighted_l1(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Parameter("l1 weights must be positive".into()));
        }
        Ok(ConvexFunction::WeightedL1(weights))
    }

    pub fn squared_l2(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Parameter("squared-l2 scale must be positive".into()));
        }
        Ok(ConvexFunction::SquaredL2(scale))
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Parameter("box bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Parameter("box bounds must satisfy lower <= upper".into()));
        }
        Ok(ConvexFunction::Box { lower, upper })
    }

    pub fn shifted(inner: ConvexFunction, center: StateVector) -> Self {
        ConvexFunction::Shifted { inner: Box::new(inner), center }
    }

    pub fn custom(name: impl Into<String>, value: ValueOracle, subgradient: GradientOracle) -> Self {
        ConvexFunction::Custom(CustomFunction { name: name.into(), value, subgradient })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            ConvexFunction::WeightedL1(w) => check_broadcast(w, n),
            ConvexFunction::Box { lower, .. } => check_broadcast(lower, n),
            ConvexFunction::Shifted { inner, center } => {
                check_dim(n, center.dim())?;
                inner.check_dim(n)
            }
            _ => Ok(()),
        }
    }

    /// `r(x)`; `+inf` outside the domain of an indicator.
    pub fn value(&self, x: &StateVector) -> Result<f64> {
        self.check_dim(x.dim())?;
        Ok(match self {
            ConvexFunction::Zero => 0.0,
            ConvexFunction::WeightedL1(w) => {
                x.iter().enumerate().map(|(i, c)| broadcast(w, i) * c.abs()).sum()
            }
            ConvexFunction::SquaredL2(c) => 0.5 * c * x.dot(x),
            ConvexFunction::Box { lower, upper } => {
                let inside = x
                    .iter()
                    .enumerate()
                    .all(|(i, c)| *c >= broadcast(lower, i) && *c <= broadcast(upper, i));
                if inside { 0.0 } else { f64::INFINITY }
            }
            ConvexFunction::NonnegIndicator => {
                if x.iter().all(|c| *c >= 0.0) { 0.0 } else { f64::INFINITY }
            }
            ConvexFunction::Shifted { inner, center } => inner.value(&x.sub(center))?,
            ConvexFunction::Custom(c) => (c.value)(x),
        })
    }

    /// True when the prox acts coordinate by coordinate.
    pub fn is_separable(&self) -> bool {
        match self {
            ConvexFunction::Custom(_) => false,
            ConvexFunction::Shifted { inner, .. } => inner.is_separable(),
            _ => true,
        }
    }

    /// Coordinate `i` of the prox of a separable function at a point whose
    /// `i`-th coordinate is `z`. Errors for non-separable kinds.
    pub fn prox_scalar(&self, i: usize, gamma: f64, z: f64) -> Result<f64> {
        Ok(match self {
            ConvexFunction::Zero => z,
            ConvexFunction::WeightedL1(w) => soft(z, gamma * broadcast(w, i)),
            ConvexFunction::SquaredL2(c) => z / (1.0 + gamma * c),
            ConvexFunction::Box { lower, upper } => z.clamp(broadcast(lower, i), broadcast(upper, i)),
            ConvexFunction::NonnegIndicator => z.max(0.0),
            ConvexFunction::Shifted { inner, center } => {
                center[i] + inner.prox_scalar(i, gamma, z - center[i])?
            }
            ConvexFunction::Custom(_) => {
                return Err(Error::Specification("custom functions are not separable".into()))
            }
        })
    }

    /// Points where `z ↦ prox_scalar(i, gamma, z)` is not differentiable.
    pub fn prox_kinks(&self, i: usize, gamma: f64) -> Vec<f64> {
        match self {
            ConvexFunction::WeightedL1(w) => {
                let t = gamma * broadcast(w, i);
                vec![-t, t]
            }
            ConvexFunction::Box { lower, upper } => vec![broadcast(lower, i), broadcast(upper, i)],
            ConvexFunction::NonnegIndicator => vec![0.0],
            ConvexFunction::Shifted { inner, center } => {
                inner.prox_kinks(i, gamma).into_iter().map(|k| k + center[i]).collect()
            }
            _ => Vec::new(),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("gamma must be positive, got {gamma}")))
    }
}

/// `argmin_y γ r(y) + ½‖y - x‖²`.
pub fn prox(r: &ConvexFunction, gamma: f64, x: &StateVector) -> Result<StateVector> {
    check_gamma(gamma)?;
    r.check_dim(x.dim())?;
    if let ConvexFunction::Custom(c) = r {
        return custom_prox(c, gamma, x);
    }
    let out = x
        .iter()
        .enumerate()
        .map(|(i, &z)| r.prox_scalar(i, gamma, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateVector::from_raw(out))
}

fn custom_prox(c: &CustomFunction, gamma: f64, x: &StateVector) -> Result<StateVector> {
    let objective = |y: &StateVector| -> f64 { gamma * (c.value)(y) + 0.5 * y.distance(x).powi(2) };
    let gradient = |y: &StateVector| -> Result<StateVector> {
        let g = (c.subgradient)(y).map_err(|e| Error::Oracle(e.to_string()))?;
        check_dim(y.dim(), g.dim())?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle(format!("non-finite subgradient from '{}'", c.name)));
        }
        Ok(g.scale(gamma).add(&y.sub(x)))
    };
    let tol = CUSTOM_PROX_TOL * x.norm().max(1.0);

    let mut y = x.clone();
    let mut z = x.clone();
    let mut lip = 1.0_f64;
    for _ in 0..CUSTOM_PROX_MAX_ITER {
        let gy = gradient(&y)?;
        if gy.norm() <= tol {
            return Ok(y);
        }
        let gz = gradient(&z)?;
        let fz = objective(&z);
        let gz2 = gz.dot(&gz);
        let y_next = loop {
            let cand = z.axpy(-1.0 / lip, &gz);
            let fc = objective(&cand);
            if fc <= fz - gz2 / (2.0 * lip) + 4.0 * f64::EPSILON * fz.abs().max(1.0) || lip > 1e12 {
                break cand;
            }
            lip *= 2.0;
        };
        // strong convexity modulus of the prox objective is 1
        let q = (1.0 / lip).min(1.0);
        let momentum = (1.0 - q.sqrt()) / (1.0 + q.sqrt());
        let restart = objective(&y_next) > objective(&y);
        z = if restart { y_next.clone() } else { y_next.axpy(momentum, &y_next.sub(&y)) };
        y = y_next;
        lip = (lip * 0.9).max(1.0);
    }
    Err(Error::Oracle(format!(
        "prox of '{}' did not reach tolerance {tol:e} within {CUSTOM_PROX_MAX_ITER} iterations",
        c.name
    )))
}

/// `∇r_γ(x) = (x - prox_{γr}(x)) / γ`, an element of `∂r(prox_{γr}(x))`.
pub fn moreau_gradient(r: &ConvexFunction, gamma: f64, x: &StateVector) -> Result<StateVector> {
    if let ConvexFunction::WeightedL1(w) = r {
        check_gamma(gamma)?;
        r.check_dim(x.dim())?;
        // clamp form is exact once |x_i| > γ w_i
        return Ok(StateVector::from_raw(
            x.iter()
                .enumerate()
                .map(|(i, &c)| (c / gamma).clamp(-broadcast(w, i), broadcast(w, i)))
                .collect(),
        ));
    }
    let p = prox(r, gamma, x)?;
    Ok(x.sub(&p).scale(1.0 / gamma))
}

/// Minimal-norm element of `∂r(x)`.
pub fn least_norm_subgradient(r: &ConvexFunction, x: &StateVector) -> Result<StateVector> {
    r.check_dim(x.dim())?;
    Ok(match r {
        ConvexFunction::Zero => StateVector::zeros(x.dim()),
        ConvexFunction::WeightedL1(w) => StateVector::from_raw(
            x.iter()
                .enumerate()
                .map(|(i, &c)| if c == 0.0 { 0.0 } else { c.signum() * broadcast(w, i) })
                .collect(),
        ),
        ConvexFunction::SquaredL2(c) => x.scale(*c),
        ConvexFunction::Box { .. } | ConvexFunction::NonnegIndicator => {
            if r.value(x)?.is_infinite() {
                return Err(Error::Domain(format!("{x} lies outside the indicator's domain")));
            }
            // 0 always belongs to the normal cone
            StateVector::zeros(x.dim())
        }
        ConvexFunction::Shifted { inner, center } => least_norm_subgradient(inner, &x.sub(center))?,
        ConvexFunction::Custom(c) => (c.subgradient)(x).map_err(|e| Error::Oracle(e.to_string()))?,
    })
}

/// `x ↦ M x + b` with `M + Mᵀ` positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator {
    m: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineOperator {
    pub fn new(m: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() != b.len() || b.is_empty() {
            return Err(Error::Parameter("affine operator needs square M and matching b".into()));
        }
        let sym = &m + m.transpose();
        let min_eig = sym.symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(Error::Parameter(format!(
                "affine operator is not monotone: min eigenvalue of M + Mᵀ is {min_eig}"
            )));
        }
        Ok(AffineOperator { m, b })
    }

    pub fn from_rows(rows: &[Vec<f64>], offset: &[f64]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter("matrix rows must all have length N".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(m, DVector::from_column_slice(offset))
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn apply(&self, x: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), x.dim())?;
        let v = &self.m * DVector::from_column_slice(x.as_slice()) + &self.b;
        Ok(StateVector::from_raw(v.iter().copied().collect()))
    }

    /// The unique zero when `M` is invertible.
    pub fn zero(&self) -> Option<StateVector> {
        let sol = self.m.clone().lu().solve(&(-&self.b))?;
        StateVector::new(sol.iter().copied().collect()).ok()
    }
}

#[derive(Debug, Clone)]
pub enum MonotoneOperator {
    Subdifferential(ConvexFunction),
    Affine(AffineOperator),
}

impl MonotoneOperator {
    /// Minimal-norm element of `A(x)`.
    pub fn least_norm_element(&self, x: &StateVector) -> Result<StateVector> {
        match self {
            MonotoneOperator::Subdifferential(r) => least_norm_subgradient(r, x),
            MonotoneOperator::Affine(a) => a.apply(x),
        }
    }
}

/// `(I + γA)^{-1}(x)`.
pub fn resolvent(a: &MonotoneOperator, gamma: f64, x: &StateVector) -> Result<StateVector> {
    check_gamma(gamma)?;
    match a {
        MonotoneOperator::Subdifferential(r) => prox(r, gamma, x),
        MonotoneOperator::Affine(op) => {
            check_dim(op.dim(), x.dim())?;
            let n = op.dim();
            let lhs = DMatrix::<f64>::identity(n, n) + op.m.scale(gamma);
            let rhs = DVector::from_column_slice(x.as_slice()) - op.b.scale(gamma);
            let y = lhs
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Internal("singular resolvent system".into()))?;
            Ok(StateVector::from_raw(y.iter().copied().collect()))
        }
    }
}

/// `(x - (I + γA)^{-1}(x)) / γ`.
pub fn yosida(a: &MonotoneOperator, gamma: f64, x: &StateVector) -> Result<StateVector> {
    if let MonotoneOperator::Subdifferential(r) = a {
        return moreau_gradient(r, gamma, x);
    }
    let j = resolvent(a, gamma, x)?;
    Ok(x.sub(&j).scale(1.0 / gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    fn close(a: &StateVector, b: &[f64], tol: f64) -> bool {
        a.dim() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    /// Brute-force minimization of the prox objective by golden-section search
    /// along each coordinate of a separable function.
    fn brute_prox_scalar(r: impl Fn(f64) -> f64, gamma: f64, z: f64) -> f64 {
        let f = |y: f64| gamma * r(y) + 0.5 * (y - z) * (y - z);
        let (mut a, mut b) = (z - 50.0, z + 50.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn prox_examples() {
        let x = sv(&[3.0, -1.0]);
        assert_eq!(prox(&ConvexFunction::Zero, 0.7, &x).unwrap(), x);
        let l1 = ConvexFunction::l1(1.0).unwrap();
        let p = prox(&l1, 0.5, &sv(&[2.0, -0.3])).unwrap();
        assert!(close(&p, &[1.5, 0.0], 1e-15));
        for (z, want) in [(2.0, p[0]), (-0.3, p[1])] {
            assert!((brute_prox_scalar(|y| y.abs(), 0.5, z) - want).abs() < 1e-6);
        }
        let p = prox(&ConvexFunction::NonnegIndicator, 1.0, &sv(&[-2.0, 3.0])).unwrap();
        assert_eq!(p, sv(&[0.0, 3.0]));
        assert!(matches!(prox(&l1, 0.0, &x), Err(Error::Parameter(_))));
    }

    #[test]
    fn moreau_gradient_examples() {
        let g = moreau_gradient(&ConvexFunction::Zero, 0.3, &sv(&[1.0, 2.0])).unwrap();
        assert_eq!(g, sv(&[0.0, 0.0]));
        let l1 = ConvexFunction::l1(1.0).unwrap();
        let g = moreau_gradient(&l1, 0.5, &sv(&[2.0, -0.3])).unwrap();
        assert!(close(&g, &[1.0, -0.6], 1e-15));
        let sq = ConvexFunction::squared_l2(1.0).unwrap();
        let g = moreau_gradient(&sq, 1.0, &sv(&[2.0])).unwrap();
        assert!(close(&g, &[1.0], 1e-15));
    }

    #[test]
    fn least_norm_examples() {
        let l1 = ConvexFunction::l1(1.0).unwrap();
        assert_eq!(least_norm_subgradient(&l1, &sv(&[2.0, 0.0])).unwrap(), sv(&[1.0, 0.0]));
        assert_eq!(least_norm_subgradient(&ConvexFunction::Zero, &sv(&[5.0])).unwrap(), sv(&[0.0]));
        let sq = ConvexFunction::squared_l2(1.0).unwrap();
        assert_eq!(least_norm_subgradient(&sq, &sv(&[-3.0])).unwrap(), sv(&[-3.0]));
        let bx = ConvexFunction::boxed(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(least_norm_subgradient(&bx, &sv(&[1.0, 0.0])).unwrap(), sv(&[0.0, 0.0]));
        assert!(matches!(least_norm_subgradient(&bx, &sv(&[2.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn resolvent_and_yosida_examples() {
        let id = MonotoneOperator::Subdifferential(ConvexFunction::squared_l2(1.0).unwrap());
        assert!(close(&resolvent(&id, 1.0, &sv(&[2.0])).unwrap(), &[1.0], 1e-15));
        let abs = MonotoneOperator::Subdifferential(ConvexFunction::l1(1.0).unwrap());
        assert!(close(&resolvent(&abs, 0.5, &sv(&[2.0])).unwrap(), &[1.5], 1e-15));
        assert!(close(&resolvent(&abs, 3.0, &sv(&[0.0])).unwrap(), &[0.0], 0.0));
        assert!(close(&yosida(&abs, 0.5, &sv(&[2.0])).unwrap(), &[1.0], 1e-15));
        assert!(close(&yosida(&abs, 0.5, &sv(&[0.2])).unwrap(), &[0.4], 1e-15));
        assert!(close(&yosida(&abs, 0.5, &sv(&[0.0])).unwrap(), &[0.0], 0.0));

        let rot = AffineOperator::from_rows(&[vec![0.1, 1.0], vec![-1.0, 0.1]], &[0.0, 0.0]).unwrap();
        let a = MonotoneOperator::Affine(rot.clone());
        let x = sv(&[1.0, 2.0]);
        let j = resolvent(&a, 0.3, &x).unwrap();
        // j + γ M j = x
        let back = j.add(&rot.apply(&j).unwrap().scale(0.3));
        assert!(close(&back, x.as_slice(), 1e-14));
    }

    #[test]
    fn affine_monotonicity_is_checked() {
        assert!(AffineOperator::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).is_err());
        assert!(AffineOperator::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]], &[0.0, 0.0]).is_ok());
        assert!(AffineOperator::from_rows(&[vec![1.0]], &[0.0, 1.0]).is_err());
    }

    fn softplus() -> ConvexFunction {
        ConvexFunction::custom(
            "softplus",
            Arc::new(|y: &StateVector| y.iter().map(|v| v.exp().ln_1p()).sum()),
            Arc::new(|y: &StateVector| Ok(y.map(|v| 1.0 / (1.0 + (-v).exp())))),
        )
    }

    #[test]
    fn custom_prox_matches_scalar_newton() {
        let r = softplus();
        let x = sv(&[2.0, -1.0, 0.3]);
        let gamma = 0.7;
        let p = prox(&r, gamma, &x).unwrap();
        for i in 0..3 {
            // Newton on y + γσ(y) = x_i
            let mut y = x[i];
            for _ in 0..100 {
                let s = 1.0 / (1.0 + (-y).exp());
                let f = y + gamma * s - x[i];
                y -= f / (1.0 + gamma * s * (1.0 - s));
            }
            assert!((p[i] - y).abs() < 1e-11, "{} vs {}", p[i], y);
        }
    }

    #[test]
    fn custom_prox_reports_cap_hits() {
        // nonsmooth |x| through a subgradient oracle: first-order steps stall
        let r = ConvexFunction::custom(
            "abs",
            Arc::new(|y: &StateVector| y.iter().map(|v| v.abs()).sum()),
            Arc::new(|y: &StateVector| Ok(y.map(f64::signum))),
        );
        assert!(matches!(prox(&r, 1.0, &sv(&[0.5])), Err(Error::Oracle(_))));
        let failing = ConvexFunction::custom(
            "broken",
            Arc::new(|_: &StateVector| 0.0),
            Arc::new(|_: &StateVector| Err(Error::Domain("nope".into()))),
        );
        assert!(matches!(prox(&failing, 1.0, &sv(&[0.5])), Err(Error::Oracle(_))));
    }

    fn catalog() -> impl Strategy<Value = ConvexFunction> {
        prop_oneof![
            Just(ConvexFunction::Zero),
            (0.01f64..5.0).prop_map(|w| ConvexFunction::l1(w).unwrap()),
            (0.01f64..5.0).prop_map(|c| ConvexFunction::squared_l2(c).unwrap()),
            (-3.0f64..0.0, 0.0f64..3.0).prop_map(|(l, u)| ConvexFunction::boxed(vec![l], vec![u]).unwrap()),
            Just(ConvexFunction::NonnegIndicator),
        ]
    }

    proptest! {
        #[test]
        fn resolvent_is_firmly_nonexpansive(
            r in catalog(),
            gamma in 1e-3f64..10.0,
            x in prop::collection::vec(-10.0f64..10.0, 3),
            y in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let a = MonotoneOperator::Subdifferential(r);
            let (x, y) = (sv(&x), sv(&y));
            let jx = resolvent(&a, gamma, &x).unwrap();
            let jy = resolvent(&a, gamma, &y).unwrap();
            let d = jx.sub(&jy);
            prop_assert!(d.dot(&d) <= d.dot(&x.sub(&y)) + 1e-12);
        }

        #[test]
        fn affine_resolvent_is_nonexpansive(
            skew in -3.0f64..3.0,
            diag in 0.0f64..2.0,
            gamma in 1e-3f64..10.0,
            x in prop::collection::vec(-10.0f64..10.0, 2),
            y in prop::collection::vec(-10.0f64..10.0, 2),
        ) {
            let op = AffineOperator::from_rows(&[vec![diag, skew], vec![-skew, diag]], &[0.5, -1.0]).unwrap();
            let a = MonotoneOperator::Affine(op);
            let (x, y) = (sv(&x), sv(&y));
            let d = resolvent(&a, gamma, &x).unwrap().sub(&resolvent(&a, gamma, &y).unwrap());
            prop_assert!(d.norm() <= x.distance(&y) + 1e-12);
        }
    }
}

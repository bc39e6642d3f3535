//! Finitely generated convex values and the priority-queue mean field.
//!
//! A [`ConvexValue`] is the convex hull of a non-empty list of generators.
//! Projection onto it runs Wolfe's minimum-norm-point active-set method over
//! the hull weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::state::StateVector;

/// Termination tolerance of the hull projection.
pub const PROJECTION_TOL: f64 = 1e-12;
/// Default tolerance of [`hull_contains`].
pub const DEFAULT_HULL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexValue {
    generators: Vec<StateVector>,
}

impl ConvexValue {
    pub fn new(generators: Vec<StateVector>) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::Internal("convex value needs at least one generator".into()))?;
        for g in &generators {
            check_dim(first.dim(), g.dim())?;
        }
        Ok(ConvexValue { generators })
    }

    pub fn singleton(x: StateVector) -> Self {
        ConvexValue { generators: vec![x] }
    }

    pub fn generators(&self) -> &[StateVector] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    /// The element of least Euclidean norm.
    pub fn least_norm(&self) -> StateVector {
        let zero = StateVector::zeros(self.dim());
        // Dimensions agree by construction.
        project_onto_hull(self, &zero).expect("dimension-consistent hull")
    }
}

/// Euclidean projection of `v` onto the hull of `value`'s generators.
pub fn project_onto_hull(value: &ConvexValue, v: &StateVector) -> Result<StateVector> {
    check_dim(value.dim(), v.dim())?;
    let points: Vec<StateVector> = value.generators.iter().map(|g| g.sub(v)).collect();
    let weights = min_norm_weights(&points)?;
    let mut out = vec![0.0; v.dim()];
    for (w, g) in weights.iter().zip(&value.generators) {
        for (o, c) in out.iter_mut().zip(g.iter()) {
            *o += w * c;
        }
    }
    Ok(StateVector::from_raw(out))
}

/// True iff `v` lies within `tol` of the hull.
pub fn hull_contains(value: &ConvexValue, v: &StateVector, tol: f64) -> Result<bool> {
    let p = project_onto_hull(value, v)?;
    Ok(p.distance(v) <= tol)
}

fn combine(points: &[StateVector], set: &[usize], lambda: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].dim()];
    for (&i, &l) in set.iter().zip(lambda) {
        for (xc, pc) in x.iter_mut().zip(points[i].iter()) {
            *xc += l * pc;
        }
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of `‖Σ a_i p_i‖` over the affine hull of `p_i, i in set`.
fn affine_minimizer(points: &[StateVector], set: &[usize]) -> Result<Vec<f64>> {
    let m = set.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
    for (r, &i) in set.iter().enumerate() {
        for (c, &j) in set.iter().enumerate() {
            a[(r, c)] = points[i].dot(&points[j]);
        }
        a[(r, m)] = 1.0;
        a[(m, r)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m + 1);
    b[m] = 1.0;
    let sol = a
        .clone()
        .lu()
        .solve(&b)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .or_else(|| a.svd(true, true).solve(&b, 1e-14).ok())
        .ok_or_else(|| Error::Internal("degenerate affine minimization in hull projection".into()))?;
    Ok(sol.iter().take(m).copied().collect())
}

/// Wolfe's minimum-norm-point algorithm. Returns convex weights over `points`.
fn min_norm_weights(points: &[StateVector]) -> Result<Vec<f64>> {
    let n_pts = points.len();
    let scale = points.iter().map(|p| p.dot(p)).fold(0.0, f64::max).max(1e-300);
    let start = (0..n_pts)
        .min_by(|&a, &b| points[a].dot(&points[a]).total_cmp(&points[b].dot(&points[b])))
        .expect("non-empty");
    let mut set = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].as_slice().to_vec();

    for _major in 0..(50 * n_pts + 100) {
        let xx = dot(&x, &x);
        let (j, best) = (0..n_pts)
            .map(|j| (j, dot(&x, points[j].as_slice())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if best >= xx - PROJECTION_TOL * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        lambda.push(0.0);

        loop {
            let alpha = affine_minimizer(points, &set)?;
            if alpha.iter().all(|&a| a > PROJECTION_TOL) {
                lambda = alpha;
                x = combine(points, &set, &lambda);
                break;
            }
            let mut theta = 1.0_f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= PROJECTION_TOL && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut keep_set = Vec::with_capacity(set.len());
            let mut keep_lambda = Vec::with_capacity(set.len());
            for (&i, &l) in set.iter().zip(&lambda) {
                if l > PROJECTION_TOL {
                    keep_set.push(i);
                    keep_lambda.push(l);
                }
            }
            if keep_set.is_empty() {
                return Err(Error::Internal("hull projection lost its support".into()));
            }
            let total: f64 = keep_lambda.iter().sum();
            set = keep_set;
            lambda = keep_lambda.into_iter().map(|l| l / total).collect();
            x = combine(points, &set, &lambda);
            if set.len() == 1 {
                break;
            }
        }
    }

    let mut weights = vec![0.0; n_pts];
    for (&i, &l) in set.iter().zip(&lambda) {
        weights[i] += l;
    }
    Ok(weights)
}

/// Mean field of the fluid-scaled priority-queue chain.
///
/// `u_k = (λ_1, ..., λ_{k-1}, λ_k - η_k, λ_{k+1}, ..., λ_N)` is the drift when
/// queue `k` is the one being served.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMeanField {
    lambda: Vec<f64>,
    eta: Vec<f64>,
    u_vectors: Vec<StateVector>,
}

impl QueueMeanField {
    pub fn new(lambda: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Parameter("queue field needs at least one queue".into()));
        }
        check_dim(lambda.len(), eta.len())?;
        if let Some(l) = lambda.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Parameter(format!("arrival rates must be positive, got {l}")));
        }
        if let Some(e) = eta.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::Parameter(format!("service probabilities must lie in (0,1], got {e}")));
        }
        let u_vectors = (0..lambda.len())
            .map(|k| {
                let mut u = lambda.clone();
                u[k] -= eta[k];
                StateVector::from_raw(u)
            })
            .collect();
        Ok(QueueMeanField { lambda, eta, u_vectors })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn u_vectors(&self) -> &[StateVector] {
        &self.u_vectors
    }

    pub fn arrival_vector(&self) -> StateVector {
        StateVector::from_raw(self.lambda.clone())
    }

    /// Index of the first strictly positive coordinate, if any.
    pub fn served_queue(x: &StateVector) -> Option<usize> {
        x.iter().position(|&c| c > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub load: f64,
    pub stable: bool,
}

/// Load `Σ λ_k/η_k`; the fluid model drains iff it is below one.
pub fn stability_check(field: &QueueMeanField) -> StabilityReport {
    let load: f64 = field.lambda.iter().zip(&field.eta).map(|(l, e)| l / e).sum();
    StabilityReport { load, stable: load < 1.0 }
}

/// Value of the queue mean field at a nonnegative `x`.
///
/// At the origin the value is the closed hull `co(λ, u_1, ..., u_N)` of every
/// drift the chain can take near 0.
pub fn queue_map_eval(field: &QueueMeanField, x: &StateVector) -> Result<ConvexValue> {
    check_dim(field.dim(), x.dim())?;
    if let Some(c) = x.iter().find(|c| **c < 0.0) {
        return Err(Error::Domain(format!("queue state must be nonnegative, got coordinate {c}")));
    }
    let gens = match QueueMeanField::served_queue(x) {
        Some(k) => field.u_vectors[..=k].to_vec(),
        None => {
            let mut g = vec![field.arrival_vector()];
            g.extend(field.u_vectors.iter().cloned());
            g
        }
    };
    Ok(ConvexValue { generators: gens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    fn canonical() -> QueueMeanField {
        QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8]).unwrap()
    }

    fn close(a: &StateVector, b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn queue_map_examples() {
        let f = canonical();
        let v = queue_map_eval(&f, &sv(&[1.0, 1.0])).unwrap();
        assert_eq!(v.generators().len(), 1);
        assert!(close(&v.generators()[0], &[-0.4, 0.2], 1e-15));

        let v = queue_map_eval(&f, &sv(&[0.0, 0.5])).unwrap();
        assert_eq!(v.generators().len(), 2);
        assert!(close(&v.generators()[1], &[0.1, -0.6], 1e-15));

        let v = queue_map_eval(&f, &sv(&[0.0, 0.0])).unwrap();
        assert_eq!(v.generators().len(), 3);
        assert!(close(&v.generators()[0], &[0.1, 0.2], 0.0));
        assert!(hull_contains(&v, &sv(&[0.0, 0.0]), 1e-9).unwrap());

        assert!(matches!(queue_map_eval(&f, &sv(&[-0.1, 1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn membership_examples() {
        let seg = ConvexValue::new(vec![sv(&[0.0]), sv(&[1.0])]).unwrap();
        assert!(hull_contains(&seg, &sv(&[0.5]), 1e-9).unwrap());
        let pt = ConvexValue::singleton(sv(&[1.0, 0.0]));
        assert!(!hull_contains(&pt, &sv(&[0.0, 1.0]), 1e-9).unwrap());

        let v = queue_map_eval(&canonical(), &sv(&[0.0, 0.5])).unwrap();
        assert!(hull_contains(&v, &sv(&[0.1, -0.6]), 1e-9).unwrap());
        assert!(!hull_contains(&v, &sv(&[0.2, 0.0]), 1e-9).unwrap());
        assert!(ConvexValue::new(vec![]).is_err());
    }

    #[test]
    fn projection_examples() {
        let seg = ConvexValue::new(vec![sv(&[0.0]), sv(&[2.0])]).unwrap();
        assert!(close(&project_onto_hull(&seg, &sv(&[1.0])).unwrap(), &[1.0], 1e-12));
        assert!(close(&project_onto_hull(&seg, &sv(&[3.0])).unwrap(), &[2.0], 1e-12));
        let tri = ConvexValue::new(vec![sv(&[0.0, 0.0]), sv(&[1.0, 0.0]), sv(&[0.0, 1.0])]).unwrap();
        assert!(close(&project_onto_hull(&tri, &sv(&[1.0, 1.0])).unwrap(), &[0.5, 0.5], 1e-12));
        assert!(project_onto_hull(&tri, &sv(&[1.0])).is_err());
    }

    #[test]
    fn stability_examples() {
        let r = stability_check(&canonical());
        assert!((r.load - 0.45).abs() < 1e-15 && r.stable);
        let r = stability_check(&QueueMeanField::new(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap());
        assert!((r.load - 2.0).abs() < 1e-15 && !r.stable);
        let r = stability_check(&QueueMeanField::new(vec![0.5], vec![1.0]).unwrap());
        assert!((r.load - 0.5).abs() < 1e-15 && r.stable);
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(QueueMeanField::new(vec![0.1], vec![1.5]).is_err());
        assert!(QueueMeanField::new(vec![0.0], vec![0.5]).is_err());
        assert!(QueueMeanField::new(vec![0.1, 0.1], vec![0.5]).is_err());
    }

    #[test]
    fn exact_drift_is_a_member_on_the_grid() {
        let f = canonical();
        let gamma = 0.1;
        for i in 0..8 {
            for j in 0..8 {
                if i == 0 && j == 0 {
                    continue;
                }
                let x = sv(&[gamma * i as f64, gamma * j as f64]);
                let k = QueueMeanField::served_queue(&x).unwrap();
                let mut g = f.lambda().to_vec();
                g[k] -= f.eta()[k];
                let v = queue_map_eval(&f, &x).unwrap();
                assert!(hull_contains(&v, &sv(&g), 1e-9).unwrap());
            }
        }
    }

    fn field_strategy() -> impl Strategy<Value = QueueMeanField> {
        (1usize..=4)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.01f64..0.6, n),
                    prop::collection::vec(0.05f64..1.0, n),
                )
            })
            .prop_map(|(l, e)| QueueMeanField::new(l, e).unwrap())
    }

    proptest! {
        #[test]
        fn zero_is_stationary_iff_stable(f in field_strategy()) {
            let report = stability_check(&f);
            prop_assume!((report.load - 1.0).abs() > 1e-6);
            let v = queue_map_eval(&f, &StateVector::zeros(f.dim())).unwrap();
            let contains = hull_contains(&v, &StateVector::zeros(f.dim()), 1e-9).unwrap();
            prop_assert_eq!(contains, report.stable);
        }

        #[test]
        fn hulls_nest_with_leading_zeros(f in field_strategy(), t in 0.0f64..1.0) {
            let n = f.dim();
            for k in 0..n {
                let mut x = vec![0.0; n];
                x[k] = 1.0;
                let big = queue_map_eval(&f, &sv(&x)).unwrap();
                for j in 0..=k {
                    let mut y = vec![0.0; n];
                    y[j] = 1.0;
                    for g in queue_map_eval(&f, &sv(&y)).unwrap().generators() {
                        prop_assert!(hull_contains(&big, g, 1e-9).unwrap());
                    }
                }
                // an interior combination of the first and k-th vertices
                let c = f.u_vectors()[0].scale(t).add(&f.u_vectors()[k].scale(1.0 - t));
                prop_assert!(hull_contains(&big, &c, 1e-9).unwrap());
            }
        }

        #[test]
        fn projection_is_optimal(
            gens in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..7),
            v in prop::collection::vec(-8.0f64..8.0, 3),
        ) {
            let value = ConvexValue::new(gens.into_iter().map(|g| sv(&g)).collect()).unwrap();
            let v = sv(&v);
            let p = project_onto_hull(&value, &v).unwrap();
            let r = v.sub(&p);
            for w in value.generators() {
                prop_assert!(r.dot(&w.sub(&p)) <= 1e-9);
            }
        }
    }
}

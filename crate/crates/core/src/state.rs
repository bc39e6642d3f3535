//! State vectors, step sizes, trajectories and the objects built from them:
//! the linearly interpolated process, occupation measures and Cesàro means.
//!
//! Continuous time is never stored. A trajectory holds its iterates and its
//! step `gamma`; iterate `k` sits at time `gamma * stride * k`.

use std::fmt;
use std::ops::Index;

use crate::error::{check_dim, Error, Result};

/// A point of the state space `R^N`. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Argument("state vector must have dimension >= 1".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate {} at index {i}", coords[i])));
        }
        Ok(StateVector(coords))
    }

    /// Builds a vector without the finiteness check. Used on hot paths where the
    /// inputs are already known to be finite.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        StateVector(coords)
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        debug_assert_eq!(self.dim(), other.dim());
        StateVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        debug_assert_eq!(self.dim(), other.dim());
        StateVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> StateVector {
        StateVector(self.0.iter().map(|a| c * a).collect())
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &StateVector) -> StateVector {
        debug_assert_eq!(self.dim(), other.dim());
        StateVector(self.0.iter().zip(&other.0).map(|(a, b)| a + c * b).collect())
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> StateVector {
        StateVector(self.0.iter().map(|&a| f(a)).collect())
    }
}

impl Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Step size `gamma` in `(0, gamma_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    gamma: f64,
    gamma_max: f64,
}

impl StepSize {
    /// Step with the default bound `gamma_max = 1`.
    pub fn new(gamma: f64) -> Result<Self> {
        Self::bounded(gamma, 1.0)
    }

    pub fn bounded(gamma: f64, gamma_max: f64) -> Result<Self> {
        if !(gamma_max.is_finite() && gamma_max > 0.0) {
            return Err(Error::Parameter(format!("gamma_max must be positive, got {gamma_max}")));
        }
        if !(gamma > 0.0 && gamma < gamma_max) {
            return Err(Error::Parameter(format!(
                "step size must satisfy 0 < gamma < {gamma_max}, got {gamma}"
            )));
        }
        Ok(StepSize { gamma, gamma_max })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }
}

/// Iterates `x_0, ..., x_n` of a chain run at a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    gamma: StepSize,
    states: Vec<StateVector>,
    seed: u64,
    stride: usize,
}

impl Trajectory {
    pub fn new(gamma: StepSize, states: Vec<StateVector>, seed: u64) -> Result<Self> {
        Self::with_stride(gamma, states, seed, 1)
    }

    /// A thinned trajectory keeping every `stride`-th iterate of the chain.
    pub fn with_stride(
        gamma: StepSize,
        states: Vec<StateVector>,
        seed: u64,
        stride: usize,
    ) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::Argument("trajectory must hold at least one state".into()))?;
        let n = first.dim();
        for s in &states {
            check_dim(n, s.dim())?;
        }
        if stride == 0 {
            return Err(Error::Argument("stride must be positive".into()));
        }
        Ok(Trajectory { gamma, states, seed, stride })
    }

    pub fn gamma(&self) -> StepSize {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Time spacing between two stored iterates.
    pub fn spacing(&self) -> f64 {
        self.gamma.gamma() * self.stride as f64
    }

    /// Time of the `k`-th stored iterate.
    pub fn time(&self, k: usize) -> f64 {
        self.spacing() * k as f64
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.states.len() - 1)
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n < self.states.len() {
            Ok(())
        } else {
            Err(Error::Range(format!("index {n} beyond trajectory of length {}", self.states.len())))
        }
    }

    /// Writes the trajectory as CSV with header `k,t,x_1,...,x_N`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x_{i}")).collect();
        writeln!(w, "k,t,{}", header.join(","))?;
        for (k, x) in self.states.iter().enumerate() {
            let k_chain = k * self.stride;
            write!(w, "{k_chain},{}", fmt_f64(self.time(k)))?;
            for c in x.iter() {
                write!(w, ",{}", fmt_f64(*c))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Formats a float with 17 significant digits, fixed notation for moderate
/// exponents and scientific otherwise. The output parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..17).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, x)
    } else {
        sci
    }
}

/// A continuous-time path on `[0, horizon]`.
pub trait Path {
    fn dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn eval(&self, t: f64) -> Result<StateVector>;
    /// Times where the path may change slope.
    fn breakpoints(&self) -> Vec<f64>;
}

/// Absolute slack allowed when a requested time overshoots the horizon by
/// floating-point rounding.
pub(crate) fn time_slack(horizon: f64) -> f64 {
    1e-12 * horizon.max(1.0)
}

/// The piecewise-linear interpolation `X_gamma` of a trajectory.
#[derive(Debug, Clone)]
pub struct InterpolatedPath {
    trajectory: Trajectory,
}

impl InterpolatedPath {
    pub fn new(trajectory: Trajectory) -> Self {
        InterpolatedPath { trajectory }
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }
}

impl Path for InterpolatedPath {
    fn dim(&self) -> usize {
        self.trajectory.dim()
    }

    fn horizon(&self) -> f64 {
        self.trajectory.horizon()
    }

    fn eval(&self, t: f64) -> Result<StateVector> {
        interpolate(self, t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        (0..self.trajectory.len()).map(|k| self.trajectory.time(k)).collect()
    }
}

/// Evaluates `X_gamma(t) = x_k + (t/gamma - k)(x_{k+1} - x_k)` with `k = floor(t/gamma)`.
pub fn interpolate(path: &InterpolatedPath, t: f64) -> Result<StateVector> {
    let traj = &path.trajectory;
    let horizon = traj.horizon();
    if !(t >= 0.0) || t > horizon + time_slack(horizon) {
        return Err(Error::Range(format!("time {t} outside [0, {horizon}]")));
    }
    let last = traj.len() - 1;
    let u = t / traj.spacing();
    // snap times that are grid times up to rounding in `k * spacing / spacing`
    let nearest = u.round();
    if (u - nearest).abs() <= 4.0 * f64::EPSILON * nearest.max(1.0) {
        return Ok(traj.states[(nearest as usize).min(last)].clone());
    }
    let k = (u.floor() as usize).min(last);
    let frac = u - k as f64;
    if k == last {
        return Ok(traj.states[k].clone());
    }
    let a = &traj.states[k];
    let b = &traj.states[k + 1];
    Ok(StateVector::from_raw(
        a.iter().zip(b.iter()).map(|(x0, x1)| x0 + frac * (x1 - x0)).collect(),
    ))
}

/// A finitely supported probability measure with explicit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    atoms: Vec<(StateVector, f64)>,
}

impl OccupationMeasure {
    pub fn new(atoms: Vec<(StateVector, f64)>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::Argument("occupation measure needs at least one atom".into()))?;
        let n = first.0.dim();
        let mut total = 0.0;
        for (x, w) in &atoms {
            check_dim(n, x.dim())?;
            if !(*w >= 0.0) {
                return Err(Error::Argument(format!("negative weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("weights sum to {total}, expected 1")));
        }
        Ok(OccupationMeasure { atoms })
    }

    pub fn atoms(&self) -> &[(StateVector, f64)] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Mass the measure puts on `x`.
    pub fn mass_at(&self, x: &StateVector) -> f64 {
        self.atoms.iter().filter(|(a, _)| a == x).map(|(_, w)| w).sum()
    }

    /// `∫ x dΛ`.
    pub fn mean(&self) -> StateVector {
        let mut acc = vec![0.0; self.dim()];
        for (x, w) in &self.atoms {
            for (a, c) in acc.iter_mut().zip(x.iter()) {
                *a += w * c;
            }
        }
        StateVector::from_raw(acc)
    }
}

/// `Λ_n = (n+1)^{-1} Σ_{k<=n} δ_{x_k}`.
pub fn occupation_measure(traj: &Trajectory, n: usize) -> Result<OccupationMeasure> {
    occupation_window(traj, 0, n)
}

/// Uniform measure over the stored iterates `start..=end`.
pub fn occupation_window(traj: &Trajectory, start: usize, end: usize) -> Result<OccupationMeasure> {
    traj.check_index(end)?;
    if start > end {
        return Err(Error::Range(format!("window start {start} after end {end}")));
    }
    let w = 1.0 / (end - start + 1) as f64;
    Ok(OccupationMeasure {
        atoms: traj.states[start..=end].iter().map(|x| (x.clone(), w)).collect(),
    })
}

/// Averaged iterate `(n+1)^{-1} Σ_{k<=n} x_k`.
pub fn cesaro_mean(traj: &Trajectory, n: usize) -> Result<StateVector> {
    cesaro_window(traj, 0, n)
}

pub fn cesaro_window(traj: &Trajectory, start: usize, end: usize) -> Result<StateVector> {
    traj.check_index(end)?;
    if start > end {
        return Err(Error::Range(format!("window start {start} after end {end}")));
    }
    let count = (end - start + 1) as f64;
    let mut acc = vec![0.0; traj.dim()];
    for x in &traj.states[start..=end] {
        for (a, c) in acc.iter_mut().zip(x.iter()) {
            *a += c;
        }
    }
    Ok(StateVector::from_raw(acc.into_iter().map(|a| a / count).collect()))
}

/// Split of one increment into its drift and martingale-noise parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleDecomposition {
    pub drift_part: StateVector,
    pub noise_part: StateVector,
}

/// `x_next - x = gamma * drift + gamma * U`, returning both summands.
pub fn decompose_increment(
    x: &StateVector,
    x_next: &StateVector,
    gamma: StepSize,
    drift: &StateVector,
) -> Result<MartingaleDecomposition> {
    check_dim(x.dim(), x_next.dim())?;
    check_dim(x.dim(), drift.dim())?;
    let drift_part = drift.scale(gamma.gamma());
    let noise_part = x_next.sub(x).sub(&drift_part);
    Ok(MartingaleDecomposition { drift_part, noise_part })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    fn traj(gamma: f64, states: &[&[f64]]) -> Trajectory {
        Trajectory::new(
            StepSize::new(gamma).unwrap(),
            states.iter().map(|s| sv(s)).collect(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(StateVector::new(vec![f64::NAN]).is_err());
        assert!(StateVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(StateVector::new(vec![]).is_err());
    }

    #[test]
    fn step_size_bounds() {
        assert!(StepSize::new(0.0).is_err());
        assert!(StepSize::new(1.0).is_err());
        assert!(StepSize::bounded(0.5, 0.4).is_err());
        assert_eq!(StepSize::bounded(0.5, 2.0).unwrap().gamma(), 0.5);
    }

    #[test]
    fn interpolation_examples() {
        let p = InterpolatedPath::new(traj(0.5, &[&[0.0], &[2.0]]));
        assert_eq!(interpolate(&p, 0.5).unwrap(), sv(&[2.0]));
        assert_eq!(interpolate(&p, 0.25).unwrap(), sv(&[1.0]));
        assert!(matches!(interpolate(&p, 0.6), Err(Error::Range(_))));
        assert!(matches!(interpolate(&p, -0.1), Err(Error::Range(_))));

        let p = InterpolatedPath::new(traj(0.1, &[&[1.0, 1.0], &[0.8, 1.2], &[0.6, 1.4]]));
        let x = interpolate(&p, 0.15).unwrap();
        assert!((x[0] - 0.7).abs() < 1e-12 && (x[1] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn grid_times_reproduce_iterates_exactly() {
        for gamma in [0.02, 0.1, 0.3, 1e-3] {
            let states: Vec<StateVector> = (0..2000).map(|k| sv(&[(k as f64).sin(), k as f64 * 0.7])).collect();
            let t = Trajectory::new(StepSize::new(gamma).unwrap(), states.clone(), 0).unwrap();
            let path = InterpolatedPath::new(t.clone());
            for (k, x) in states.iter().enumerate() {
                assert_eq!(&interpolate(&path, t.time(k)).unwrap(), x, "gamma {gamma}, k {k}");
            }
        }
    }

    #[test]
    fn occupation_examples() {
        let m = occupation_measure(&traj(0.1, &[&[0.0], &[1.0]]), 1).unwrap();
        assert_eq!(m.atoms(), &[(sv(&[0.0]), 0.5), (sv(&[1.0]), 0.5)]);
        let m = occupation_measure(&traj(0.1, &[&[3.0]]), 0).unwrap();
        assert_eq!(m.atoms(), &[(sv(&[3.0]), 1.0)]);
        let t = traj(0.1, &[&[0.0], &[0.0], &[1.0]]);
        let m = occupation_measure(&t, 2).unwrap();
        assert!((m.mass_at(&sv(&[0.0])) - 2.0 / 3.0).abs() < 1e-15);
        assert!(occupation_measure(&t, 3).is_err());
    }

    #[test]
    fn cesaro_examples() {
        assert_eq!(cesaro_mean(&traj(0.1, &[&[0.0], &[2.0]]), 1).unwrap(), sv(&[1.0]));
        assert_eq!(cesaro_mean(&traj(0.1, &[&[1.0, 1.0]]), 0).unwrap(), sv(&[1.0, 1.0]));
        let t = traj(0.1, &[&[0.0], &[1.0], &[2.0], &[3.0]]);
        assert_eq!(cesaro_mean(&t, 3).unwrap(), sv(&[1.5]));
        assert!(matches!(cesaro_mean(&t, 4), Err(Error::Range(_))));
    }

    #[test]
    fn decomposition_examples() {
        let g = StepSize::new(0.1).unwrap();
        let d = decompose_increment(&sv(&[1.0]), &sv(&[1.0]), g, &sv(&[0.0])).unwrap();
        assert_eq!(d.drift_part, sv(&[0.0]));
        assert_eq!(d.noise_part, sv(&[0.0]));
        let d = decompose_increment(&sv(&[0.0]), &sv(&[0.1]), g, &sv(&[1.0])).unwrap();
        assert!((d.drift_part[0] - 0.1).abs() < 1e-15 && d.noise_part[0].abs() < 1e-15);
        assert!(matches!(
            decompose_increment(&sv(&[0.0]), &sv(&[0.1, 0.0]), g, &sv(&[1.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let t = traj(0.5, &[&[0.0, 1.0], &[2.0, 3.0]]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "k,t,x_1,x_2");
        assert_eq!(lines.len(), 3);
        let row: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(row, vec![1.0, 0.5, 2.0, 3.0]);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -2.5, 1e-9, 123456789.123, 1e300, 5.909090909090909, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "0.50000000000000000");
    }
}

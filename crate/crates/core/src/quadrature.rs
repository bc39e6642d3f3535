//! Gaussian expectations of piecewise-smooth scalar maps by adaptive Simpson
//! quadrature.

use std::f64::consts::PI;

/// Standard normal tails beyond this many standard deviations carry less than
/// 1e-30 of mass and are dropped.
const TAIL: f64 = 12.0;

/// Widest initial cell, in standard deviations.
const CELL: f64 = 0.5;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    adaptive(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `E[g(mu + sigma Z)]` for `Z ~ N(0,1)`. `kinks` lists points of `g` where it
/// fails to be smooth; the integration range is split there.
pub fn gaussian_expectation(g: &dyn Fn(f64) -> f64, mu: f64, sigma: f64, kinks: &[f64], tol: f64) -> f64 {
    if sigma == 0.0 {
        return g(mu);
    }
    let integrand = |u: f64| g(mu + sigma * u) * (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    let mut cuts: Vec<f64> = kinks
        .iter()
        .map(|k| (k - mu) / sigma)
        .filter(|u| u.abs() < TAIL)
        .collect();
    cuts.push(-TAIL);
    cuts.push(TAIL);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // a coarse first Simpson pass over a wide tail can accept a wrong value,
    // so start the adaptation from cells no wider than CELL
    let mut nodes = vec![cuts[0]];
    for w in cuts.windows(2) {
        let n = ((w[1] - w[0]) / CELL).ceil().max(1.0) as usize;
        nodes.extend((1..=n).map(|j| if j == n { w[1] } else { w[0] + (w[1] - w[0]) * j as f64 / n as f64 }));
    }
    let cells = (nodes.len() - 1) as f64;
    nodes.windows(2).map(|w| integrate(&integrand, w[0], w[1], tol / cells)).sum()
}

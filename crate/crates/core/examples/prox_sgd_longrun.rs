//! Long-run behaviour of constant-step proximal SGD on the lasso-type
//! problem `E ½‖x − s‖² + ρ‖x‖₁`: concentration near the minimizer and
//! the PPL/SPPL quantities at a few points.

use sadi::diagnostics::{longrun_ensemble, stationarity_residual, TargetSet};
use sadi::models::{kernel_prox_sgd, ProxSgdProblem};
use sadi::rng::NoiseStream;
use sadi::stability::{ppl_functional, sppl_gap, variance_w};
use sadi::{StateVector, StepSize};

fn main() -> sadi::Result<()> {
    let problem = ProxSgdProblem::canonical(StateVector::new(vec![2.0, -0.3])?, 1.0, 0.5)?;
    let zero_set = problem.stationary_point().expect("closed form for the canonical problem");
    println!("minimizer {zero_set}, minimum {:?}", problem.minimum());

    let kernel = kernel_prox_sgd(problem.clone());
    let target = TargetSet::Point(zero_set.clone());
    for gamma in [0.05, 0.01, 0.005] {
        let stats =
            longrun_ensemble(&kernel, &StateVector::zeros(2), StepSize::new(gamma)?, 20_000, 200_000, 4, 1, &target, 0.15)?;
        let worst = stats.iter().map(|s| s.fraction_within_eps).fold(1.0, f64::min);
        println!("gamma {gamma}: min fraction within 0.15 = {worst:.4}, Cesàro mean {}", stats[0].cesaro_mean);
    }

    let x = StateVector::new(vec![0.3, 0.4])?;
    let grad = problem.mean_gradient(&x)?;
    println!("D(x, 1) = {:.4}", ppl_functional(&problem, &grad, &x, 1.0)?);
    println!("W(x) = {:?}", variance_w(&problem, &x)?);
    println!("stationarity residual at x: {:.4}, at the minimizer: {}", stationarity_residual(&problem, &x, 0.1)?, stationarity_residual(&problem, &zero_set, 0.1)?);
    let (gap, se) = sppl_gap(&problem, &x, StepSize::new(0.1)?, 1.0, 10_000, &mut NoiseStream::new(1, 0))?;
    println!("SPPL gap {gap:.4} ± {se:.4}");
    Ok(())
}

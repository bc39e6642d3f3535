//! Iterates, their piecewise-linear interpolation, occupation measures and
//! Cesàro means for a short prox-SGD run.

use sadi::models::{kernel_prox_sgd, run_chain, ProxSgdProblem};
use sadi::state::{cesaro_mean, interpolate, occupation_measure, InterpolatedPath};
use sadi::{StateVector, StepSize};

fn main() -> sadi::Result<()> {
    let problem = ProxSgdProblem::canonical(StateVector::new(vec![2.0, -0.3])?, 1.0, 0.5)?;
    let kernel = kernel_prox_sgd(problem);
    let gamma = StepSize::new(0.1)?;
    let traj = run_chain(&kernel, &StateVector::zeros(2), gamma, 50, 3)?;

    let path = InterpolatedPath::new(traj.clone());
    for t in [0.0, 0.05, 0.1, 1.234, traj.horizon()] {
        println!("X({t:.3}) = {}", interpolate(&path, t)?);
    }

    let n = traj.len() - 1;
    let occupation = occupation_measure(&traj, n)?;
    println!("occupation measure: {} atoms, mass {}", occupation.atoms().len(), occupation.total_mass());
    println!("Cesàro mean after {n} steps: {}", cesaro_mean(&traj, n)?);

    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("in-memory write");
    let text = String::from_utf8(csv).expect("utf8");
    for line in text.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}

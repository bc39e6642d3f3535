//! Monte Carlo check of the Lyapunov drift inequality
//! `P_γV ≤ V − α(γ)ψ + β(γ)` for the priority queue, with the derived
//! constant and with the slack removed.

use sadi::models::{kernel_queue, ArrivalLaw, QueueChainSpec};
use sadi::setvalued::QueueMeanField;
use sadi::stability::{ph_check_monte_carlo, queue_lyapunov, queue_lyapunov_constant, queue_lyapunov_with_constant};
use sadi::{StateVector, StepSize};

fn main() -> sadi::Result<()> {
    let spec = QueueChainSpec::new(QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8])?, ArrivalLaw::Bernoulli)?;
    println!("derived constant C = {}", queue_lyapunov_constant(&spec));
    let kernel = kernel_queue(spec.clone());

    let gamma = 0.05;
    let probes: Vec<StateVector> = (0..=10)
        .flat_map(|i| (0..=10).map(move |j| StateVector::new(vec![i as f64 * 2.0 * gamma, j as f64 * 2.0 * gamma])))
        .collect::<sadi::Result<_>>()?;

    for (label, lyap) in [("derived", queue_lyapunov(&spec)?), ("no slack", queue_lyapunov_with_constant(&spec, 0.0))] {
        let report = ph_check_monte_carlo(&kernel, &lyap, &probes, StepSize::new(gamma)?, 20_000, 9)?;
        println!("{label}: {} probes, {} flagged", report.records.len(), report.flags());
        if let Some(r) = report.records.iter().find(|r| r.flag) {
            println!("  first flag at {} with gap {:.3e} (stderr {:.1e})", r.x, r.gap, r.stderr);
        }
    }
    Ok(())
}

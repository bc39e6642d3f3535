//! Sweep of sup distances between scaled queue paths and their fluid limit
//! over `[0, T]` as the step shrinks, with exceedance fractions and a
//! bootstrap band for the median.

use sadi::di_solver::solve_queue_exact;
use sadi::diagnostics::narrow_convergence_sweep;
use sadi::models::{kernel_queue, ArrivalLaw, QueueChainSpec};
use sadi::setvalued::QueueMeanField;
use sadi::StateVector;

fn main() -> sadi::Result<()> {
    let field = QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8])?;
    let a = StateVector::new(vec![1.0, 1.0])?;
    let limit = solve_queue_exact(&field, &a, 8.0)?;
    let kernel = kernel_queue(QueueChainSpec::new(field, ArrivalLaw::Bernoulli)?);

    let sweep = narrow_convergence_sweep(&kernel, &limit, &a, &[0.1, 0.02, 0.004, 0.001], 8.0, 100, 0.25, 2024)?;
    for (i, s) in sweep.summary().iter().enumerate() {
        let (lo, hi) = sweep.median_band(i, 7);
        println!(
            "gamma {:<6} exceedance {:.3}  median {:.3} [{lo:.3}, {hi:.3}]  q90 {:.3}  median/sqrt(gamma) {:.2}",
            s.gamma,
            s.exceedance,
            s.median,
            s.q90,
            s.median / s.gamma.sqrt()
        );
    }
    let mut csv = Vec::new();
    sweep.write_summary_csv(&mut csv).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

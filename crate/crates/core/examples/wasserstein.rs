//! W₁ distance between occupation measures of queue chains at two step
//! sizes, and between two halves of one long run.

use sadi::diagnostics::wasserstein_1d;
use sadi::models::{kernel_queue, run_chain_thinned, ArrivalLaw, QueueChainSpec};
use sadi::setvalued::QueueMeanField;
use sadi::state::{occupation_window, OccupationMeasure};
use sadi::{StateVector, StepSize};

fn main() -> sadi::Result<()> {
    let kernel = kernel_queue(QueueChainSpec::new(
        QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8])?,
        ArrivalLaw::Bernoulli,
    )?);
    let zero = StateVector::zeros(2);
    let coarse = run_chain_thinned(&kernel, &zero, StepSize::new(0.05)?, 400_000, 1, 10)?;
    let fine = run_chain_thinned(&kernel, &zero, StepSize::new(0.01)?, 2_000_000, 2, 50)?;

    let whole = |t: &sadi::Trajectory| -> sadi::Result<OccupationMeasure> { occupation_window(t, 0, t.len() - 1) };
    let half = coarse.len() / 2;
    let first = occupation_window(&coarse, 0, half)?;
    let second = occupation_window(&coarse, half, coarse.len() - 1)?;
    for k in 0..2 {
        println!(
            "queue {}: W1(γ=0.05, γ=0.01) = {:.4}   W1(first half, second half) = {:.4}",
            k + 1,
            wasserstein_1d(&whole(&coarse)?, &whole(&fine)?, k)?,
            wasserstein_1d(&first, &second, k)?
        );
    }
    Ok(())
}

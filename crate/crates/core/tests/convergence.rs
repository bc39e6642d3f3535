use sadi::di_solver::solve_queue_exact;
use sadi::diagnostics::narrow_convergence_sweep;
use sadi::models::{kernel_queue, ArrivalLaw, QueueChainSpec};
use sadi::setvalued::QueueMeanField;
use sadi::StateVector;

#[test]
fn queue_sweep_medians_do_not_increase() {
    let field = QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8]).unwrap();
    let a = StateVector::new(vec![1.0, 1.0]).unwrap();
    let limit = solve_queue_exact(&field, &a, 8.0).unwrap();
    let kernel = kernel_queue(QueueChainSpec::new(field, ArrivalLaw::Bernoulli).unwrap());
    let sweep = narrow_convergence_sweep(&kernel, &limit, &a, &[0.1, 0.02, 0.004], 8.0, 200, 0.25, 77).unwrap();
    let summary = sweep.summary();

    let mut inversions = 0;
    for i in 0..summary.len() - 1 {
        if summary[i + 1].median > summary[i].median {
            inversions += 1;
            let (_, hi) = sweep.median_band(i, 3);
            assert!(summary[i + 1].median <= hi, "inversion at {i} outside the bootstrap band");
        }
    }
    assert!(inversions <= 1);
    assert!(summary.windows(2).all(|w| w[1].exceedance <= w[0].exceedance), "{summary:?}");
}

//! Fluid limit of the two-class priority queue: exact piecewise-linear
//! solution, a Filippov time-stepping reference, and one scaled queue path.

use sadi::di_solver::{path_sup_distance, solve_filippov_reference, solve_queue_exact};
use sadi::models::{kernel_queue, run_chain, ArrivalLaw, QueueChainSpec};
use sadi::setvalued::{queue_map_eval, stability_check, QueueMeanField};
use sadi::state::InterpolatedPath;
use sadi::{StateVector, StepSize};

fn main() -> sadi::Result<()> {
    let field = QueueMeanField::new(vec![0.1, 0.2], vec![0.5, 0.8])?;
    println!("{:?}", stability_check(&field));

    let a = StateVector::new(vec![1.0, 1.0])?;
    let exact = solve_queue_exact(&field, &a, 8.0)?;
    for (t, (x, v)) in exact.breakpoint_times().iter().zip(exact.nodes().iter().zip(exact.segment_velocities())) {
        println!("t = {t:.6}  x = {x}  velocity = {v}");
    }

    let map = |x: &StateVector| queue_map_eval(&field, x);
    for step in [1e-2, 1e-3, 1e-4] {
        let reference = solve_filippov_reference(&map, &a, 8.0, step)?;
        println!("reference step {step:e}: sup error {:.3e}", path_sup_distance(&exact, &reference, 8.0)?);
    }

    let kernel = kernel_queue(QueueChainSpec::new(field, ArrivalLaw::Bernoulli)?);
    for gamma in [0.1_f64, 0.01, 0.001] {
        let n = (8.0 / gamma).ceil() as usize;
        let traj = run_chain(&kernel, &a, StepSize::new(gamma)?, n, 1)?;
        let d = path_sup_distance(&InterpolatedPath::new(traj), &exact, 8.0)?;
        println!("queue path at gamma {gamma}: sup distance to fluid limit {d:.3}");
    }
    Ok(())
}

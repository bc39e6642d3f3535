//! Stochastic proximal point iterations `x₊ = (I + γA(ξ, ·))⁻¹ x` for three
//! operator laws, with ergodic averages against the zero set of the mean.

use sadi::diagnostics::{longrun_ensemble, TargetSet};
use sadi::models::{kernel_spp, SppFamily, SppSpec};
use sadi::prox::AffineOperator;
use sadi::{StateVector, StepSize};

fn main() -> sadi::Result<()> {
    let families = [
        SppFamily::GaussianShift { mean: StateVector::new(vec![1.0])?, sigma: 1.0 },
        SppFamily::SignedShift { magnitude: 1.0, dim: 2 },
        SppFamily::Affine(AffineOperator::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.5]], &[-1.0, 0.0])?),
    ];
    for family in families {
        let spec = SppSpec::new(family)?;
        let dim = spec.dim();
        let target = match spec.mean_zero() {
            Some(z) => TargetSet::Point(z),
            None => {
                let s = spec.clone();
                TargetSet::Residual(std::sync::Arc::new(move |x| s.distance_to_zeros(x).unwrap_or(f64::INFINITY)))
            }
        };
        let kernel = kernel_spp(spec);
        let start = StateVector::new(vec![3.0; dim])?;
        let stats = longrun_ensemble(&kernel, &start, StepSize::new(0.01)?, 10_000, 200_000, 3, 2, &target, 0.1)?;
        for s in stats {
            println!(
                "{:<14} seed {:>20}: Cesàro mean {}  distance {:.4}  fraction within 0.1 {:.3}",
                sadi::models::Kernel::name(&kernel),
                s.seed,
                s.cesaro_mean,
                s.ergodic_distance,
                s.fraction_within_eps
            );
        }
    }
    Ok(())
}

//! Proximity operators, Moreau envelope gradients, resolvents and Yosida
//! regularizations.

use std::sync::Arc;

use sadi::prox::{
    least_norm_subgradient, moreau_gradient, prox, resolvent, yosida, AffineOperator, ConvexFunction,
    MonotoneOperator,
};
use sadi::StateVector;

fn main() -> sadi::Result<()> {
    let x = StateVector::new(vec![1.5, -0.2, 0.0])?;
    let catalog = [
        ConvexFunction::l1(0.5)?,
        ConvexFunction::squared_l2(2.0)?,
        ConvexFunction::boxed(vec![-1.0], vec![1.0])?,
        ConvexFunction::NonnegIndicator,
        ConvexFunction::shifted(ConvexFunction::l1(1.0)?, StateVector::new(vec![1.0, 0.0, 0.0])?),
    ];
    for r in &catalog {
        let p = prox(r, 0.5, &x)?;
        let g = moreau_gradient(r, 0.5, &x)?;
        println!("{r:?}\n  prox = {p}\n  envelope gradient = {g}\n  x - (p + γg) = {}", x.sub(&p.axpy(0.5, &g)));
    }

    // smooth custom function: log-sum-exp style softplus, prox by an inner solver
    let softplus = ConvexFunction::custom(
        "softplus",
        Arc::new(|x: &StateVector| x.iter().map(|c| c.exp().ln_1p()).sum()),
        Arc::new(|x: &StateVector| StateVector::new(x.iter().map(|c| 1.0 / (1.0 + (-c).exp())).collect())),
    );
    println!("custom prox = {}", prox(&softplus, 1.0, &x)?);

    let abs = MonotoneOperator::Subdifferential(ConvexFunction::l1(1.0)?);
    let at = StateVector::new(vec![0.5])?;
    println!("least-norm element of ∂|·| at 0.5: {}", least_norm_subgradient(&ConvexFunction::l1(1.0)?, &at)?);
    for gamma in [1.0, 0.1, 0.01, 0.001] {
        println!("yosida γ = {gamma}: {}", yosida(&abs, gamma, &at)?);
    }

    let rotation = AffineOperator::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]], &[0.0, 0.0])?;
    let a = MonotoneOperator::Affine(rotation);
    println!("resolvent of a rotation: {}", resolvent(&a, 1.0, &StateVector::new(vec![1.0, 0.0])?)?);
    Ok(())
}

// Gradient of an action from the discriminant, checked against central
// differences, and its orthogonality to the KdV vector field.

use kdvlab::dynamics::kdv_rhs;
use kdvlab::hill::{action_gradient, GradientMethod};
use kdvlab::spectral::Field;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let u = Field::from_pairs(vec![[0.03, -0.01], [0.005, 0.002], [0.0, 0.001], [2e-4, 0.0]])?;
    let formula = action_gradient(&u, 1, GradientMethod::Formula)?;
    let fd = action_gradient(&u, 1, GradientMethod::FiniteDifference)?;
    let mut diff = formula.clone();
    diff.axpy(-1.0, &fd);
    println!("relative difference: {:.2e}", diff.sobolev_norm(0.0) / formula.sobolev_norm(0.0));

    let v = kdv_rhs(&u);
    let cos = formula.dot(&v) / (formula.sobolev_norm(0.0) * v.sobolev_norm(0.0));
    println!("<∇I_1, V(u)> normalised: {cos:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

// Periodic spectrum, gap lengths and actions of a small potential, set
// against the linearised actions.

use kdvlab::hill::{actions_with_spectrum, discriminant};
use kdvlab::spectral::{linear_actions, Field};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let free = discriminant(&Field::zeros(4), 100.0)?;
    println!("free operator: Δ(100) = {:.12} vs 2cos(10) = {:.12}", free.delta, 2.0 * 10f64.cos());

    let u = Field::from_pairs(vec![[0.05, 0.0], [0.0, 0.02], [0.004, 0.004], [0.0, 0.0]])?;
    let (acts, spec) = actions_with_spectrum(&u, 4)?;
    let lin = linear_actions(&u, 4);
    println!("ground state λ0 = {:.6e}", spec.ground());
    for j in 1..=4 {
        let (lo, hi) = spec.gap(j);
        println!(
            "gap {j}: [{lo:.8}, {hi:.8}]  γ = {:.3e}  I = {:.6e}  linearised {:.6e}",
            spec.gap_length(j),
            acts.get(j),
            lin.get(j)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

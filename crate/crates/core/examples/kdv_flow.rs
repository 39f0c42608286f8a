// Integrate unperturbed KdV and watch the conservation laws.

use kdvlab::dynamics::{evolve, EvolveParams, PerturbationSpec};
use kdvlab::measures::{conservation_functional, sample, MeasureKind, MeasureSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let draw = sample(&MeasureSpec::new(MeasureKind::GaussianH, 3.0, 16), 3, 0)?.field;
    let u0 = draw.scale(0.2 / draw.sobolev_norm(3.0));
    let params = EvolveParams::fast(0.0, 0.05).with_dt(2.5e-4);
    let traj = evolve(&u0, &params, &PerturbationSpec::none(), 0.01)?;
    let (_, last) = traj.last();
    for n in 0..=2 {
        let a = conservation_functional(&u0, n)?;
        let b = conservation_functional(last, n)?;
        println!("J_{n}: {a:.12e} -> {b:.12e}  (relative drift {:.1e})", ((b - a) / a).abs());
    }
    println!("{} samples stored", traj.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

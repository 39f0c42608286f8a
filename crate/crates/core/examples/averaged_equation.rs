// Solve the averaged equation for the gap actions and compare it with the
// actions along a perturbed trajectory.

use kdvlab::averaging::{compare, solve_averaged, AveragedField, CompareParams};
use kdvlab::dynamics::{evolve, EvolveParams, PerturbationSpec};
use kdvlab::hill::actions;
use kdvlab::measures::{sample, MeasureKind, MeasureSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let draw = sample(&MeasureSpec::new(MeasureKind::GaussianH, 3.0, 8), 1, 0)?.field;
    let u0 = draw.scale(0.1 / draw.sobolev_norm(3.0));
    let spec = PerturbationSpec::double_antiderivative();
    let i0 = actions(&u0, 3)?.entries().to_vec();
    let mut field = AveragedField::linear_order(&spec, 3).expect("closed form");
    let sol = solve_averaged(&i0, 1.0, &mut field, 1.0, f64::INFINITY)?;

    let traj = evolve(&u0, &EvolveParams::slow(0.1, 1.0), &spec, 0.1)?;
    let rep = compare(&traj, &sol, Some(&mut field), &CompareParams { q: 0.0, rho: 1e-9 })?;
    for (n, tau) in rep.taus.iter().enumerate().step_by(5) {
        println!("tau={tau:.1}: I_1 = {:.8e}  J_1 = {:.8e}", rep.actions[n][0], rep.averaged[n][0]);
    }
    println!("rho_observed = {:.3e} (pass at 1e-9: {})", rep.rho_observed, rep.pass);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

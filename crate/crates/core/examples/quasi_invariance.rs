// Volume growth rate of a Galerkin truncation relative to e^{-J_{p+1}}.

use kdvlab::averaging::quasi_invariance_rate;
use kdvlab::dynamics::{galerkin_evolve, EvolveParams, PerturbationSpec};
use kdvlab::measures::{sample, MeasureKind, MeasureSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let m = 8;
    let u = sample(&MeasureSpec::new(MeasureKind::GaussianH, 3.0, m), 2, 0)?.field;
    let u0 = u.scale(0.1 / u.sobolev_norm(3.0));
    let spec = PerturbationSpec::double_antiderivative();
    for eps in [0.1, 0.01] {
        let traj = galerkin_evolve(&u0, m, &EvolveParams::slow(eps, 0.5), &spec, 0.05)?;
        let series = quasi_invariance_rate(&traj, m, 1, eps, &spec)?;
        let sup = series.iter().map(|s| s.rate.abs()).fold(0.0, f64::max);
        println!("eps = {eps}: sup|r| = {sup:.4e}, divergence {:.4e}", series[0].divergence);
    }
    let ham = PerturbationSpec::derivative();
    let traj = galerkin_evolve(&u0, m, &EvolveParams::slow(0.1, 0.1), &ham, 0.05)?;
    let series = quasi_invariance_rate(&traj, m, 1, 0.1, &ham)?;
    println!("f = u_x: divergence {:?}", series.iter().map(|s| s.divergence).collect::<Vec<_>>());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

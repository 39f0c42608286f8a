// Distance between Galerkin truncations of increasing size.

use kdvlab::dynamics::{galerkin_evolve, EvolveParams, PerturbationSpec};
use kdvlab::measures::{sample, MeasureKind, MeasureSpec};
use kdvlab::spectral::project;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let u = sample(&MeasureSpec::new(MeasureKind::GaussianH, 4.0, 32), 7, 0)?.field;
    let u0 = u.scale(0.1 / u.sobolev_norm(3.0));
    let spec = PerturbationSpec::double_antiderivative();
    let params = EvolveParams::slow(1e-2, 0.02);
    let run = |m: usize| galerkin_evolve(&project(&u0, m).resized(m), m, &params, &spec, 0.005);
    let (a, b, c) = (run(8)?, run(16)?, run(32)?);
    for (m, lo, hi) in [(8, &a, &b), (16, &b, &c)] {
        let sup = lo
            .fields()
            .zip(hi.fields())
            .map(|(x, y)| {
                let mut d = y.clone();
                d.axpy(-1.0, &x.resized(y.m_max()));
                d.sobolev_norm(3.0)
            })
            .fold(0.0, f64::max);
        println!("sup ||u^{m} - u^{}||_3 = {sup:.3e}", 2 * m);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

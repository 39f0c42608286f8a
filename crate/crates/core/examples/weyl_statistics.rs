// Time-then-ensemble averages of e^{i s·φ} over a small Gaussian ensemble.

use kdvlab::averaging::weyl_report;
use kdvlab::dynamics::{evolve, EvolveParams, PerturbationSpec};
use kdvlab::measures::{sample, MeasureKind, MeasureSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let measure = MeasureSpec::new(MeasureKind::GaussianH, 3.0, 8);
    let spec = PerturbationSpec::double_antiderivative();
    let ensemble = (0..8)
        .map(|i| {
            let u = sample(&measure, 5, i)?.field;
            let u = u.scale(0.1 / u.sobolev_norm(3.0));
            Ok(evolve(&u, &EvolveParams::slow(0.1, 1.0), &spec, 0.01)?)
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    let rep = weyl_report(&ensemble, 3, 2);
    println!("{} statistics, largest |s| ≠ 0 modulus {:.3e}", rep.statistics.len(), rep.max_modulus());
    for s in [[1, 0, 0], [1, -1, 0], [0, 1, 1]] {
        let w = rep.get(&s).expect("listed");
        println!("s = {s:?}: {:.3e} {:+.3e}i", w.re, w.im);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

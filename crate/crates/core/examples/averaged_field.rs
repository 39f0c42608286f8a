// Time-average the action rates of a damping perturbation along the
// unperturbed flow and compare with the first-order closed form.

use kdvlab::averaging::{estimate_averaged_field, AveragedField, AveragingParams};
use kdvlab::dynamics::PerturbationSpec;
use kdvlab::hill::actions;
use kdvlab::measures::{sample, MeasureKind, MeasureSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let draw = sample(&MeasureSpec::new(MeasureKind::GaussianH, 3.0, 8), 1, 0)?.field;
    let u = draw.scale(0.1 / draw.sobolev_norm(3.0));
    let spec = PerturbationSpec::double_antiderivative();
    let params = AveragingParams {
        samples: 64,
        ..AveragingParams::default()
    };
    let est = estimate_averaged_field(&u, 3, &spec, &params)?;
    let i = actions(&u, 3)?.entries().to_vec();
    let lin = AveragedField::linear_order(&spec, 3).expect("closed form").rates(&i)?;
    for k in 1..=3 {
        println!(
            "k={k}: <F_k> = {:.6e} ± {:.1e}   first order {:.6e}",
            est.mean[k - 1],
            est.error_bar(k),
            lin[k - 1]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

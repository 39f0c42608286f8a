// Draw ensembles from the Gaussian and Gibbs-type measures and report the
// effective sample size of the reweighted one.

use kdvlab::measures::{effective_sample_size, sample_ensemble, weighted_mean, MeasureKind, MeasureSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let gauss = MeasureSpec::new(MeasureKind::GaussianH, 3.0, 16);
    let draws = sample_ensemble(&gauss, 42, 200)?;
    let mean_sq = draws.iter().map(|s| s.field.sobolev_norm(3.0).powi(2)).sum::<f64>() / draws.len() as f64;
    println!("gaussian_h p=3: mean ||u||_3^2 = {mean_sq:.4e}");

    let gibbs = MeasureSpec::new(MeasureKind::GibbsP, 1.0, 16);
    let draws = sample_ensemble(&gibbs, 42, 200)?;
    let lw: Vec<f64> = draws.iter().map(|s| s.log_weight).collect();
    let norms: Vec<f64> = draws.iter().map(|s| s.field.sobolev_norm(0.0)).collect();
    println!("gibbs_p p=1: ESS = {:.1} of {}", effective_sample_size(&lw), lw.len());
    println!("weighted mean ||u||_0 = {:.4e}", weighted_mean(&lw, &norms));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! straight to stdout, so the lines show even when output is captured.

use std::io::Write;
use std::time::Instant;

use kdvlab::averaging::{
    compare, estimate_averaged_field, quasi_invariance_rate, solve_averaged, weyl_report, AveragedField,
    AveragingParams, CompareParams,
};
use kdvlab::dynamics::{evolve, galerkin_evolve, kdv_rhs, EvolveParams, PerturbationSpec, Trajectory};
use kdvlab::hill::{action_gradient, actions, discriminant, periodic_spectrum, GradientMethod};
use kdvlab::lab::{run, ExperimentConfig, ExperimentKind, InitialSource, RunOptions};
use kdvlab::measures::{conservation_functional, sample, MeasureKind, MeasureSpec};
use kdvlab::spectral::{project, wavenumber, weighted_l1, Field};

fn report(n: usize, name: &str, pass: bool, detail: &str, start: Instant) {
    let mut out = std::io::stdout().lock();
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "criterion {n:>2} {verdict} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
}

/// Gaussian draw rescaled to `||u||_3 = amplitude`.
fn gaussian(p: f64, m: usize, seed: u64, index: u64, amplitude: f64) -> Field {
    let u = sample(&MeasureSpec::new(MeasureKind::GaussianH, p, m), seed, index).unwrap().field;
    u.scale(amplitude / u.sobolev_norm(3.0))
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn max_rel_change(values: &[f64]) -> f64 {
    let a = values[0];
    values.iter().map(|v| ((v - a) / a).abs()).fold(0.0, f64::max)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

const SWEEP: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[test]
fn criterion_01_free_discriminant() {
    let start = Instant::now();
    let zero = Field::zeros(8);
    let (mut worst_delta, mut worst_w) = (0.0f64, 0.0f64);
    for i in 0..=2040 {
        let lambda = -10.0 + 510.0 * i as f64 / 2040.0;
        let s = discriminant(&zero, lambda).unwrap();
        let exact = if lambda >= 0.0 {
            2.0 * lambda.sqrt().cos()
        } else {
            2.0 * (-lambda).sqrt().cosh()
        };
        worst_delta = worst_delta.max((s.delta - exact).abs());
        worst_w = worst_w.max((s.wronskian() - 1.0).abs());
    }
    let pass = worst_delta <= 1e-8 && worst_w <= 1e-9 && start.elapsed().as_secs() < 10;
    let detail = format!("max |Δ - Δ_free| = {worst_delta:.2e}, max |W - 1| = {worst_w:.2e}");
    report(1, "free-operator discriminant", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_integrator_order() {
    let start = Instant::now();
    // The asymptotic regime needs dt small against the inverse triad
    // frequencies, which grow like m³; four modes reach it above the
    // roundoff floor (about 1e-12 relative).
    let u0 = gaussian(3.0, 4, 21, 0, 0.2);
    let t = 0.1;
    let dts = [2.5e-4, 1.25e-4];
    let end = |dt: f64| -> Field {
        let tr = evolve(&u0, &EvolveParams::fast(0.0, t).with_dt(dt), &PerturbationSpec::none(), t).unwrap();
        tr.last().1.clone()
    };
    let reference = end(dts[1] / 8.0);
    let errors: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let mut d = end(dt);
            d.axpy(-1.0, &reference);
            d.sobolev_norm(0.0)
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = worst >= 3.7 && start.elapsed().as_secs() < 60;
    let detail = format!("errors {}, observed orders {orders:.3?}", sci(&errors));
    report(2, "integrator order", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_integrability() {
    let start = Instant::now();
    let u0 = gaussian(3.0, 32, 3, 0, 0.2);
    let traj = evolve(&u0, &EvolveParams::fast(0.0, 1.0).with_dt(2.5e-4), &PerturbationSpec::none(), 0.1).unwrap();
    let mut worst_j = 0.0f64;
    for n in 0..=2 {
        let vals: Vec<f64> = traj.fields().map(|u| conservation_functional(u, n).unwrap()).collect();
        worst_j = worst_j.max(max_rel_change(&vals));
    }
    let spectra: Vec<Vec<f64>> = traj
        .fields()
        .map(|u| periodic_spectrum(u, 2).unwrap().lambdas()[..5].to_vec())
        .collect();
    let worst_eig = spectra
        .iter()
        .flat_map(|s| s.iter().zip(&spectra[0]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let acts: Vec<Vec<f64>> = traj.fields().map(|u| actions(u, 3).unwrap().entries().to_vec()).collect();
    let worst_act = (0..3)
        .map(|k| max_rel_change(&acts.iter().map(|a| a[k]).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let pass = worst_j <= 1e-7 && worst_eig < 1e-5 && worst_act <= 1e-3 && start.elapsed().as_secs() < 300;
    let detail = format!(
        "J_0..J_2 drift {worst_j:.2e}, eigenvalue drift {worst_eig:.2e}, action drift {worst_act:.2e}"
    );
    report(3, "integrability suite", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_04_linearisation() {
    let start = Instant::now();
    let amps = [0.2, 0.1, 0.05, 0.025];
    let gaps: Vec<f64> = amps
        .iter()
        .map(|&a| {
            let u = Field::basis(1, 4).scale(a);
            let i1 = actions(&u, 1).unwrap().get(1);
            (i1 / (a * a / (4.0 * std::f64::consts::PI)) - 1.0).abs()
        })
        .collect();
    let orders: Vec<f64> = gaps.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = strictly_decreasing(&gaps) && worst >= 1.0 && start.elapsed().as_secs() < 120;
    let detail = format!("|ratio - 1| = {}, orders {orders:.2?}", sci(&gaps));
    report(4, "linearisation consistency", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_gradient_check() {
    let start = Instant::now();
    let (mut worst_fd, mut worst_orth) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let u = gaussian(3.0, 8, 5, i, 0.2);
        let g = action_gradient(&u, 1, GradientMethod::Formula).unwrap();
        let d = action_gradient(&u, 1, GradientMethod::FiniteDifference).unwrap();
        let mut diff = g.clone();
        diff.axpy(-1.0, &d);
        worst_fd = worst_fd.max(diff.sobolev_norm(0.0) / g.sobolev_norm(0.0));
        let v = kdv_rhs(&u);
        worst_orth = worst_orth.max((g.dot(&v) / (g.sobolev_norm(0.0) * v.sobolev_norm(0.0))).abs());
    }
    let pass = worst_fd <= 1e-4 && worst_orth <= 1e-6 && start.elapsed().as_secs() < 300;
    let detail = format!("max relative FD error {worst_fd:.2e}, max normalised <∇I, V> {worst_orth:.2e}");
    report(5, "gradient check", pass, &detail, start);
    assert!(pass, "{detail}");
}

const SWEEP_M: usize = 16;
const SWEEP_AMPLITUDE: f64 = 0.1;
const SWEEP_DT: f64 = 1e-4;

/// `sup_τ |I(v^ε(τ)) - J(τ)|~_0` along the sweep, relative to `|I(0)|~_0`.
fn rho_sweep(u0: &Field, spec: &PerturbationSpec, field: &mut AveragedField) -> Vec<f64> {
    let k = field.k_max();
    let i0 = actions(u0, k).unwrap().entries().to_vec();
    let sol = solve_averaged(&i0, 1.0, field, 1.0, f64::INFINITY).unwrap();
    let scale = weighted_l1(&i0, 0.0);
    SWEEP
        .iter()
        .map(|&eps| {
            let traj: Trajectory = evolve(u0, &EvolveParams::slow(eps, 1.0).with_dt(SWEEP_DT), spec, 0.05).unwrap();
            compare(&traj, &sol, None, &CompareParams { q: 0.0, rho: 1.0 }).unwrap().rho_observed / scale
        })
        .collect()
}

fn sweep_params() -> AveragingParams {
    AveragingParams {
        samples: 128,
        ..AveragingParams::default()
    }
}

#[test]
fn criterion_06_hamiltonian_null_average() {
    let start = Instant::now();
    let u0 = gaussian(3.0, SWEEP_M, 1, 0, SWEEP_AMPLITUDE);
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, spec) in [
        ("u_x", PerturbationSpec::derivative()),
        ("∂⁻¹u", PerturbationSpec::antiderivative()),
    ] {
        let est = estimate_averaged_field(&u0, 3, &spec, &sweep_params()).unwrap();
        let null = est.consistent_with(&[0.0; 3], 2.0);
        let mut zero = AveragedField::zero(3);
        let rho = rho_sweep(&u0, &spec, &mut zero);
        let dec = strictly_decreasing(&rho);
        pass &= null && dec;
        lines.push(format!(
            "f = {name}: <F> = {} ± {} (within 2σ of 0: {null}); relative rho {} (decreasing: {dec})",
            sci(&est.mean),
            sci(&(1..=3).map(|k| est.error_bar(k)).collect::<Vec<_>>()),
            sci(&rho),
        ));
    }
    pass &= start.elapsed().as_secs() < 900;
    let detail = lines.join("; ");
    report(6, "Hamiltonian null average", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_dissipative_averaging() {
    let start = Instant::now();
    let spec = PerturbationSpec::double_antiderivative();
    let u0 = gaussian(3.0, SWEEP_M, 1, 0, SWEEP_AMPLITUDE);
    let i0 = actions(&u0, 3).unwrap().entries().to_vec();

    let est = estimate_averaged_field(&u0, 3, &spec, &sweep_params()).unwrap();
    let predicted: Vec<f64> = (1..=3).map(|k| -2.0 / wavenumber(k).powi(2) * i0[k - 1]).collect();
    let worst_rate = (0..3)
        .map(|k| ((est.mean[k] - predicted[k]) / predicted[k]).abs())
        .fold(0.0, f64::max);

    let mut field = AveragedField::linear_order(&spec, 3).unwrap();
    let sol = solve_averaged(&i0, 1.0, &mut field, 1.0, f64::INFINITY).unwrap();
    let worst_ode = (0..=100)
        .map(|i| {
            let tau = i as f64 / 100.0;
            let j = sol.at(tau).unwrap();
            (0..3)
                .map(|k| (j[k] - i0[k] * (-2.0 * tau / wavenumber(k + 1).powi(2)).exp()).abs() / i0[k])
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    let rho = rho_sweep(&u0, &spec, &mut field);
    let dec = strictly_decreasing(&rho);
    let pass = worst_rate <= 0.05 && worst_ode <= 1e-8 && dec && start.elapsed().as_secs() < 1200;
    let detail = format!(
        "max relative rate error {worst_rate:.2e}, averaged ODE vs exponential {worst_ode:.2e}, \
         relative rho {} (decreasing: {dec})",
        sci(&rho)
    );
    report(7, "dissipative averaging", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_equidistribution() {
    let start = Instant::now();
    let spec = PerturbationSpec::double_antiderivative();
    let members = 50;
    let maxima: Vec<f64> = SWEEP
        .iter()
        .map(|&eps| {
            let ensemble: Vec<Trajectory> = (0..members)
                .map(|i| {
                    let u = gaussian(3.0, SWEEP_M, 11, i, SWEEP_AMPLITUDE);
                    evolve(&u, &EvolveParams::slow(eps, 1.0), &spec, 0.01).unwrap()
                })
                .collect();
            let rep = weyl_report(&ensemble, 3, 2);
            assert_eq!(rep.get(&[0, 0, 0]).unwrap().re, 1.0);
            rep.max_modulus()
        })
        .collect();
    let pass = maxima[2] < 0.1 && strictly_decreasing(&maxima) && start.elapsed().as_secs() < 1800;
    let detail = format!("max modulus over 0 < |s| ≤ 2 per eps {}", sci(&maxima));
    report(8, "equidistribution", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_quasi_invariance() {
    let start = Instant::now();
    let m = SWEEP_M;
    let u0 = gaussian(3.0, m, 1, 0, SWEEP_AMPLITUDE);
    let spec = PerturbationSpec::double_antiderivative();
    let sups: Vec<f64> = SWEEP
        .iter()
        .map(|&eps| {
            let tr = galerkin_evolve(&u0, m, &EvolveParams::slow(eps, 1.0), &spec, 0.01).unwrap();
            quasi_invariance_rate(&tr, m, 1, eps, &spec)
                .unwrap()
                .iter()
                .map(|r| r.rate.abs())
                .fold(0.0, f64::max)
        })
        .collect();
    // ε⁻¹ growth would spread the sweep by a factor 100
    let lo = sups.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sups.iter().copied().fold(0.0, f64::max);
    let spread = hi / lo;

    let ham = PerturbationSpec::derivative();
    let tr = galerkin_evolve(&u0, m, &EvolveParams::slow(1e-2, 0.1), &ham, 0.01).unwrap();
    let div_zero = quasi_invariance_rate(&tr, m, 1, 1e-2, &ham).unwrap().iter().all(|r| r.divergence == 0.0);

    let pass = spread <= 10.0 && div_zero && start.elapsed().as_secs() < 600;
    let detail = format!("sup|r| per eps {} (spread {spread:.3}); Hamiltonian divergence exactly 0: {div_zero}", sci(&sups));
    report(9, "quasi-invariance mechanism", pass, &detail, start);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_galerkin_convergence() {
    let start = Instant::now();
    let u0 = gaussian(4.0, 64, 7, 0, 0.1);
    let spec = PerturbationSpec::double_antiderivative();
    let params = EvolveParams::slow(1e-2, 0.1).with_dt(2.5e-4);
    let run_m = |m: usize| galerkin_evolve(&project(&u0, m).resized(m), m, &params, &spec, 0.005).unwrap();
    let runs: Vec<Trajectory> = [8, 16, 32, 64].iter().map(|&m| run_m(m)).collect();
    let sups: Vec<f64> = runs
        .windows(2)
        .map(|w| {
            w[0].fields()
                .zip(w[1].fields())
                .map(|(a, b)| {
                    let mut d = b.clone();
                    d.axpy(-1.0, &a.resized(b.m_max()));
                    d.sobolev_norm(3.0)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let pass = strictly_decreasing(&sups) && start.elapsed().as_secs() < 600;
    let detail = format!("sup ||u^m - u^2m||_3 for m = 8, 16, 32: {}", sci(&sups));
    report(10, "Galerkin convergence", pass, &detail, start);
    assert!(pass, "{detail}");
}

fn small_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.seed = 17;
    c.initial.m = 8;
    c.run.eps = vec![0.1, 0.05];
    c.run.tau_end = 0.1;
    c.run.stride = 0.02;
    c.averaging.estimate.samples = 32;
    c.averaging.estimate.t_avg = 0.2;
    c.weyl.members = 4;
    c.weyl.stride = 0.02;
    c.quasi_invariance.stride = 0.02;
    c.convergence.ms = vec![4, 8];
    c.convergence.tau_end = 0.02;
    c.spectrum.gaps = 4;
    if kind == ExperimentKind::Simulate {
        c.run.eps = vec![0.0, 0.1];
    }
    c
}

fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_11_determinism() {
    let start = Instant::now();
    let kinds = [
        ExperimentKind::Simulate,
        ExperimentKind::Spectrum,
        ExperimentKind::Average,
        ExperimentKind::TheoremI,
        ExperimentKind::TheoremIi,
        ExperimentKind::QuasiInvariance,
        ExperimentKind::GalerkinConvergence,
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for kind in kinds {
        let cfg = small_config(kind);
        let snaps: Vec<_> = [1, 2, 3]
            .iter()
            .map(|&jobs| {
                let dir = tempfile::tempdir().unwrap();
                run(
                    &cfg,
                    &RunOptions {
                        out: Some(dir.path().to_path_buf()),
                        force: false,
                        jobs: Some(jobs),
                    },
                )
                .unwrap();
                snapshot(dir.path())
            })
            .collect();
        files += snaps[0].len();
        if snaps.iter().any(|s| s != &snaps[0]) {
            mismatched.push(kind.name());
        }
    }
    // the zero-field spectrum is part of the same contract
    let mut zero = small_config(ExperimentKind::Spectrum);
    zero.initial.source = InitialSource::Zero;
    let dir = tempfile::tempdir().unwrap();
    run(&zero, &RunOptions { out: Some(dir.path().into()), ..Default::default() }).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let zero_ok = csv.lines().skip(2).all(|l| l.ends_with(",0,0"));

    let pass = mismatched.is_empty() && zero_ok && start.elapsed().as_secs() < 300;
    let detail = format!(
        "{files} artifacts per run over {} experiments, jobs 1/2/3; differing: {mismatched:?}",
        kinds.len()
    );
    report(11, "determinism", pass, &detail, start);
    assert!(pass, "{detail}");
}

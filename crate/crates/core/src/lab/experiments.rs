use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{
    compare, estimate_averaged_field, quasi_invariance_rate, resonance_occupation, solve_averaged, weyl_report,
    AveragedField, CompareParams, RateEstimate, ResonanceZone, WeylReport,
};
use crate::dynamics::{evolve, galerkin_evolve, DynamicsError, PerturbationSpec, Trajectory};
use crate::hill::{actions, actions_with_spectrum};
use crate::measures::conservation_functional;
use crate::spectral::{project, Field};

use super::{Artifacts, ExperimentConfig, ExperimentKind, FieldModel, LabError};

pub(super) fn execute(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    match cfg.experiment {
        ExperimentKind::Simulate => simulate(cfg, art),
        ExperimentKind::Spectrum => spectrum(cfg, art),
        ExperimentKind::Average => average(cfg, art),
        ExperimentKind::TheoremI => theorem_i(cfg, art),
        ExperimentKind::TheoremIi => theorem_ii(cfg, art),
        ExperimentKind::QuasiInvariance => quasi_invariance(cfg, art),
        ExperimentKind::GalerkinConvergence => galerkin_convergence(cfg, art),
    }
}

/// Saves the samples computed before a failed integration.
fn keep_partial(art: &mut Artifacts, name: &str, e: DynamicsError) -> LabError {
    if let Some(p) = e.partial() {
        if let Err(io) = art.write_trajectory(name, p) {
            log::warn!("could not save partial trajectory {name}: {io}");
        }
    }
    e.into()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[derive(Serialize)]
struct SimulateRow {
    eps: f64,
    samples: usize,
    clock_end: f64,
    /// `𝒥_0, 𝒥_1, 𝒥_2` at the first and last sample.
    conserved_start: Vec<f64>,
    conserved_end: Vec<f64>,
    actions_start: Vec<f64>,
    actions_end: Vec<f64>,
}

fn conserved(u: &Field) -> Result<Vec<f64>, LabError> {
    (0..=2).map(|n| Ok(conservation_functional(u, n)?)).collect()
}

fn simulate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    let u0 = cfg.initial.field(cfg.seed, 0)?;
    let spec = cfg.perturbation.spec()?;
    let k = cfg.averaging.k_max;
    let mut rows = Vec::new();
    for (i, &eps) in cfg.run.eps.iter().enumerate() {
        let name = format!("trajectory_{i}");
        let params = cfg.run.params(eps, cfg.run.tau_end);
        let traj = evolve(&u0, &params, &spec, cfg.run.stride).map_err(|e| keep_partial(art, &name, e))?;
        art.write_trajectory(&name, &traj)?;
        let (_, first) = traj.first();
        let (end, last) = traj.last();
        rows.push(SimulateRow {
            eps,
            samples: traj.len(),
            clock_end: end,
            conserved_start: conserved(first)?,
            conserved_end: conserved(last)?,
            actions_start: actions(first, k)?.entries().to_vec(),
            actions_end: actions(last, k)?.entries().to_vec(),
        });
    }
    art.write_json("simulate.json", &rows)
}

#[derive(Serialize)]
struct SpectrumReport {
    ground: f64,
    lambdas: Vec<f64>,
    gaps: Vec<f64>,
    actions: Vec<f64>,
}

fn spectrum(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    let u = cfg.initial.field(cfg.seed, 0)?;
    let n = cfg.spectrum.gaps;
    let (acts, spec) = actions_with_spectrum(&u, n)?;
    // closed gaps are reported as exactly zero
    let gaps: Vec<f64> = (1..=n)
        .map(|j| if spec.is_closed(j) { 0.0 } else { spec.gap_length(j) })
        .collect();
    let rows: Vec<String> = (1..=n)
        .map(|j| {
            let (lo, hi) = spec.gap(j);
            format!("{j},{lo},{hi},{},{}", gaps[j - 1], acts.get(j))
        })
        .collect();
    art.write_csv("spectrum.csv", "j,lambda_lo,lambda_hi,gamma,action", &rows)?;
    art.write_json(
        "spectrum.json",
        &SpectrumReport {
            ground: spec.ground(),
            lambdas: spec.lambdas().to_vec(),
            gaps,
            actions: acts.entries().to_vec(),
        },
    )
}

#[derive(Serialize)]
struct AverageReport {
    actions: Vec<f64>,
    estimate: RateEstimate,
    error_bars: Vec<f64>,
    /// First-order prediction where one is known in closed form.
    linear_order: Option<Vec<f64>>,
    /// Whether the estimate lies within two error bars of that prediction.
    consistent_with_linear_order: Option<bool>,
}

fn average(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    let u = cfg.initial.field(cfg.seed, 0)?;
    let spec = cfg.perturbation.spec()?;
    let k = cfg.averaging.k_max;
    let acts = actions(&u, k)?.entries().to_vec();
    let est = estimate_averaged_field(&u, k, &spec, &cfg.averaging.estimate)?;
    let linear = match AveragedField::linear_order(&spec, k) {
        Some(mut f) => Some(f.rates(&acts)?),
        None => None,
    };
    let rows: Vec<String> = (1..=k)
        .map(|j| {
            let lin = linear.as_ref().map(|l| l[j - 1].to_string()).unwrap_or_default();
            format!("{j},{},{},{},{lin}", acts[j - 1], est.mean[j - 1], est.error_bar(j))
        })
        .collect();
    art.write_csv("average.csv", "k,I,F_mean,F_error,F_linear", &rows)?;
    let report = AverageReport {
        actions: acts,
        error_bars: (1..=k).map(|j| est.error_bar(j)).collect(),
        consistent_with_linear_order: linear.as_ref().map(|l| est.consistent_with(l, 2.0)),
        linear_order: linear,
        estimate: est,
    };
    art.write_json("average.json", &report)
}

fn averaged_field(cfg: &ExperimentConfig, u0: &Field, spec: &PerturbationSpec) -> Result<AveragedField, LabError> {
    let k = cfg.averaging.k_max;
    let estimated = || AveragedField::estimated(u0, spec, k, cfg.averaging.estimate.clone());
    Ok(match cfg.averaging.field {
        FieldModel::Zero => AveragedField::zero(k),
        FieldModel::Estimated => estimated(),
        FieldModel::Linear => AveragedField::linear_order(spec, k).ok_or_else(|| {
            LabError::Config(format!("no closed-form averaged field for {:?}", spec.kind))
        })?,
        FieldModel::Auto => AveragedField::linear_order(spec, k).unwrap_or_else(estimated),
    })
}

#[derive(Serialize)]
struct SweepRow {
    eps: f64,
    rho_observed: f64,
    pass: bool,
    stop_time: f64,
}

#[derive(Serialize)]
struct TheoremIReport {
    field: String,
    j0: Vec<f64>,
    q: f64,
    rho: f64,
    sweep: Vec<SweepRow>,
    /// `rho_observed` strictly decreasing along the sweep as listed.
    rho_decreasing: bool,
}

fn theorem_i(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    let u0 = cfg.initial.field(cfg.seed, 0)?;
    let spec = cfg.perturbation.spec()?;
    let avg = &cfg.averaging;
    let i0 = actions(&u0, avg.k_max)?.entries().to_vec();
    let j0: Vec<f64> = i0.iter().map(|v| v * (1.0 + avg.delta)).collect();
    let mut field = averaged_field(cfg, &u0, &spec)?;
    let radius = avg.ball_radius.unwrap_or(f64::INFINITY);
    let sol = solve_averaged(&j0, cfg.run.tau_end, &mut field, avg.p, radius)?;
    let rows: Vec<String> = sol
        .taus
        .iter()
        .zip(&sol.values)
        .flat_map(|(t, v)| v.iter().enumerate().map(move |(k, j)| format!("{t},{},{j}", k + 1)))
        .collect();
    art.write_csv("averaged.csv", "tau,k,J", &rows)?;
    // the residuals re-evaluate the field at every sample
    let closed_form = field.label() != "estimated";
    let params = CompareParams { q: avg.q, rho: avg.rho };
    let mut sweep = Vec::new();
    for (i, &eps) in cfg.run.eps.iter().enumerate() {
        let name = format!("trajectory_{i}");
        let traj = evolve(&u0, &cfg.run.params(eps, cfg.run.tau_end), &spec, cfg.run.stride)
            .map_err(|e| keep_partial(art, &name, e))?;
        art.write_trajectory(&name, &traj)?;
        let rep = compare(&traj, &sol, closed_form.then_some(&mut field), &params)?;
        log::info!("eps = {eps}: rho_observed = {:.3e}", rep.rho_observed);
        let path = art.dir().join(format!("comparison_{i}.csv"));
        rep.write_csv(&path)?;
        prepend_provenance(art, &format!("comparison_{i}.csv"))?;
        art.write_json(&format!("comparison_{i}.json"), &rep)?;
        sweep.push(SweepRow {
            eps,
            rho_observed: rep.rho_observed,
            pass: rep.pass,
            stop_time: rep.stop_time,
        });
    }
    let rhos: Vec<f64> = sweep.iter().map(|r| r.rho_observed).collect();
    art.write_json(
        "theorem_i.json",
        &TheoremIReport {
            field: field.label().to_string(),
            j0,
            q: avg.q,
            rho: avg.rho,
            rho_decreasing: strictly_decreasing(&rhos),
            sweep,
        },
    )
}

/// Adds the provenance line to a CSV written by a module and records it.
fn prepend_provenance(art: &mut Artifacts, name: &str) -> Result<(), LabError> {
    let path = art.dir().join(name);
    let body = std::fs::read_to_string(&path)?;
    let mut lines = body.lines();
    let header = lines.next().unwrap_or_default().to_string();
    let rows: Vec<String> = lines.map(str::to_string).collect();
    art.write_csv(name, &header, &rows)
}

#[derive(Serialize)]
struct WeylRow {
    eps: f64,
    max_modulus: f64,
    /// Mean fraction of samples in the resonance zone, when measured.
    occupation: Option<f64>,
}

#[derive(Serialize)]
struct TheoremIiReport {
    members: usize,
    angles: usize,
    order: usize,
    sweep: Vec<WeylRow>,
    max_modulus_decreasing: bool,
}

fn ensemble(cfg: &ExperimentConfig, eps: f64, spec: &PerturbationSpec) -> Result<Vec<Trajectory>, LabError> {
    let params = cfg.run.params(eps, cfg.run.tau_end);
    (0..cfg.weyl.members as u64)
        .into_par_iter()
        .map(|i| {
            let u = cfg.initial.field(cfg.seed, i)?;
            Ok(evolve(&u, &params, spec, cfg.weyl.stride)?)
        })
        .collect()
}

fn theorem_ii(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    let spec = cfg.perturbation.spec()?;
    let w = &cfg.weyl;
    let mut sweep = Vec::new();
    for (i, &eps) in cfg.run.eps.iter().enumerate() {
        let members = ensemble(cfg, eps, &spec)?;
        let rep: WeylReport = weyl_report(&members, w.angles, w.order);
        let occupation = if w.resonance {
            let zone = ResonanceZone::new(w.angles, w.resonance_order, w.alpha, eps);
            let fractions: Vec<f64> = members
                .par_iter()
                .map(|t| Ok(resonance_occupation(t, &zone)?.fraction))
                .collect::<Result<_, LabError>>()?;
            Some(fractions.iter().sum::<f64>() / fractions.len() as f64)
        } else {
            None
        };
        log::info!("eps = {eps}: max |weyl| = {:.3e}", rep.max_modulus());
        let rows: Vec<String> = rep
            .statistics
            .iter()
            .map(|s| {
                let key: Vec<String> = s.s.iter().map(|v| v.to_string()).collect();
                format!("{},{},{},{}", key.join(" "), s.re, s.im, s.modulus())
            })
            .collect();
        art.write_csv(&format!("weyl_{i}.csv"), "s,re,im,modulus", &rows)?;
        art.write_json(&format!("weyl_{i}.json"), &rep)?;
        sweep.push(WeylRow {
            eps,
            max_modulus: rep.max_modulus(),
            occupation,
        });
    }
    let moduli: Vec<f64> = sweep.iter().map(|r| r.max_modulus).collect();
    art.write_json(
        "theorem_ii.json",
        &TheoremIiReport {
            members: w.members,
            angles: w.angles,
            order: w.order,
            max_modulus_decreasing: strictly_decreasing(&moduli),
            sweep,
        },
    )
}

#[derive(Serialize)]
struct RateRow {
    eps: f64,
    sup_abs_rate: f64,
    sup_abs_drift: f64,
    sup_abs_divergence: f64,
    sup_abs_forcing: f64,
}

#[derive(Serialize)]
struct QuasiInvarianceReport {
    m: usize,
    p: usize,
    sweep: Vec<RateRow>,
    /// Largest over smallest `sup|r|` along the sweep.
    spread: f64,
}

fn quasi_invariance(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    let spec = cfg.perturbation.spec()?;
    let m = cfg.initial.m;
    let u0 = cfg.initial.field(cfg.seed, 0)?.resized(m);
    let p = cfg.quasi_invariance.p;
    let mut sweep = Vec::new();
    for (i, &eps) in cfg.run.eps.iter().enumerate() {
        let name = format!("trajectory_{i}");
        let traj = galerkin_evolve(&u0, m, &cfg.run.params(eps, cfg.run.tau_end), &spec, cfg.quasi_invariance.stride)
            .map_err(|e| keep_partial(art, &name, e))?;
        let series = quasi_invariance_rate(&traj, m, p, eps, &spec)?;
        let rows: Vec<String> = series
            .iter()
            .map(|s| format!("{},{},{},{},{}", s.tau, s.divergence, s.drift, s.forcing, s.rate))
            .collect();
        art.write_csv(&format!("rate_{i}.csv"), "tau,divergence,drift,forcing,r", &rows)?;
        let sup = |f: fn(&crate::averaging::RateSample) -> f64| series.iter().map(|s| f(s).abs()).fold(0.0, f64::max);
        sweep.push(RateRow {
            eps,
            sup_abs_rate: sup(|s| s.rate),
            sup_abs_drift: sup(|s| s.drift),
            sup_abs_divergence: sup(|s| s.divergence),
            sup_abs_forcing: sup(|s| s.forcing),
        });
    }
    let sups: Vec<f64> = sweep.iter().map(|r| r.sup_abs_rate).collect();
    let lo = sups.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sups.iter().copied().fold(0.0, f64::max);
    let spread = if lo > 0.0 { hi / lo } else if hi == 0.0 { 1.0 } else { f64::INFINITY };
    art.write_json("quasi_invariance.json", &QuasiInvarianceReport { m, p, sweep, spread })
}

#[derive(Serialize)]
struct ConvergenceRow {
    m: usize,
    /// `sup_τ ||u^m - u^{2m}||` over the common samples.
    sup_difference: f64,
}

#[derive(Serialize)]
struct ConvergenceReport {
    eps: f64,
    tau_end: f64,
    norm_order: f64,
    rows: Vec<ConvergenceRow>,
    decreasing: bool,
}

fn galerkin_convergence(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), LabError> {
    let spec = cfg.perturbation.spec()?;
    let c = &cfg.convergence;
    let u0 = cfg.initial.field(cfg.seed, 0)?;
    let mut dims: Vec<usize> = c.ms.iter().flat_map(|&m| [m, 2 * m]).collect();
    dims.sort_unstable();
    dims.dedup();
    let params = cfg.run.params(c.eps, c.tau_end);
    let runs: Vec<(usize, Trajectory)> = dims
        .par_iter()
        .map(|&m| {
            let start = project(&u0, m).resized(m);
            Ok((m, galerkin_evolve(&start, m, &params, &spec, c.stride)?))
        })
        .collect::<Result<_, LabError>>()?;
    let get = |m: usize| &runs.iter().find(|r| r.0 == m).expect("dimension computed").1;
    let rows: Vec<ConvergenceRow> = c
        .ms
        .iter()
        .map(|&m| {
            let sup = get(m)
                .fields()
                .zip(get(2 * m).fields())
                .map(|(a, b)| {
                    let mut d = b.clone();
                    d.axpy(-1.0, &a.resized(b.m_max()));
                    d.sobolev_norm(c.norm_order)
                })
                .fold(0.0, f64::max);
            ConvergenceRow { m, sup_difference: sup }
        })
        .collect();
    let csv: Vec<String> = rows.iter().map(|r| format!("{},{}", r.m, r.sup_difference)).collect();
    art.write_csv("convergence.csv", "m,sup_difference", &csv)?;
    let sups: Vec<f64> = rows.iter().map(|r| r.sup_difference).collect();
    art.write_json(
        "galerkin_convergence.json",
        &ConvergenceReport {
            eps: c.eps,
            tau_end: c.tau_end,
            norm_order: c.norm_order,
            decreasing: strictly_decreasing(&sups),
            rows,
        },
    )
}

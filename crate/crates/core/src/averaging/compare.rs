//! Actions of a perturbed trajectory against a solution of the averaged
//! equation.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::hill::actions;
use crate::spectral::weighted_l1;

use super::rates::AveragedField;
use super::solve::AveragedSolution;
use super::AveragingError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareParams {
    /// Weight exponent of the action distance `|·|~_q`.
    pub q: f64,
    /// Threshold for the pass flag.
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub q: f64,
    pub rho: f64,
    /// `sup_τ |I(v^ε(τ)) - J(τ)|~_q` over samples up to the stop time.
    pub rho_observed: f64,
    pub pass: bool,
    pub stop_time: f64,
    pub tau_end: f64,
    pub epsilon: f64,
    pub taus: Vec<f64>,
    /// `I_k` per sample.
    pub actions: Vec<Vec<f64>>,
    /// `J_k` per sample.
    pub averaged: Vec<Vec<f64>>,
    /// `|I - J|~_q` per sample.
    pub deviation: Vec<f64>,
    /// `Ξ_k(τ) = I_k(τ) - I_k(0) - ∫₀^τ ⟨F_k⟩(I(s)) ds`, when an averaged
    /// field was supplied.
    pub residuals: Option<Vec<Vec<f64>>>,
}

/// Compares the gap actions along `traj` with `averaged` on the trajectory
/// samples up to the averaged solution's stop time. With `field`, also
/// forms the residuals `Ξ_k` by trapezoidal quadrature.
pub fn compare(
    traj: &Trajectory,
    averaged: &AveragedSolution,
    field: Option<&mut AveragedField>,
    params: &CompareParams,
) -> Result<ComparisonReport, AveragingError> {
    let k_max = averaged.k_max();
    let end = averaged.stop_time.min(*averaged.taus.last().unwrap());
    let samples: Vec<(f64, &crate::spectral::Field)> = traj
        .samples()
        .iter()
        .filter(|(t, _)| *t <= end * (1.0 + 1e-12) + 1e-15)
        .map(|(t, u)| (*t, u))
        .collect();
    if samples.is_empty() {
        return Err(AveragingError::InvalidInput("no trajectory samples before the stop time".into()));
    }
    let acts: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|(_, u)| actions(u, k_max).map(|a| a.entries().to_vec()))
        .collect::<Result<_, _>>()?;
    let taus: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();
    let mut js = Vec::with_capacity(taus.len());
    let mut deviation = Vec::with_capacity(taus.len());
    for (t, i) in taus.iter().zip(&acts) {
        let j = averaged.at(*t).ok_or_else(|| {
            AveragingError::InvalidInput(format!("averaged solution does not cover tau = {t}"))
        })?;
        let d: Vec<f64> = i.iter().zip(&j).map(|(a, b)| a - b).collect();
        deviation.push(weighted_l1(&d, params.q));
        js.push(j);
    }
    let residuals = match field {
        None => None,
        Some(f) => {
            let rates: Vec<Vec<f64>> = acts.iter().map(|i| f.rates(i)).collect::<Result<_, _>>()?;
            let mut integral = vec![0.0; k_max];
            let mut out = vec![vec![0.0; k_max]];
            for n in 1..taus.len() {
                let h = taus[n] - taus[n - 1];
                for k in 0..k_max {
                    integral[k] += 0.5 * h * (rates[n - 1][k] + rates[n][k]);
                }
                out.push((0..k_max).map(|k| acts[n][k] - acts[0][k] - integral[k]).collect());
            }
            Some(out)
        }
    };
    let rho_observed = deviation.iter().copied().fold(0.0, f64::max);
    Ok(ComparisonReport {
        q: params.q,
        rho: params.rho,
        rho_observed,
        pass: rho_observed <= params.rho,
        stop_time: averaged.stop_time,
        tau_end: averaged.tau_end,
        epsilon: traj.params.eps,
        taus,
        actions: acts,
        averaged: js,
        deviation,
        residuals,
    })
}

impl ComparisonReport {
    /// Long-form series: one row per sample and tracked action.
    pub fn write_csv(&self, path: &Path) -> Result<(), AveragingError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "tau,k,I,J,Xi")?;
        for (n, t) in self.taus.iter().enumerate() {
            for k in 0..self.actions[n].len() {
                let xi = self.residuals.as_ref().map(|r| r[n][k].to_string()).unwrap_or_default();
                writeln!(out, "{t},{},{},{},{xi}", k + 1, self.actions[n][k], self.averaged[n][k])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::solve_averaged;
    use crate::dynamics::{evolve, EvolveParams, PerturbationSpec};
    use crate::spectral::Field;

    #[test]
    fn unperturbed_flow_against_frozen_actions() {
        let u0 = Field::from_pairs(vec![[0.01, -0.004], [0.002, 0.001], [0.0005, 0.0], [0.0, 1e-4]]).unwrap();
        let traj = evolve(&u0, &EvolveParams::fast(0.0, 0.05).with_dt(2.5e-4), &PerturbationSpec::none(), 0.01)
            .unwrap();
        let i0 = actions(&u0, 2).unwrap().entries().to_vec();
        let mut f = AveragedField::zero(2);
        let sol = solve_averaged(&i0, 0.05, &mut f, 0.0, f64::INFINITY).unwrap();
        let rep = compare(&traj, &sol, Some(&mut f), &CompareParams { q: 0.0, rho: 1.0 }).unwrap();
        assert_eq!(rep.taus.len(), 6);
        assert_eq!(rep.deviation[0], 0.0);
        let scale = crate::spectral::weighted_l1(&i0, 0.0);
        assert!(rep.rho_observed <= 1e-6 * scale, "{} vs {scale}", rep.rho_observed);
        assert!(rep.pass);
        assert_eq!(rep.residuals.as_ref().unwrap()[0], vec![0.0, 0.0]);
    }
}

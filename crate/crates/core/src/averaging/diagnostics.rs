//! Resonance-zone occupation and the volume growth rate of the truncated
//! flow.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PerturbationSpec, Trajectory};
use crate::hill::{actions, estimate_frequencies};
use crate::measures::galerkin_drift;
use crate::spectral::{airy_frequency, project, Field};

use super::weyl::lattice_ball;
use super::AveragingError;

/// First `L` with `0 < |L|₁ ≤ n`, supported on open gaps, and
/// `|W·L| ≤ tol`, with the value `|W·L|`.
pub(crate) fn resonant_combination(
    w: &[f64],
    open: &[bool],
    n: usize,
    tol: f64,
) -> Option<(Vec<i32>, f64)> {
    lattice_ball(w.len(), n)
        .into_iter()
        .filter(|l| l.iter().zip(open).all(|(&v, &o)| v == 0 || o))
        .map(|l| {
            let v = l.iter().zip(w).map(|(&a, b)| a as f64 * b).sum::<f64>().abs();
            (l, v)
        })
        .find(|(_, v)| *v <= tol)
}

/// The zone `Υ_{m,n}(ε)`: some `I_k < c_k ε^α` (`k ≤ m`), or `|W·L| < c_W ε^α`
/// for some `0 < |L|₁ ≤ n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceZone {
    pub m: usize,
    pub n: usize,
    /// Exponent, `0 < α < 1/4`.
    pub alpha: f64,
    pub eps: f64,
    /// Action scales `c_k`; `None` takes the actions of the first sample.
    #[serde(default)]
    pub action_scale: Option<Vec<f64>>,
    /// Frequency scale `c_W`; `None` takes `κ₁ = (2π)³`.
    #[serde(default)]
    pub frequency_scale: Option<f64>,
    /// Fast-time horizon of each frequency estimate; `None` takes eight
    /// periods of mode 1.
    #[serde(default)]
    pub frequency_horizon: Option<f64>,
}

impl ResonanceZone {
    pub fn new(m: usize, n: usize, alpha: f64, eps: f64) -> Self {
        Self {
            m,
            n,
            alpha,
            eps,
            action_scale: None,
            frequency_scale: None,
            frequency_horizon: None,
        }
    }

    pub fn validate(&self) -> Result<(), AveragingError> {
        if !(self.alpha > 0.0 && self.alpha < 0.25) {
            return Err(AveragingError::InvalidInput(format!(
                "alpha = {} must lie in (0, 1/4)",
                self.alpha
            )));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(AveragingError::InvalidInput("eps must lie in (0, 1]".into()));
        }
        if self.m == 0 {
            return Err(AveragingError::InvalidInput("m must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationReport {
    pub fraction: f64,
    pub taus: Vec<f64>,
    pub small_action: Vec<bool>,
    pub resonant: Vec<bool>,
}

/// Fraction of the samples with `τ ≤ 1` whose state lies in `zone`.
pub fn resonance_occupation(
    traj: &Trajectory,
    zone: &ResonanceZone,
) -> Result<OccupationReport, AveragingError> {
    zone.validate()?;
    let m = zone.m;
    let threshold = zone.eps.powf(zone.alpha);
    let samples: Vec<&(f64, Field)> = traj.samples().iter().filter(|(t, _)| *t <= 1.0 + 1e-12).collect();
    let first_actions = actions(&samples[0].1, m)?.entries().to_vec();
    let scales = zone.action_scale.clone().unwrap_or(first_actions);
    if scales.len() != m {
        return Err(AveragingError::InvalidInput("action_scale needs m entries".into()));
    }
    let c_w = zone.frequency_scale.unwrap_or_else(|| airy_frequency(1));
    let horizon = zone.frequency_horizon.unwrap_or(8.0 * std::f64::consts::TAU / airy_frequency(1));
    let flags: Vec<(bool, bool)> = samples
        .par_iter()
        .map(|(_, u)| -> Result<(bool, bool), AveragingError> {
            let acts = actions(u, m)?;
            let small = acts.entries().iter().zip(&scales).any(|(i, c)| *i <= c * threshold);
            if small {
                return Ok((true, false));
            }
            let w = estimate_frequencies(u, m, horizon)?;
            let open = vec![true; m];
            let res = resonant_combination(&w, &open, zone.n, c_w * threshold).is_some();
            Ok((false, res))
        })
        .collect::<Result<_, _>>()?;
    let hits = flags.iter().filter(|(a, b)| *a || *b).count();
    Ok(OccupationReport {
        fraction: hits as f64 / flags.len() as f64,
        taus: samples.iter().map(|(t, _)| *t).collect(),
        small_action: flags.iter().map(|f| f.0).collect(),
        resonant: flags.iter().map(|f| f.1).collect(),
    })
}

/// One sample of the logarithmic volume growth rate of the truncated flow
/// with respect to `e^{-𝒥_{p+1}} d(Lebesgue)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub tau: f64,
    /// `Σ ∂f_i/∂û_i` over the retained modes.
    pub divergence: f64,
    /// `ε⁻¹ℰ_{p+1}`, the drift of `𝒥_{p+1}` from the truncated nonlinearity.
    pub drift: f64,
    /// `ℰ^f_{p+1}`, the drift of `𝒥_{p+1}` from the perturbation.
    pub forcing: f64,
    /// `divergence - drift - forcing`.
    pub rate: f64,
}

/// Rate series along a trajectory of the `m`-mode system in slow time.
pub fn quasi_invariance_rate(
    traj: &Trajectory,
    m: usize,
    p: usize,
    eps: f64,
    spec: &PerturbationSpec,
) -> Result<Vec<RateSample>, AveragingError> {
    if traj.m_max() != m {
        return Err(AveragingError::InvalidInput(format!(
            "trajectory has {} modes, expected {m}",
            traj.m_max()
        )));
    }
    if !(eps > 0.0) {
        return Err(AveragingError::InvalidInput("the slow-time rate needs eps > 0".into()));
    }
    traj.samples()
        .par_iter()
        .map(|(tau, u)| {
            let um = project(u, m).resized(m);
            let (e, ef) = galerkin_drift(&um, m, p + 1, spec)?;
            let divergence = spec.divergence(&um, m);
            let drift = e / eps;
            Ok(RateSample {
                tau: *tau,
                divergence,
                drift,
                forcing: ef,
                rate: divergence - drift - ef,
            })
        })
        .collect()
}

/// `tau,divergence,drift,forcing,r` per sample.
pub fn write_rate_csv(series: &[RateSample], path: &Path) -> Result<(), AveragingError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "tau,divergence,drift,forcing,r")?;
    for s in series {
        writeln!(out, "{},{},{},{},{}", s.tau, s.divergence, s.drift, s.forcing, s.rate)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{galerkin_evolve, EvolveParams};

    #[test]
    fn zero_trajectory_sits_in_the_zone() {
        let mut tr = Trajectory::new(EvolveParams::slow(0.01, 1.0), PerturbationSpec::none());
        for i in 0..=4 {
            tr.push(i as f64 * 0.25, Field::zeros(4));
        }
        let rep = resonance_occupation(&tr, &ResonanceZone::new(2, 2, 0.2, 0.01)).unwrap();
        assert_eq!(rep.fraction, 1.0);
    }

    #[test]
    fn closed_first_gap_sits_in_the_zone() {
        let u = Field::from_pairs(vec![[0.0, 0.0], [0.003, 0.001], [0.0, 0.0], [0.0005, 0.0]]).unwrap();
        let tr = crate::dynamics::evolve(&u, &EvolveParams::fast(0.0, 0.02), &PerturbationSpec::none(), 0.01)
            .unwrap();
        let rep = resonance_occupation(&tr, &ResonanceZone::new(2, 2, 0.2, 0.01)).unwrap();
        assert_eq!(rep.fraction, 1.0);
        assert!(rep.small_action.iter().all(|&b| b));
    }

    #[test]
    fn alpha_must_be_below_a_quarter() {
        let tr = {
            let mut t = Trajectory::new(EvolveParams::slow(0.01, 1.0), PerturbationSpec::none());
            t.push(0.0, Field::zeros(2));
            t
        };
        let err = resonance_occupation(&tr, &ResonanceZone::new(2, 2, 0.3, 0.01)).unwrap_err();
        assert!(err.to_string().contains("1/4"));
    }

    #[test]
    fn resonance_screen() {
        let w = [1.0, 2.0, 3.5];
        assert_eq!(resonant_combination(&w, &[true; 3], 2, 1e-9).map(|r| r.0), None);
        // 2W₁ - W₂ = 0
        assert_eq!(resonant_combination(&w, &[true; 3], 3, 1e-9).map(|r| r.0), Some(vec![-2, 1, 0]));
        assert_eq!(resonant_combination(&w, &[false, true, true], 3, 1e-9).map(|r| r.0), None);
    }

    #[test]
    fn zero_state_has_zero_rate() {
        let spec = PerturbationSpec::derivative();
        let tr = galerkin_evolve(&Field::zeros(6), 6, &EvolveParams::slow(0.1, 0.02), &spec, 0.01).unwrap();
        for r in quasi_invariance_rate(&tr, 6, 1, 0.1, &spec).unwrap() {
            assert_eq!(r.rate, 0.0);
            assert_eq!(r.divergence, 0.0);
        }
    }
}

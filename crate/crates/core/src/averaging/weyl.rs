//! Time-then-ensemble averages of `e^{i s·φ}` over the linearised phases.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::spectral::{airy_frequency, polar_angle};

/// Nonzero integer vectors of length `m` with `|s|₁ ≤ n`, in lexicographic
/// order.
pub(crate) fn lattice_ball(m: usize, n: usize) -> Vec<Vec<i32>> {
    fn rec(prefix: &mut Vec<i32>, m: usize, budget: i32, out: &mut Vec<Vec<i32>>) {
        if prefix.len() == m {
            if prefix.iter().any(|&v| v != 0) {
                out.push(prefix.clone());
            }
            return;
        }
        for v in -budget..=budget {
            prefix.push(v);
            rec(prefix, m, budget - v.abs(), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), m, n as i32, &mut out);
    out
}

fn is_canonical(s: &[i32]) -> bool {
    s.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

/// Unwraps raw phases sampled at `times`, taking the branch of each
/// increment closest to `rate·Δt`.
fn unwrap_along(raw: &[f64], times: &[f64], rate: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut acc = raw[0];
    out.push(acc);
    for i in 1..raw.len() {
        let predicted = rate * (times[i] - times[i - 1]);
        let d = raw[i] - raw[i - 1] - predicted;
        let tau = std::f64::consts::TAU;
        acc += predicted + (d - tau * (d / tau).round());
        out.push(acc);
    }
    out
}

/// `(1/(τ_N - τ_0)) ∫ e^{iθ(τ)} dτ` for `θ` linear between samples, as
/// `(re, im)`.
pub fn phase_average(taus: &[f64], theta: &[f64]) -> (f64, f64) {
    assert!(taus.len() == theta.len() && taus.len() >= 2, "need at least two samples");
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..taus.len() - 1 {
        let dt = taus[i + 1] - taus[i];
        let d = theta[i + 1] - theta[i];
        // (e^{id} - 1)/(id)
        let (fr, fi) = if d.abs() < 1e-6 {
            (1.0 - d * d / 6.0, d / 2.0 - d * d * d / 24.0)
        } else {
            (d.sin() / d, (1.0 - d.cos()) / d)
        };
        let (c, s) = (theta[i].cos(), theta[i].sin());
        re += dt * (c * fr - s * fi);
        im += dt * (c * fi + s * fr);
    }
    let span = taus[taus.len() - 1] - taus[0];
    (re / span, im / span)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylStatistic {
    pub s: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

impl WeylStatistic {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    /// Number of leading angles used.
    pub m: usize,
    /// Largest `|s|₁`.
    pub n: usize,
    pub epsilon: f64,
    pub members: usize,
    /// Samples per member.
    pub counts: Vec<usize>,
    /// All `|s|₁ ≤ n` including `s = 0`, lexicographic in `s`.
    pub statistics: Vec<WeylStatistic>,
}

impl WeylReport {
    pub fn get(&self, s: &[i32]) -> Option<&WeylStatistic> {
        self.statistics.iter().find(|w| w.s == s)
    }

    /// Largest modulus over `s ≠ 0`.
    pub fn max_modulus(&self) -> f64 {
        self.statistics
            .iter()
            .filter(|w| w.s.iter().any(|&v| v != 0))
            .map(WeylStatistic::modulus)
            .fold(0.0, f64::max)
    }
}

/// Weyl statistics of an ensemble over the first `m` linearised phases.
///
/// Each phase is unwrapped along the samples with the Airy rotation
/// `-(2πk)³Δt` as predictor and treated as linear in between, so a
/// trajectory can be sampled far more coarsely than its fast rotation. The
/// nonlinear frequency shift accumulated over one sample interval must stay
/// below `π`.
pub fn weyl_report(ensemble: &[Trajectory], m: usize, n: usize) -> WeylReport {
    assert!(!ensemble.is_empty(), "empty ensemble");
    let all = lattice_ball(m, n);
    let canonical: Vec<&Vec<i32>> = all.iter().filter(|s| is_canonical(s)).collect();
    let mut sums = vec![(0.0, 0.0); canonical.len()];
    let mut counts = Vec::with_capacity(ensemble.len());
    for traj in ensemble {
        let taus: Vec<f64> = traj.taus().collect();
        let t0 = taus[0];
        let fast: Vec<f64> = taus.iter().map(|t| traj.params.to_fast(t - t0)).collect();
        counts.push(taus.len());
        let phases: Vec<Vec<f64>> = (1..=m)
            .map(|k| {
                let raw: Vec<f64> = traj.fields().map(|u| polar_angle(u.pair(k))).collect();
                unwrap_along(&raw, &fast, -airy_frequency(k))
            })
            .collect();
        for (acc, s) in sums.iter_mut().zip(&canonical) {
            let theta: Vec<f64> = (0..taus.len())
                .map(|i| s.iter().zip(&phases).map(|(&sk, ph)| sk as f64 * ph[i]).sum())
                .collect();
            let (re, im) = phase_average(&taus, &theta);
            acc.0 += re;
            acc.1 += im;
        }
    }
    let members = ensemble.len() as f64;
    let mut statistics = vec![WeylStatistic {
        s: vec![0; m],
        re: 1.0,
        im: 0.0,
    }];
    for (s, (re, im)) in canonical.iter().zip(sums) {
        let (re, im) = (re / members, im / members);
        statistics.push(WeylStatistic { s: s.to_vec(), re, im });
        statistics.push(WeylStatistic {
            s: s.iter().map(|v| -v).collect(),
            re,
            im: -im,
        });
    }
    statistics.sort_by(|a, b| a.s.cmp(&b.s));
    WeylReport {
        m,
        n,
        epsilon: ensemble[0].params.eps,
        members: ensemble.len(),
        counts,
        statistics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{airy_flow, EvolveParams, PerturbationSpec};
    use crate::spectral::Field;

    #[test]
    fn lattice_ball_counts() {
        // |s|₁ ≤ 2 in Z³ minus the origin: 1 + 6 + 18 points, less one
        assert_eq!(lattice_ball(3, 2).len(), 24);
        assert_eq!(lattice_ball(1, 3), vec![vec![-3], vec![-2], vec![-1], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn constant_phase_averages_to_itself() {
        let (re, im) = phase_average(&[0.0, 0.5, 1.0], &[0.3, 0.3, 0.3]);
        assert!((re - 0.3f64.cos()).abs() < 1e-15 && (im - 0.3f64.sin()).abs() < 1e-15);
    }

    fn rotation(t_end: f64, samples: usize) -> Trajectory {
        let u0 = Field::from_pairs(vec![[1e-3, 0.0], [0.0, 2e-4], [3e-5, 3e-5]]).unwrap();
        let mut tr = Trajectory::new(EvolveParams::fast(0.0, t_end), PerturbationSpec::none());
        for i in 0..=samples {
            let t = t_end * i as f64 / samples as f64;
            tr.push(t, airy_flow(&u0, t));
        }
        tr
    }

    #[test]
    fn pure_rotation_bound() {
        let t_end = 0.0123;
        let rep = weyl_report(&[rotation(t_end, 97)], 3, 2);
        assert_eq!(rep.get(&[0, 0, 0]).unwrap().re, 1.0);
        assert_eq!(rep.get(&[0, 0, 0]).unwrap().im, 0.0);
        for w in rep.statistics.iter().filter(|w| w.s.iter().any(|&v| v != 0)) {
            let sw: f64 = w.s.iter().enumerate().map(|(i, &v)| v as f64 * airy_frequency(i + 1)).sum();
            if sw != 0.0 {
                assert!(w.modulus() <= 2.0 / (t_end * sw.abs()) * (1.0 + 1e-9), "{:?}", w.s);
            }
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let rep = weyl_report(&[rotation(0.01, 40), rotation(0.02, 33)], 2, 3);
        for w in &rep.statistics {
            let neg: Vec<i32> = w.s.iter().map(|v| -v).collect();
            let c = rep.get(&neg).unwrap();
            assert_eq!(c.re, w.re);
            assert_eq!(c.im, -w.im);
        }
    }
}

//! The averaged equation `dJ/dτ = ⟨F⟩(J)` on the nonnegative octant.

use serde::{Deserialize, Serialize};

use crate::spectral::weighted_l1;

use super::rates::AveragedField;
use super::AveragingError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    /// Local error tolerance relative to each `|J_k|`.
    pub rtol: f64,
    /// First trial step.
    pub h_init: f64,
    /// Longest step; keeps the Hermite interpolant between steps as
    /// accurate as the steps themselves.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            h_init: 1e-2,
            h_max: 1.0 / 64.0,
            max_steps: 100_000,
        }
    }
}

/// Accepted steps of the averaged solution with the rates at each, so the
/// solution can be evaluated between steps by cubic Hermite interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedSolution {
    pub taus: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    /// First `τ` with `|J|~_p` above the ball radius, else the horizon.
    pub stop_time: f64,
    pub tau_end: f64,
}

impl AveragedSolution {
    pub fn k_max(&self) -> usize {
        self.values[0].len()
    }

    /// `J(τ)` for `τ` in the computed range, clamped to the octant.
    pub fn at(&self, tau: f64) -> Option<Vec<f64>> {
        let last = *self.taus.last()?;
        if tau < self.taus[0] || tau > last * (1.0 + 1e-12) + 1e-300 {
            return None;
        }
        let i = match self.taus.partition_point(|&t| t <= tau) {
            0 => 0,
            n => (n - 1).min(self.taus.len().saturating_sub(2)),
        };
        if self.taus.len() == 1 {
            return Some(self.values[0].clone());
        }
        let (t0, t1) = (self.taus[i], self.taus[i + 1]);
        let h = t1 - t0;
        let s = ((tau - t0) / h).clamp(0.0, 1.0);
        let (h00, h10) = (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s);
        let (h01, h11) = (-2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        Some(
            (0..self.k_max())
                .map(|k| {
                    let v = h00 * self.values[i][k]
                        + h10 * h * self.rates[i][k]
                        + h01 * self.values[i + 1][k]
                        + h11 * h * self.rates[i + 1][k];
                    v.max(0.0)
                })
                .collect(),
        )
    }
}

fn rk4(
    field: &mut AveragedField,
    y: &[f64],
    k1: &[f64],
    h: f64,
) -> Result<Vec<f64>, AveragingError> {
    let stage = |c: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    let k2 = field.rates(&stage(0.5 * h, k1))?;
    let k3 = field.rates(&stage(0.5 * h, &k2))?;
    let k4 = field.rates(&stage(h, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]))
        .collect())
}

/// [`solve_averaged_with`] at default options.
pub fn solve_averaged(
    j0: &[f64],
    tau_end: f64,
    field: &mut AveragedField,
    p: f64,
    ball_radius: f64,
) -> Result<AveragedSolution, AveragingError> {
    solve_averaged_with(j0, tau_end, field, p, ball_radius, &SolveOptions::default())
}

/// Integrates the averaged equation by classical RK4 with step doubling.
/// Entries are clamped at zero after each step; integration halts once
/// `|J|~_p` exceeds `ball_radius`.
pub fn solve_averaged_with(
    j0: &[f64],
    tau_end: f64,
    field: &mut AveragedField,
    p: f64,
    ball_radius: f64,
    opts: &SolveOptions,
) -> Result<AveragedSolution, AveragingError> {
    if j0.len() != field.k_max() {
        return Err(AveragingError::InvalidInput("initial actions do not match the field".into()));
    }
    if j0.iter().any(|v| !(*v >= 0.0)) {
        return Err(AveragingError::InvalidInput("initial actions must be nonnegative".into()));
    }
    if !(tau_end > 0.0) {
        return Err(AveragingError::InvalidInput("tau_end must be positive".into()));
    }
    let mut y = j0.to_vec();
    let mut f = field.rates(&y)?;
    let mut sol = AveragedSolution {
        taus: vec![0.0],
        values: vec![y.clone()],
        rates: vec![f.clone()],
        stop_time: tau_end,
        tau_end,
    };
    let mut norm = weighted_l1(&y, p);
    if norm > ball_radius {
        sol.stop_time = 0.0;
        return Ok(sol);
    }
    let mut tau = 0.0;
    let mut h = opts.h_init.min(tau_end);
    let mut steps = 0;
    while tau < tau_end * (1.0 - 1e-14) {
        steps += 1;
        if steps > opts.max_steps {
            return Err(AveragingError::EvaluatorFailure(format!(
                "averaged equation needed more than {} steps",
                opts.max_steps
            )));
        }
        h = h.min(opts.h_max).min(tau_end - tau);
        let full = rk4(field, &y, &f, h)?;
        let half = rk4(field, &y, &f, 0.5 * h)?;
        let f_half = field.rates(&half)?;
        let two = rk4(field, &half, &f_half, 0.5 * h)?;
        // componentwise: actions of different modes differ by many decades
        let floor = 1e-12 * y.iter().chain(&two).fold(0.0f64, |a, v| a.max(v.abs())) + 1e-300;
        let err = (0..y.len())
            .map(|i| {
                let s = y[i].abs().max(two[i].abs()).max(floor);
                (full[i] - two[i]).abs() / (15.0 * opts.rtol * s)
            })
            .fold(0.0f64, f64::max);
        if !err.is_finite() {
            return Err(AveragingError::EvaluatorFailure("non-finite averaged rates".into()));
        }
        if err <= 1.0 {
            tau += h;
            y = two
                .iter()
                .zip(&full)
                .map(|(b, a)| (b + (b - a) / 15.0).max(0.0))
                .collect();
            f = field.rates(&y)?;
            sol.taus.push(tau);
            sol.values.push(y.clone());
            sol.rates.push(f.clone());
            let new_norm = weighted_l1(&y, p);
            if new_norm > ball_radius {
                // crossing located by linear interpolation of the norm
                let frac = (ball_radius - norm) / (new_norm - norm);
                sol.stop_time = tau - h + frac.clamp(0.0, 1.0) * h;
                return Ok(sol);
            }
            norm = new_norm;
        }
        let grow = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 4.0 };
        h *= grow.clamp(0.2, 4.0);
    }
    Ok(sol)
}

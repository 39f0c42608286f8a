//! Action variables of KdV from the periodic spectrum of the Hill operator
//! `L = -d²/dx² + u`.
//!
//! The action of gap `j` is `I_j = (2/π)∫_{λ_{2j-1}}^{λ_{2j}} arccosh(|Δ(λ)|/2) dλ`,
//! which for small data reduces to the linearised value
//! `(2πj)^{-1}(û_j² + û_{-j}²)/2`. Angles are not computed from the spectrum;
//! where needed the linearised Birkhoff phases stand in for them.

mod magnus;
mod spectrum;

pub use magnus::{DiscriminantSample, HillOperator};
pub use spectrum::{HillSpectrum, CLOSED_GAP_RTOL};

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{evolve, DynamicsError, EvolveParams, PerturbationSpec};
use crate::spectral::{airy_frequency, polar_angle, ActionVector, Field};

#[derive(Debug, Error)]
pub enum HillError {
    #[error("transfer-matrix integration failed at lambda = {lambda}")]
    IntegrationFailure { lambda: f64 },
    #[error("spectrum bracketing failed: {what}")]
    RootBracketFailure { what: String },
    #[error("gap {j} is closed; its action gradient is undefined")]
    ClosedGap { j: usize },
    #[error("gradient of action {j}: formula and finite differences differ by {rel:.2e} (relative)")]
    GradientMismatch { j: usize, rel: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Variation of the discriminant integrated over the gap.
    Formula,
    /// Central differences of the action along every basis direction.
    FiniteDifference,
    /// Both, failing unless they agree to [`GRADIENT_AGREEMENT`].
    Both,
}

/// Relative agreement demanded between the two gradient methods.
pub const GRADIENT_AGREEMENT: f64 = 1e-4;

pub fn discriminant(u: &Field, lambda: f64) -> Result<DiscriminantSample, HillError> {
    HillOperator::new(u).discriminant(lambda)
}

pub fn periodic_spectrum(u: &Field, n_gaps: usize) -> Result<HillSpectrum, HillError> {
    HillOperator::new(u).spectrum(n_gaps)
}

/// Actions `I_1..=I_n` together with the spectrum they came from.
pub fn actions_with_spectrum(u: &Field, n: usize) -> Result<(ActionVector, HillSpectrum), HillError> {
    let mut op = HillOperator::new(u);
    let spec = op.spectrum(n)?;
    let mut out = Vec::with_capacity(n);
    for j in 1..=n {
        out.push(op.action(&spec, j)?.max(0.0));
    }
    let acts = ActionVector::new(out).expect("clamped actions are nonnegative");
    Ok((acts, spec))
}

pub fn actions(u: &Field, n: usize) -> Result<ActionVector, HillError> {
    Ok(actions_with_spectrum(u, n)?.0)
}

/// Action `I_j` alone.
pub fn action(u: &Field, j: usize) -> Result<f64, HillError> {
    let mut op = HillOperator::new(u);
    let spec = op.spectrum(j)?;
    op.action(&spec, j)
}

/// `∇_u I_j` on the modes of `u`.
pub fn action_gradient(u: &Field, j: usize, method: GradientMethod) -> Result<Field, HillError> {
    let formula = || -> Result<Field, HillError> {
        let mut op = HillOperator::new(u);
        let spec = op.spectrum(j)?;
        op.action_gradient_formula(&spec, j)
    };
    match method {
        GradientMethod::Formula => formula(),
        GradientMethod::FiniteDifference => finite_difference_gradient(u, j),
        GradientMethod::Both => {
            let f = formula()?;
            let d = finite_difference_gradient(u, j)?;
            let rel = (&f - &d).sobolev_norm(0.0) / f.sobolev_norm(0.0);
            if !(rel <= GRADIENT_AGREEMENT) {
                return Err(HillError::GradientMismatch { j, rel });
            }
            Ok(f)
        }
    }
}

fn finite_difference_gradient(u: &Field, j: usize) -> Result<Field, HillError> {
    let spec = periodic_spectrum(u, j)?;
    if spec.is_closed(j) {
        return Err(HillError::ClosedGap { j });
    }
    let h = 1e-4 * u.sobolev_norm(0.0);
    let mut g = Field::zeros(u.m_max());
    for k in 1..=u.m_max() {
        for slot in 0..2 {
            let mut up = u.clone();
            up.pairs_mut()[k - 1][slot] += h;
            let mut dn = u.clone();
            dn.pairs_mut()[k - 1][slot] -= h;
            g.pairs_mut()[k - 1][slot] = (action(&up, j)? - action(&dn, j)?) / (2.0 * h);
        }
    }
    Ok(g)
}

/// Unwraps a sampled phase using the predicted increment of each interval.
fn unwrap_with_prediction(raw: &[f64], predicted_step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut acc = raw[0];
    out.push(acc);
    for w in raw.windows(2) {
        let d = w[1] - w[0] - predicted_step;
        let wrapped = d - TAU * (d / TAU).round();
        acc += predicted_step + wrapped;
        out.push(acc);
    }
    out
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (num, den) = ts.iter().zip(ys).fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - tm) * (y - ym), b + (t - tm) * (t - tm))
    });
    num / den
}

/// Winding rates `W_1..=W_n` of the linearised phases along the unperturbed
/// flow over fast time `horizon`.
///
/// Phases of the Airy flow decrease, so `W_k = -dφ_k/dt`, which tends to
/// `(2πk)³` as `u → 0`. A mode with zero amplitude has no phase; its linear
/// frequency is returned.
pub fn estimate_frequencies(u: &Field, n: usize, horizon: f64) -> Result<Vec<f64>, HillError> {
    let stride = (horizon / 64.0).min(FRAC_PI_2 / airy_frequency(n));
    let params = EvolveParams::fast(0.0, horizon).with_dt(stride.min(1e-3));
    let traj = evolve(&u.resized(u.m_max().max(n)), &params, &PerturbationSpec::none(), stride)?;
    let ts: Vec<f64> = traj.taus().collect();
    let scale = u.sobolev_norm(0.0);
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let kappa = airy_frequency(k);
        let amps: Vec<[f64; 2]> = traj.fields().map(|f| f.pair(k)).collect();
        if scale == 0.0 || amps.iter().any(|p| p[0].hypot(p[1]) <= 1e-13 * scale) {
            out.push(kappa);
            continue;
        }
        let raw: Vec<f64> = amps.iter().map(|p| polar_angle(*p)).collect();
        let phases = unwrap_with_prediction(&raw, -kappa * stride);
        out.push(-slope(&ts, &phases));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unwrap_follows_prediction() {
        let w = 300.0;
        let dt = 0.004; // 1.2 rad per sample, beyond naive unwrapping comfort
        let raw: Vec<f64> = (0..50)
            .map(|i| polar_angle([(-w * dt * i as f64).cos(), (-w * dt * i as f64).sin()]))
            .collect();
        let un = unwrap_with_prediction(&raw, -248.0 * dt);
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * dt).collect();
        assert!((slope(&ts, &un) + w).abs() < 1e-9);
    }

    #[test]
    fn frequencies_at_small_amplitude() {
        let u = (&Field::basis(1, 8) + &Field::basis(-2, 8)).scale(1e-6);
        let w = estimate_frequencies(&u, 3, 0.02).unwrap();
        assert!((w[0] / airy_frequency(1) - 1.0).abs() < 1e-6);
        assert!((w[1] / airy_frequency(2) - 1.0).abs() < 1e-6);
        assert!((w[0] - 248.05).abs() < 0.01 && (w[1] - 1984.4).abs() < 0.05);
        assert_eq!(w[2], airy_frequency(3));
    }
}

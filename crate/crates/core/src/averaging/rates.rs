//! `F_k(u) = ⟨∇I_k(u), f(u)⟩` and its average over the invariant tori of
//! the unperturbed flow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, EvolveParams, PerturbationKind, PerturbationSpec};
use crate::hill::{actions, estimate_frequencies, HillOperator};
use crate::spectral::{airy_frequency, wavenumber, weighted_l1, Field};

use super::diagnostics::resonant_combination;
use super::AveragingError;

/// Relative resolution of a computed rate: `⟨∇I_k, f⟩` carries an absolute
/// error of roughly this times `||∇I_k||·||f||`.
pub const NUMERICAL_FLOOR: f64 = 1e-9;

struct RateTerms {
    rates: Vec<f64>,
    scales: Vec<f64>,
}

/// Rates for gaps `from..=k_max` (others left at zero) and their resolution
/// scales `||∇I_k||·||f||`.
fn rate_terms(
    u: &Field,
    from: usize,
    k_max: usize,
    spec: &PerturbationSpec,
) -> Result<RateTerms, AveragingError> {
    let mut out = RateTerms {
        rates: vec![0.0; k_max],
        scales: vec![0.0; k_max],
    };
    if spec.kind == PerturbationKind::None || u.is_zero() {
        return Ok(out);
    }
    let f = spec.apply(u);
    let f_norm = f.sobolev_norm(0.0);
    let mut op = HillOperator::new(u);
    let s = op.spectrum(k_max)?;
    for k in from..=k_max {
        if s.is_closed(k) {
            continue;
        }
        let g = op.action_gradient_formula(&s, k)?;
        out.rates[k - 1] = g.dot(&f);
        out.scales[k - 1] = g.sobolev_norm(0.0) * f_norm;
    }
    Ok(out)
}

/// `F_k(u)`, zero when gap `k` is closed.
pub fn action_rate(u: &Field, k: usize, spec: &PerturbationSpec) -> Result<f64, AveragingError> {
    if k == 0 {
        return Err(AveragingError::InvalidInput("gaps are numbered from 1".into()));
    }
    Ok(rate_terms(u, k, k, spec)?.rates[k - 1])
}

/// `F_1..=F_{k_max}` at `u`, sharing one spectrum.
pub fn action_rates(
    u: &Field,
    k_max: usize,
    spec: &PerturbationSpec,
) -> Result<Vec<f64>, AveragingError> {
    if k_max == 0 {
        return Ok(Vec::new());
    }
    Ok(rate_terms(u, 1, k_max, spec)?.rates)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingParams {
    /// Fast-time length of the unperturbed orbit segment averaged over.
    pub t_avg: f64,
    /// Equally spaced samples of `F` along the segment.
    pub samples: usize,
    /// Contiguous sub-intervals for the jackknife.
    pub blocks: usize,
    /// Fast-time step for the orbit; `None` uses the automatic rule.
    pub dt: Option<f64>,
    /// Largest `|L|₁` screened for combinations `W·L ≈ 0`.
    pub resonance_order: usize,
    /// Resonance threshold in units of `κ₁ = (2π)³`.
    pub resonance_tol: f64,
}

impl Default for AveragingParams {
    fn default() -> Self {
        Self {
            t_avg: 1.0,
            samples: 256,
            blocks: 8,
            dt: None,
            resonance_order: 2,
            resonance_tol: 1e-3,
        }
    }
}

impl AveragingParams {
    pub fn validate(&self) -> Result<(), AveragingError> {
        let bad = |m: &str| Err(AveragingError::InvalidInput(m.into()));
        if !(self.t_avg > 0.0) || !self.t_avg.is_finite() {
            return bad("t_avg must be positive");
        }
        if self.blocks < 2 || self.samples < self.blocks || !self.samples.is_multiple_of(self.blocks) {
            return bad("samples must be a positive multiple of blocks, with at least 2 blocks");
        }
        if !(self.resonance_tol >= 0.0) {
            return bad("resonance_tol must be nonnegative");
        }
        Ok(())
    }
}

/// Time average of `F_k` with jackknife error bars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean: Vec<f64>,
    /// Jackknife standard error over contiguous blocks.
    pub stderr: Vec<f64>,
    /// Resolution of the rate computation itself, averaged over samples.
    pub floor: Vec<f64>,
    pub samples: usize,
    pub blocks: usize,
    pub t_avg: f64,
}

impl RateEstimate {
    /// Error bar of entry `k` (1-based): the jackknife error, never below the
    /// numerical floor.
    pub fn error_bar(&self, k: usize) -> f64 {
        self.stderr[k - 1].max(self.floor[k - 1])
    }

    /// Whether `value` lies within `n_sigma` error bars of the estimate for
    /// every tracked action.
    pub fn consistent_with(&self, value: &[f64], n_sigma: f64) -> bool {
        (1..=self.mean.len()).all(|k| (self.mean[k - 1] - value[k - 1]).abs() <= n_sigma * self.error_bar(k))
    }
}

/// `⟨F_k⟩(I(u_rep))` for `k ≤ k_max` as a time average along the unperturbed
/// orbit of `u_rep`.
///
/// Fails with [`AveragingError::ResonantRepresentative`] when the winding
/// rates of the open gaps satisfy `|W·L| ≤ resonance_tol·κ₁` for some
/// `0 < |L|₁ ≤ resonance_order`.
pub fn estimate_averaged_field(
    u_rep: &Field,
    k_max: usize,
    spec: &PerturbationSpec,
    params: &AveragingParams,
) -> Result<RateEstimate, AveragingError> {
    params.validate()?;
    if k_max == 0 {
        return Err(AveragingError::InvalidInput("k_max must be positive".into()));
    }
    let u_rep = u_rep.resized(u_rep.m_max().max(k_max));
    if !u_rep.is_zero() && params.resonance_order > 0 {
        let acts = actions(&u_rep, k_max)?;
        let open: Vec<bool> = acts.entries().iter().map(|&a| a > 0.0).collect();
        let w = estimate_frequencies(&u_rep, k_max, params.t_avg)?;
        let tol = params.resonance_tol * airy_frequency(1);
        if let Some((l, value)) = resonant_combination(&w, &open, params.resonance_order, tol) {
            return Err(AveragingError::ResonantRepresentative(format!(
                "|W·L| = {value:.3e} for L = {l:?}"
            )));
        }
    }

    let stride = params.t_avg / params.samples as f64;
    let mut ep = EvolveParams::fast(0.0, params.t_avg);
    ep.dt = params.dt;
    let traj = evolve(&u_rep, &ep, &PerturbationSpec::none(), stride)?;
    let states: Vec<&Field> = traj.fields().take(params.samples).collect();
    let terms: Vec<RateTerms> = states
        .par_iter()
        .map(|u| rate_terms(u, 1, k_max, spec))
        .collect::<Result<_, _>>()?;

    let per_block = params.samples / params.blocks;
    let b = params.blocks as f64;
    let mut est = RateEstimate {
        mean: vec![0.0; k_max],
        stderr: vec![0.0; k_max],
        floor: vec![0.0; k_max],
        samples: params.samples,
        blocks: params.blocks,
        t_avg: params.t_avg,
    };
    for k in 0..k_max {
        let block_means: Vec<f64> = terms
            .chunks(per_block)
            .map(|c| c.iter().map(|t| t.rates[k]).sum::<f64>() / per_block as f64)
            .collect();
        let mean = block_means.iter().sum::<f64>() / b;
        // leave-one-block-out estimates and their spread
        let loo: Vec<f64> = block_means.iter().map(|m| (b * mean - m) / (b - 1.0)).collect();
        let loo_mean = loo.iter().sum::<f64>() / b;
        let var = (b - 1.0) / b * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
        est.mean[k] = mean;
        est.stderr[k] = var.sqrt();
        est.floor[k] =
            NUMERICAL_FLOOR * terms.iter().map(|t| t.scales[k]).sum::<f64>() / terms.len() as f64;
    }
    Ok(est)
}

/// Rescales the first `target.len()` mode pairs of `rep` until its gap
/// actions match `target` to relative tolerance `tol`. Zero targets zero the
/// mode; a closed gap with a positive target is seeded at the linearised
/// amplitude.
pub fn rescale_to_actions(rep: &Field, target: &[f64], tol: f64) -> Result<Field, AveragingError> {
    let k_max = target.len();
    let mut u = rep.resized(rep.m_max().max(k_max));
    for (k, &t) in target.iter().enumerate() {
        if !(t > 0.0) {
            u.set_pair(k + 1, [0.0, 0.0]);
        }
    }
    for _ in 0..50 {
        let cur = actions(&u, k_max)?;
        let mut worst = 0.0f64;
        let mut updates = Vec::new();
        for k in 1..=k_max {
            let t = target[k - 1];
            if !(t > 0.0) {
                continue;
            }
            let c = cur.get(k);
            if c <= 0.0 {
                let amp = (2.0 * wavenumber(k) * t).sqrt();
                let p = u.pair(k);
                let n = p[0].hypot(p[1]);
                let dir = if n > 0.0 { [p[0] / n, p[1] / n] } else { [1.0, 0.0] };
                updates.push((k, [amp * dir[0], amp * dir[1]]));
                worst = f64::INFINITY;
                continue;
            }
            let r = t / c;
            worst = worst.max((r - 1.0).abs());
            let s = r.sqrt();
            let p = u.pair(k);
            updates.push((k, [s * p[0], s * p[1]]));
        }
        if worst <= tol {
            return Ok(u);
        }
        for (k, p) in updates {
            u.set_pair(k, p);
        }
    }
    Err(AveragingError::EvaluatorFailure(
        "rescaling to target actions did not converge".into(),
    ))
}

/// The right-hand side `J ↦ ⟨F⟩(J)` of the averaged equation.
pub trait RateModel: Send {
    fn rates(&mut self, j: &[f64]) -> Result<Vec<f64>, AveragingError>;
}

impl<F> RateModel for F
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, AveragingError> + Send,
{
    fn rates(&mut self, j: &[f64]) -> Result<Vec<f64>, AveragingError> {
        self(j)
    }
}

struct Estimated {
    rep: Field,
    spec: PerturbationSpec,
    params: AveragingParams,
}

impl RateModel for Estimated {
    fn rates(&mut self, j: &[f64]) -> Result<Vec<f64>, AveragingError> {
        let u = rescale_to_actions(&self.rep, j, 1e-6)?;
        Ok(estimate_averaged_field(&u, j.len(), &self.spec, &self.params)?.mean)
    }
}

/// Averaged vector field `⟨F_k⟩`, `k ≤ k_max`.
pub struct AveragedField {
    k_max: usize,
    label: &'static str,
    params: Option<AveragingParams>,
    model: Box<dyn RateModel>,
}

impl AveragedField {
    pub fn zero(k_max: usize) -> Self {
        Self::custom(k_max, "zero", move |_: &[f64]| Ok(vec![0.0; k_max]))
    }

    /// `⟨F_k⟩(J) = -c_k J_k`.
    pub fn linear_decay(coeffs: Vec<f64>) -> Self {
        let k_max = coeffs.len();
        Self::custom(k_max, "linear_decay", move |j: &[f64]| {
            Ok(coeffs.iter().zip(j).map(|(c, x)| -c * x).collect())
        })
    }

    /// The field to first order in the amplitude, when it is known in
    /// closed form: zero for the Hamiltonian kinds and `-2s(2πk)^{-2}J_k` for
    /// `s∂_x^{-2}`. `None` for the quadratic kind.
    pub fn linear_order(spec: &PerturbationSpec, k_max: usize) -> Option<Self> {
        match spec.kind {
            PerturbationKind::None | PerturbationKind::Derivative | PerturbationKind::Antiderivative => {
                Some(Self::zero(k_max))
            }
            PerturbationKind::DoubleAntiderivative => Some(Self::linear_decay(
                (1..=k_max).map(|k| 2.0 * spec.scale() / wavenumber(k).powi(2)).collect(),
            )),
            PerturbationKind::SmoothingQuadratic => None,
        }
    }

    /// Time averages along unperturbed orbits of `rep` rescaled to the
    /// requested actions.
    pub fn estimated(rep: &Field, spec: &PerturbationSpec, k_max: usize, params: AveragingParams) -> Self {
        Self {
            k_max,
            label: "estimated",
            params: Some(params.clone()),
            model: Box::new(Estimated {
                rep: rep.clone(),
                spec: spec.clone(),
                params,
            }),
        }
    }

    pub fn custom(k_max: usize, label: &'static str, model: impl RateModel + 'static) -> Self {
        Self {
            k_max,
            label,
            params: None,
            model: Box::new(model),
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn label(&self) -> &'static str {
        self.label
    }

    pub fn params(&self) -> Option<&AveragingParams> {
        self.params.as_ref()
    }

    pub fn rates(&mut self, j: &[f64]) -> Result<Vec<f64>, AveragingError> {
        if j.len() != self.k_max {
            return Err(AveragingError::InvalidInput(format!(
                "expected {} actions, got {}",
                self.k_max,
                j.len()
            )));
        }
        let r = self.model.rates(j)?;
        if r.len() != self.k_max || r.iter().any(|v| !v.is_finite()) {
            return Err(AveragingError::EvaluatorFailure("rate vector malformed".into()));
        }
        Ok(r)
    }
}

/// Largest `|⟨F⟩(J₁) - ⟨F⟩(J₂)|~_q / |J₁ - J₂|~_q` over probe pairs.
pub fn lipschitz_quotient(
    field: &mut AveragedField,
    probes: &[(Vec<f64>, Vec<f64>)],
    q: f64,
) -> Result<f64, AveragingError> {
    let mut worst = 0.0f64;
    for (a, b) in probes {
        let fa = field.rates(a)?;
        let fb = field.rates(b)?;
        let num: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
        let den: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let d = weighted_l1(&den, q);
        if d > 0.0 {
            worst = worst.max(weighted_l1(&num, q) / d);
        }
    }
    Ok(worst)
}

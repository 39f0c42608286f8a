//! Periodic spectrum, gap actions and their gradients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::spectral::{Collocation, Field};

use super::magnus::HillOperator;
use super::HillError;

/// Eigenvalues `λ₀ < λ₁ ≤ λ₂ < λ₃ ≤ λ₄ < …` of the periodic/antiperiodic
/// problem, up to `λ_{2n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HillSpectrum {
    lambdas: Vec<f64>,
}

impl HillSpectrum {
    /// Spectrum from sorted eigenvalues `λ₀, …, λ_{2n}`.
    pub fn from_lambdas(lambdas: Vec<f64>) -> Self {
        assert!(lambdas.len() % 2 == 1, "need 2n + 1 eigenvalues");
        Self { lambdas }
    }

    pub fn n_gaps(&self) -> usize {
        (self.lambdas.len() - 1) / 2
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn ground(&self) -> f64 {
        self.lambdas[0]
    }

    /// `(λ_{2j-1}, λ_{2j})`, `j ≥ 1`.
    pub fn gap(&self, j: usize) -> (f64, f64) {
        (self.lambdas[2 * j - 1], self.lambdas[2 * j])
    }

    pub fn gap_length(&self, j: usize) -> f64 {
        let (a, b) = self.gap(j);
        b - a
    }

    pub fn gaps(&self) -> Vec<f64> {
        (1..=self.n_gaps()).map(|j| self.gap_length(j)).collect()
    }

    /// Gap counts as closed below root-finder resolution.
    pub fn is_closed(&self, j: usize) -> bool {
        let (_, b) = self.gap(j);
        self.gap_length(j) < CLOSED_GAP_RTOL * b.abs().max(1.0)
    }
}

/// Relative gap length below which a gap is treated as closed.
pub const CLOSED_GAP_RTOL: f64 = 1e-9;

const SCAN_STEP: f64 = PI / 16.0;

/// Illinois false position on `g` over a sign-changing bracket, with a
/// bisection step whenever progress stalls.
fn solve_bracketed(
    mut g: impl FnMut(f64) -> Result<f64, HillError>,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
    mut gb: f64,
) -> Result<f64, HillError> {
    debug_assert!(ga * gb <= 0.0);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    let tol = 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    for it in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut x = (a * gb - b * ga) / (gb - ga);
        if it % 4 == 3 || !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        let gx = g(x)?;
        if gx == 0.0 {
            return Ok(x);
        }
        if gx * gb < 0.0 {
            a = b;
            ga = gb;
        } else {
            ga *= 0.5;
        }
        b = x;
        gb = gx;
    }
    Ok(if ga.abs() < gb.abs() { a } else { b })
}

/// Maximiser of a unimodal function on `[a, b]` by golden-section search.
fn golden_max(
    mut g: impl FnMut(f64) -> Result<f64, HillError>,
    mut a: f64,
    mut b: f64,
) -> Result<(f64, f64), HillError> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    let tol = 1e-13 * a.abs().max(b.abs()).max(1.0);
    while b - a > tol {
        if g1 < g2 {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + r * (b - a);
            g2 = g(x2)?;
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - r * (b - a);
            g1 = g(x1)?;
        }
        if g1.max(g2) > 0.0 && (b - a) < 1e-6 * a.abs().max(1.0) {
            // inside an open gap: the maximiser only has to be interior
            break;
        }
    }
    Ok(if g1 > g2 { (x1, g1) } else { (x2, g2) })
}

impl HillOperator {
    /// First `2n + 1` periodic/antiperiodic eigenvalues.
    pub fn spectrum(&mut self, n_gaps: usize) -> Result<HillSpectrum, HillError> {
        assert!(n_gaps >= 1, "at least one gap is required");
        let lo = self.potential_min() - 1.0;
        let delta = |op: &mut Self, l: f64| op.discriminant(l).map(|s| s.delta);

        // bracket the first n+1 zeros of Δ, scanning in √(λ - lo)
        let mut zeros = Vec::with_capacity(n_gaps + 1);
        let mut s = 0.0;
        let mut prev = (lo, delta(self, lo)?);
        if prev.1 <= 2.0 {
            return Err(HillError::RootBracketFailure {
                what: "discriminant does not exceed 2 below the potential minimum".into(),
            });
        }
        while zeros.len() < n_gaps + 1 {
            s += SCAN_STEP;
            if s > SCAN_STEP * 64.0 * (n_gaps as f64 + 4.0) {
                return Err(HillError::RootBracketFailure {
                    what: format!("found only {} zeros of the discriminant", zeros.len()),
                });
            }
            let l = lo + s * s;
            let d = delta(self, l)?;
            if d == 0.0 || d.signum() != prev.1.signum() {
                let z = solve_bracketed(|x| delta(self, x), prev.0, l, prev.1, d)?;
                zeros.push(z);
            }
            prev = (l, d);
        }

        let gapf = |op: &mut Self, l: f64| op.discriminant(l).map(|s| s.gap_function());
        let g_lo = gapf(self, lo)?;
        let lambda0 = solve_bracketed(|x| gapf(self, x), lo, zeros[0], g_lo, -4.0)?;
        let mut lambdas = vec![lambda0];
        for j in 1..=n_gaps {
            let (za, zb) = (zeros[j - 1], zeros[j]);
            let (peak, dmax) = golden_max(|x| gapf(self, x), za, zb)?;
            let sign = self.discriminant(peak)?.delta.signum();
            let want = if j % 2 == 0 { 1.0 } else { -1.0 };
            if sign != want {
                return Err(HillError::RootBracketFailure {
                    what: format!("gap {j}: discriminant has the wrong sign between its zeros"),
                });
            }
            if dmax <= 0.0 {
                lambdas.push(peak);
                lambdas.push(peak);
                continue;
            }
            let left = solve_bracketed(|x| gapf(self, x), za, peak, -4.0, dmax)?;
            let right = solve_bracketed(|x| gapf(self, x), peak, zb, dmax, -4.0)?;
            lambdas.push(left);
            lambdas.push(right);
        }
        for w in lambdas.windows(2) {
            if w[1] < w[0] {
                return Err(HillError::RootBracketFailure {
                    what: "eigenvalues are not interlaced".into(),
                });
            }
        }
        Ok(HillSpectrum { lambdas })
    }

    /// `I_j = (2/π)∫_{gap j} arccosh(|Δ|/2) dλ`, evaluated as
    /// `asinh(√(Δ²-4)/2)` with Gauss–Chebyshev nodes of the second kind.
    pub fn action(&mut self, spec: &HillSpectrum, j: usize) -> Result<f64, HillError> {
        if spec.is_closed(j) {
            return Ok(0.0);
        }
        let (a, b) = spec.gap(j);
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        let mut quad = |n: usize| -> Result<f64, HillError> {
            let mut acc = 0.0;
            for i in (1..=n).rev() {
                let th = i as f64 * PI / (n + 1) as f64;
                let d = self.discriminant(c + r * th.cos())?.gap_function().max(0.0);
                acc += th.sin() * (0.5 * d.sqrt()).asinh();
            }
            Ok(2.0 / PI * r * PI / (n + 1) as f64 * acc)
        };
        let mut n = 16;
        let mut prev = quad(n)?;
        while n < 512 {
            n = 2 * n + 1;
            let cur = quad(n)?;
            let done = (cur - prev).abs() <= 1e-12 * cur.abs();
            prev = cur;
            if done {
                break;
            }
        }
        Ok(prev)
    }

    /// `L²` gradient of `I_j` from the first variation of the discriminant,
    /// `∂Δ/∂u(x) = y₂(1)y₁(x)² + (y₂'(1) - y₁(1))y₁(x)y₂(x) - y₁'(1)y₂(x)²`,
    /// integrated over the gap against `sign(Δ)/√(Δ²-4)`.
    pub fn action_gradient_formula(
        &mut self,
        spec: &HillSpectrum,
        j: usize,
    ) -> Result<Field, HillError> {
        if spec.is_closed(j) {
            return Err(HillError::ClosedGap { j });
        }
        let m = self.potential().m_max();
        let (a, b) = spec.gap(j);
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        let steps = self.steps_for(b);
        let mut grid = Collocation::new(steps);
        let mut path = Vec::new();
        let mut density = vec![0.0; steps];
        let mut quad = |op: &mut Self, n: usize| -> Result<Field, HillError> {
            density.iter_mut().for_each(|v| *v = 0.0);
            for i in (1..=n).rev() {
                let th = (2 * i - 1) as f64 * PI / (2 * n) as f64;
                let t = th.cos();
                let s = op.discriminant_with(c + r * t, steps, Some(&mut path))?;
                let d = s.gap_function();
                if !(d > 0.0) {
                    continue;
                }
                // 1/√D = 1/(r√(1-t²)·√h), the Chebyshev weight absorbs 1/√(1-t²)
                let w = s.delta.signum() * r * th.sin() / d.sqrt();
                let (k1, k2, k3) = (s.y2, s.dy2 - s.y1, -s.dy1);
                for (acc, y) in density.iter_mut().zip(&path) {
                    *acc += w * (k1 * y[0] * y[0] + k2 * y[0] * y[1] + k3 * y[1] * y[1]);
                }
            }
            let scale = 2.0 / PI * PI / n as f64;
            density.iter_mut().for_each(|v| *v *= scale);
            Ok(grid.from_grid(&density, m))
        };
        let mut n = 16;
        let mut prev = quad(self, n)?;
        while n < 512 {
            n *= 2;
            let cur = quad(self, n)?;
            let change = (&cur - &prev).sobolev_norm(0.0);
            let done = change <= 1e-10 * cur.sobolev_norm(0.0);
            prev = cur;
            if done {
                break;
            }
        }
        Ok(prev)
    }
}

//! Transfer matrix of `-y'' + qy = λy` over one period by the fourth-order
//! Magnus method with two Gauss nodes per step.
//!
//! Each step is the exact exponential of
//! `Ω = [[α, h], [h·c̄, -α]]`, `c̄ = (c₁+c₂)/2`, `α = (√3/12)h²(c₁-c₂)`,
//! `c_i = q(x_i) - λ`, so the free operator is integrated exactly and every
//! step has unit determinant.

use crate::spectral::{wavenumber, Collocation, Field};

use super::HillError;

/// Fundamental solutions at `x = 1` for one value of `λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscriminantSample {
    pub lambda: f64,
    /// `Δ(λ) = y₁(1) + y₂'(1)`.
    pub delta: f64,
    pub y1: f64,
    pub y2: f64,
    pub dy1: f64,
    pub dy2: f64,
}

impl DiscriminantSample {
    /// `y₁y₂' - y₁'y₂`, equal to 1 for an exact transfer matrix.
    pub fn wronskian(&self) -> f64 {
        self.y1 * self.dy2 - self.dy1 * self.y2
    }

    /// `Δ² - 4` written without cancellation near `Δ = ±2`:
    /// `(y₁ - y₂')² + 4y₂y₁'`.
    pub fn gap_function(&self) -> f64 {
        let d = self.y1 - self.dy2;
        d * d + 4.0 * self.y2 * self.dy1
    }

    /// `|Δ| - 2`, accurate when it is small.
    pub fn excess(&self) -> f64 {
        self.gap_function() / (self.delta.abs() + 2.0)
    }
}

/// `exp(Ω)` for `Ω = [[α, h], [hc, -α]]`, returned row-major.
#[inline]
fn step_matrix(alpha: f64, h: f64, c: f64) -> [f64; 4] {
    let z = alpha * alpha + h * h * c;
    let (ch, sh) = if z > 1e-4 {
        let r = z.sqrt();
        (r.cosh(), r.sinh() / r)
    } else if z < -1e-4 {
        let r = (-z).sqrt();
        (r.cos(), r.sin() / r)
    } else {
        // Taylor series of cosh √z and sinh √z / √z
        let mut ch = 1.0;
        let mut sh = 1.0;
        let mut tc = 1.0;
        let mut ts = 1.0;
        for k in 1..8 {
            let k = k as f64;
            tc *= z / ((2.0 * k - 1.0) * (2.0 * k));
            ts *= z / ((2.0 * k) * (2.0 * k + 1.0));
            ch += tc;
            sh += ts;
        }
        (ch, sh)
    };
    [ch + sh * alpha, sh * h, sh * h * c, ch - sh * alpha]
}

struct NodeValues {
    steps: usize,
    q1: Vec<f64>,
    q2: Vec<f64>,
}

/// Hill operator `-d²/dx² + u` with cached potential values at the Magnus
/// nodes of each step count used so far.
pub struct HillOperator {
    u: Field,
    min_steps: usize,
    cache: Vec<NodeValues>,
    u_min: f64,
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const SQRT3_12: f64 = 0.144_337_567_297_406_4;

impl HillOperator {
    pub fn new(u: &Field) -> Self {
        let m = u.m_max();
        let mut grid = Collocation::new((16 * m).next_power_of_two().max(64));
        let mut vals = vec![0.0; grid.len()];
        grid.to_grid(u, &mut vals);
        let u_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            u: u.clone(),
            min_steps: (16 * m).max(256),
            cache: Vec::new(),
            u_min,
        }
    }

    pub fn potential(&self) -> &Field {
        &self.u
    }

    /// Lower bound for the grid minimum of the potential (spectrum lies above).
    pub fn potential_min(&self) -> f64 {
        self.u_min
    }

    /// Steps per period used at spectral parameter `λ`.
    pub fn steps_for(&self, lambda: f64) -> usize {
        let osc = 64 * (lambda.abs().max(1.0).sqrt().ceil() as usize);
        osc.max(self.min_steps).next_power_of_two()
    }

    fn nodes(&mut self, steps: usize) -> &NodeValues {
        if let Some(i) = self.cache.iter().position(|c| c.steps == steps) {
            return &self.cache[i];
        }
        let h = 1.0 / steps as f64;
        let mut grid = Collocation::new(steps);
        let mut shifted = |offset: f64| {
            // values of u(x_j + offset) on the grid x_j = j/steps
            let mut s = self.u.clone();
            for (i, p) in s.pairs_mut().iter_mut().enumerate() {
                let (sn, cs) = (wavenumber(i + 1) * offset).sin_cos();
                let (a, b) = (p[0], p[1]);
                *p = [a * cs + b * sn, -a * sn + b * cs];
            }
            let mut v = vec![0.0; steps];
            grid.to_grid(&s, &mut v);
            v
        };
        let q1 = shifted(h * (0.5 - SQRT3_6));
        let q2 = shifted(h * (0.5 + SQRT3_6));
        self.cache.push(NodeValues { steps, q1, q2 });
        self.cache.last().unwrap()
    }

    /// Monodromy data at `λ`.
    pub fn discriminant(&mut self, lambda: f64) -> Result<DiscriminantSample, HillError> {
        let steps = self.steps_for(lambda);
        self.discriminant_with(lambda, steps, None)
    }

    /// Monodromy data, optionally recording `(y₁(x_k), y₂(x_k))` at the
    /// step endpoints `x_k = k/steps`, `k = 0..steps`.
    pub(crate) fn discriminant_with(
        &mut self,
        lambda: f64,
        steps: usize,
        mut path: Option<&mut Vec<[f64; 2]>>,
    ) -> Result<DiscriminantSample, HillError> {
        let h = 1.0 / steps as f64;
        let nodes = self.nodes(steps);
        // columns (y₁, y₁') and (y₂, y₂')
        let (mut a, mut b, mut c, mut d) = (1.0f64, 0.0f64, 0.0f64, 1.0f64);
        if let Some(p) = path.as_deref_mut() {
            p.clear();
            p.reserve(steps);
        }
        for k in 0..steps {
            if let Some(p) = path.as_deref_mut() {
                p.push([a, b]);
            }
            let c1 = nodes.q1[k] - lambda;
            let c2 = nodes.q2[k] - lambda;
            let alpha = SQRT3_12 * h * h * (c1 - c2);
            let e = step_matrix(alpha, h, 0.5 * (c1 + c2));
            // Y ← exp(Ω)·Y, with Y = [[a, b], [c, d]] = [[y₁, y₂], [y₁', y₂']]
            let na = e[0] * a + e[1] * c;
            let nb = e[0] * b + e[1] * d;
            let nc = e[2] * a + e[3] * c;
            let nd = e[2] * b + e[3] * d;
            a = na;
            b = nb;
            c = nc;
            d = nd;
        }
        let s = DiscriminantSample {
            lambda,
            delta: a + d,
            y1: a,
            y2: b,
            dy1: c,
            dy2: d,
        };
        if !(s.delta.is_finite() && s.y2.is_finite() && s.dy1.is_finite()) {
            return Err(HillError::IntegrationFailure { lambda });
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_operator_examples() {
        let mut op = HillOperator::new(&Field::zeros(4));
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((op.discriminant(pi2).unwrap().delta + 2.0).abs() < 1e-12);
        assert!((op.discriminant(4.0 * pi2).unwrap().delta - 2.0).abs() < 1e-12);
        assert!((op.discriminant(-1.0).unwrap().delta - 2.0 * 1f64.cosh()).abs() < 1e-12);
    }

    #[test]
    fn constant_step_matches_series_branch() {
        for z in [-2e-4, -0.9e-4, 0.0, 0.9e-4, 2e-4] {
            let h = 0.01;
            let c = z / (h * h);
            let e = step_matrix(0.0, h, c);
            let r = z.abs().sqrt();
            let (ch, sh) = if z > 0.0 {
                (r.cosh(), r.sinh() / r)
            } else if z < 0.0 {
                (r.cos(), r.sin() / r)
            } else {
                (1.0, 1.0)
            };
            assert!((e[0] - ch).abs() < 1e-15 && (e[1] - sh * h).abs() < 1e-17);
        }
    }

    #[test]
    fn fourth_order_in_step_count() {
        let u = Field::from_pairs(vec![[0.8, -0.3], [0.2, 0.4], [0.05, 0.0]]).unwrap();
        let mut op = HillOperator::new(&u);
        let lam = 7.3;
        let reference = op.discriminant_with(lam, 8192, None).unwrap().delta;
        let e1 = (op.discriminant_with(lam, 32, None).unwrap().delta - reference).abs();
        let e2 = (op.discriminant_with(lam, 64, None).unwrap().delta - reference).abs();
        let order = (e1 / e2).log2();
        assert!(order > 3.7, "order {order}");
    }
}

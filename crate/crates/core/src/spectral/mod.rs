//! Zero-mean periodic fields in the real trigonometric basis
//! `e_k = √2 cos 2πkx`, `e_{-k} = √2 sin 2πkx` on the unit circle, together
//! with the weighted norms of the Sobolev scale, the action space, and the
//! linearised Birkhoff map.
//!
//! Every sum over modes runs from the highest wavenumber down to `k = 1`;
//! the weights `(2πk)^s` are strongly graded and this ordering keeps the
//! small tail contributions from being swamped.

mod frame;
mod grid;

pub use frame::{FrameError, FRAME_MAGIC, FRAME_VERSION};
pub use grid::Collocation;

use std::f64::consts::TAU;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("coefficient of mode {mode} is not finite")]
    NonFinite { mode: i64 },
    #[error("action entry {index} is negative ({value})")]
    NegativeAction { index: usize, value: f64 },
    #[error("field resolution must be at least 1")]
    EmptyField,
}

/// Angular wavenumber `2πk`.
#[inline]
pub fn wavenumber(k: usize) -> f64 {
    TAU * k as f64
}

/// A real zero-mean 1-periodic function stored by its coefficient pairs
/// `(û_k, û_{-k})`, `k = 1..=m_max`. There is no `k = 0` slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    coeffs: Vec<[f64; 2]>,
}

impl Field {
    pub fn zeros(m_max: usize) -> Self {
        Self {
            coeffs: vec![[0.0; 2]; m_max],
        }
    }

    pub fn from_pairs(coeffs: Vec<[f64; 2]>) -> Result<Self, SpectralError> {
        if coeffs.is_empty() {
            return Err(SpectralError::EmptyField);
        }
        for (i, c) in coeffs.iter().enumerate() {
            if !c[0].is_finite() {
                return Err(SpectralError::NonFinite { mode: i as i64 + 1 });
            }
            if !c[1].is_finite() {
                return Err(SpectralError::NonFinite {
                    mode: -(i as i64 + 1),
                });
            }
        }
        Ok(Self { coeffs })
    }

    /// The basis function `e_k` (`k < 0` selects the sine).
    pub fn basis(k: i64, m_max: usize) -> Self {
        let mut f = Self::zeros(m_max);
        let idx = k.unsigned_abs() as usize;
        assert!(idx >= 1 && idx <= m_max, "basis index {k} outside 1..={m_max}");
        f.coeffs[idx - 1][usize::from(k < 0)] = 1.0;
        f
    }

    pub fn m_max(&self) -> usize {
        self.coeffs.len()
    }

    pub fn pairs(&self) -> &[[f64; 2]] {
        &self.coeffs
    }

    pub fn pairs_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.coeffs
    }

    /// `(û_k, û_{-k})` for `k >= 1`; zero beyond the stored resolution.
    pub fn pair(&self, k: usize) -> [f64; 2] {
        if k == 0 || k > self.coeffs.len() {
            [0.0; 2]
        } else {
            self.coeffs[k - 1]
        }
    }

    pub fn set_pair(&mut self, k: usize, pair: [f64; 2]) {
        self.coeffs[k - 1] = pair;
    }

    /// Coefficient `û_k` for signed `k`.
    pub fn coeff(&self, k: i64) -> f64 {
        self.pair(k.unsigned_abs() as usize)[usize::from(k < 0)]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c[0] == 0.0 && c[1] == 0.0)
    }

    /// Copy with a different resolution, zero-padding or truncating.
    pub fn resized(&self, m_max: usize) -> Self {
        let mut coeffs = vec![[0.0; 2]; m_max];
        let n = m_max.min(self.coeffs.len());
        coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        Self { coeffs }
    }

    /// `L²` inner product; the basis is orthonormal.
    pub fn dot(&self, other: &Field) -> f64 {
        let n = self.m_max().min(other.m_max());
        (0..n)
            .rev()
            .map(|i| self.coeffs[i][0] * other.coeffs[i][0] + self.coeffs[i][1] * other.coeffs[i][1])
            .sum()
    }

    /// `||u||_p = (Σ (2πk)^{2p} (û_k² + û_{-k}²))^{1/2}`.
    pub fn sobolev_norm(&self, p: f64) -> f64 {
        sobolev_norm(self, p)
    }

    /// Value at a point `x`, by direct summation.
    pub fn eval(&self, x: f64) -> f64 {
        let (s1, c1) = (TAU * x).sin_cos();
        let (mut c, mut s) = (1.0f64, 0.0f64);
        let mut acc = 0.0;
        for pair in &self.coeffs {
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
            acc += pair[0] * c + pair[1] * s;
        }
        std::f64::consts::SQRT_2 * acc
    }

    /// `∂_x^order u` in coefficient space: `∂_x(a e_k + b e_{-k}) = 2πk (b e_k - a e_{-k})`.
    pub fn derivative(&self, order: u32) -> Field {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let w = wavenumber(i + 1);
            let (mut a, mut b) = (c[0], c[1]);
            for _ in 0..order {
                let na = w * b;
                b = -w * a;
                a = na;
            }
            *c = [a, b];
        }
        out
    }

    /// Inverse of [`Field::derivative`] of order one on zero-mean fields.
    pub fn antiderivative(&self) -> Field {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let w = wavenumber(i + 1);
            *c = [-c[1] / w, c[0] / w];
        }
        out
    }

    /// Fraction of `L²` energy carried by modes above `cutoff`.
    pub fn tail_fraction(&self, cutoff: usize) -> f64 {
        let total = self.sobolev_norm(0.0).powi(2);
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .take_while(|(i, _)| i + 1 > cutoff)
            .map(|(_, c)| c[0] * c[0] + c[1] * c[1])
            .sum();
        tail / total
    }

    pub fn scale(&self, s: f64) -> Field {
        self * s
    }

    /// `self += s * other` on the overlapping modes.
    pub fn axpy(&mut self, s: f64, other: &Field) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a[0] += s * b[0];
            a[1] += s * b[1];
        }
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        let mut out = self.resized(self.m_max().max(rhs.m_max()));
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        let mut out = self.resized(self.m_max().max(rhs.m_max()));
        out.axpy(-1.0, rhs);
        out
    }
}

impl AddAssign<&Field> for Field {
    fn add_assign(&mut self, rhs: &Field) {
        if rhs.m_max() > self.m_max() {
            *self = self.resized(rhs.m_max());
        }
        self.axpy(1.0, rhs);
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, s: f64) -> Field {
        Field {
            coeffs: self.coeffs.iter().map(|c| [c[0] * s, c[1] * s]).collect(),
        }
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self * -1.0
    }
}

pub fn sobolev_norm(u: &Field, p: f64) -> f64 {
    u.coeffs
        .iter()
        .enumerate()
        .rev()
        .map(|(i, c)| wavenumber(i + 1).powf(2.0 * p) * (c[0] * c[0] + c[1] * c[1]))
        .sum::<f64>()
        .sqrt()
}

/// Orthogonal projection onto `span{e_{±1}, …, e_{±m}}`, keeping the
/// stored resolution.
pub fn project(u: &Field, m: usize) -> Field {
    let mut out = u.clone();
    for c in out.coeffs.iter_mut().skip(m) {
        *c = [0.0; 2];
    }
    out
}

/// Point `v = (𝐯_1, 𝐯_2, …)` of the Birkhoff phase space, `𝐯_j = (v_j, v_{-j})`.
#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffPoint {
    modes: Vec<[f64; 2]>,
}

impl BirkhoffPoint {
    pub fn new(modes: Vec<[f64; 2]>) -> Self {
        Self { modes }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            modes: vec![[0.0; 2]; n],
        }
    }

    pub fn modes(&self) -> &[[f64; 2]] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `|v|_p = (Σ (2πj)^{2p+1} |𝐯_j|²)^{1/2}`.
    pub fn h_norm(&self, p: f64) -> f64 {
        h_norm(self, p)
    }
}

pub fn h_norm(v: &BirkhoffPoint, p: f64) -> f64 {
    v.modes
        .iter()
        .enumerate()
        .rev()
        .map(|(i, m)| wavenumber(i + 1).powf(2.0 * p + 1.0) * (m[0] * m[0] + m[1] * m[1]))
        .sum::<f64>()
        .sqrt()
}

/// Nonnegative action sequence `I_1, I_2, …`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ActionVector {
    entries: Vec<f64>,
}

impl ActionVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, SpectralError> {
        for (i, &v) in entries.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SpectralError::NegativeAction { index: i + 1, value: v });
            }
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: vec![0.0; n],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry `I_j` (1-based), zero beyond the stored length.
    pub fn get(&self, j: usize) -> f64 {
        self.entries.get(j.wrapping_sub(1)).copied().unwrap_or(0.0)
    }

    pub fn norm(&self, p: f64) -> f64 {
        weighted_l1(&self.entries, p)
    }
}

/// `2 Σ (2πj)^{2p+1} |x_j|` over any real sequence; the distance used when
/// comparing two action vectors.
pub fn weighted_l1(entries: &[f64], p: f64) -> f64 {
    2.0 * entries
        .iter()
        .enumerate()
        .rev()
        .map(|(i, v)| wavenumber(i + 1).powf(2.0 * p + 1.0) * v.abs())
        .sum::<f64>()
}

/// `|I|~_p` for a raw slice; negative entries signal corrupted action data.
pub fn action_norm(entries: &[f64], p: f64) -> Result<f64, SpectralError> {
    if let Some((i, &v)) = entries.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(SpectralError::NegativeAction { index: i + 1, value: v });
    }
    Ok(weighted_l1(entries, p))
}

/// `dΨ(0)`: `𝐯_k = (2πk)^{-1/2} (û_k, û_{-k})`.
pub fn linear_birkhoff(u: &Field) -> BirkhoffPoint {
    BirkhoffPoint {
        modes: u
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s = wavenumber(i + 1).powf(-0.5);
                [c[0] * s, c[1] * s]
            })
            .collect(),
    }
}

pub fn inverse_linear_birkhoff(v: &BirkhoffPoint) -> Field {
    Field {
        coeffs: v
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let s = wavenumber(i + 1).sqrt();
                [m[0] * s, m[1] * s]
            })
            .collect(),
    }
}

/// Polar angle of a pair in `[0, 2π)`, zero for the zero vector.
pub fn polar_angle(pair: [f64; 2]) -> f64 {
    if pair[0] == 0.0 && pair[1] == 0.0 {
        return 0.0;
    }
    let a = pair[1].atan2(pair[0]);
    if a < 0.0 {
        let w = a + TAU;
        // a tiny negative angle rounds to exactly 2π
        if w >= TAU {
            0.0
        } else {
            w
        }
    } else {
        a
    }
}

/// `I_j = ½|𝐯_j|²` and `φ_j = Arg 𝐯_j`.
pub fn actions_angles(v: &BirkhoffPoint) -> (ActionVector, Vec<f64>) {
    let actions = v
        .modes
        .iter()
        .map(|m| 0.5 * (m[0] * m[0] + m[1] * m[1]))
        .collect();
    let angles = v.modes.iter().map(|m| polar_angle(*m)).collect();
    (ActionVector { entries: actions }, angles)
}

/// Linearised actions `(2πk)^{-1}(û_k² + û_{-k}²)/2` of a field.
pub fn linear_actions(u: &Field, n: usize) -> ActionVector {
    let (a, _) = actions_angles(&linear_birkhoff(&project(u, n).resized(n)));
    a
}

/// `κ_k = (2πk)³`, the frequency of mode `k` of the linear Airy flow.
pub fn airy_frequency(k: usize) -> f64 {
    wavenumber(k).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn field_strategy(m: usize) -> impl Strategy<Value = Field> {
        proptest::collection::vec(
            (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| [a, b]),
            m,
        )
        .prop_map(|c| Field::from_pairs(c).unwrap())
    }

    #[test]
    fn sobolev_norm_examples() {
        assert_eq!(Field::zeros(4).sobolev_norm(2.0), 0.0);
        assert!((Field::basis(1, 4).sobolev_norm(0.0) - 1.0).abs() < 1e-15);
        let n = Field::basis(2, 4).sobolev_norm(1.0);
        assert!((n - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn h_norm_examples() {
        assert_eq!(BirkhoffPoint::zeros(3).h_norm(1.0), 0.0);
        let v = BirkhoffPoint::new(vec![[1.0, 0.0], [0.0, 0.0]]);
        assert!((v.h_norm(0.0) - TAU.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let u = &Field::basis(1, 4) + &Field::basis(3, 4);
        assert_eq!(project(&u, 2), Field::basis(1, 4));
        assert_eq!(project(&u, 4), u);
    }

    #[test]
    fn linear_birkhoff_examples() {
        let a = 0.3;
        let u = &Field::basis(1, 3) * a;
        let v = linear_birkhoff(&u);
        assert!((v.modes()[0][0] - a / TAU.sqrt()).abs() < 1e-15);
        let (i, _) = actions_angles(&v);
        assert!((i.get(1) - a * a / (4.0 * PI)).abs() < 1e-15);

        let v = linear_birkhoff(&Field::basis(-2, 3));
        assert_eq!(v.modes()[1][0], 0.0);
        assert!((v.modes()[1][1] - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn actions_angles_examples() {
        let v = BirkhoffPoint::new(vec![[0.0, 0.0], [0.0, 3.0]]);
        let (i, phi) = actions_angles(&v);
        assert_eq!((i.get(1), phi[0]), (0.0, 0.0));
        assert_eq!(i.get(2), 4.5);
        assert!((phi[1] - PI / 2.0).abs() < 1e-15);

        let (i, phi) = actions_angles(&BirkhoffPoint::new(vec![[1.0, 1.0]]));
        assert!((i.get(1) - 1.0).abs() < 1e-15);
        assert!((phi[0] - PI / 4.0).abs() < 1e-15);
        let tiny = polar_angle([1.0, -1e-300]);
        assert!((0.0..TAU).contains(&tiny));
    }

    #[test]
    fn action_norm_examples_and_rejection() {
        assert_eq!(action_norm(&[0.0, 0.0], 1.0).unwrap(), 0.0);
        assert!((action_norm(&[1.0], 0.0).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!(matches!(
            action_norm(&[1.0, -1e-3], 0.0),
            Err(SpectralError::NegativeAction { index: 2, .. })
        ));
        assert!(ActionVector::new(vec![0.1, -0.2]).is_err());
    }

    #[test]
    fn derivative_rules() {
        // ∂e_1 = -2π e_{-1}, ∂e_{-1} = 2π e_1
        let d = Field::basis(1, 2).derivative(1);
        assert!((d.coeff(-1) + TAU).abs() < 1e-14 && d.coeff(1) == 0.0);
        let d = Field::basis(-1, 2).derivative(1);
        assert!((d.coeff(1) - TAU).abs() < 1e-14);
        let u = Field::from_pairs(vec![[0.3, -0.1], [0.2, 0.5]]).unwrap();
        let back = u.derivative(1).antiderivative();
        assert!((&back - &u).sobolev_norm(0.0) < 1e-15);
    }

    #[test]
    fn eval_matches_basis_definition() {
        let u = Field::from_pairs(vec![[0.3, -0.1], [0.2, 0.5]]).unwrap();
        let x: f64 = 0.137;
        let direct = std::f64::consts::SQRT_2
            * (0.3 * (TAU * x).cos() - 0.1 * (TAU * x).sin() + 0.2 * (2.0 * TAU * x).cos()
                + 0.5 * (2.0 * TAU * x).sin());
        assert!((u.eval(x) - direct).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn action_norm_equals_squared_h_norm(u in field_strategy(12), p in -1.0f64..4.0) {
            let v = linear_birkhoff(&u);
            let (i, _) = actions_angles(&v);
            let lhs = i.norm(p);
            let rhs = v.h_norm(p).powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn projection_idempotent_and_contracting(u in field_strategy(10), m in 0usize..12, p in -1.0f64..3.0) {
            let pu = project(&u, m);
            prop_assert_eq!(project(&pu, m), pu.clone());
            prop_assert!(pu.sobolev_norm(p) <= u.sobolev_norm(p) * (1.0 + 1e-14));
        }

        #[test]
        fn tail_bound(u in field_strategy(16), m in 1usize..16, p0 in 0.0f64..2.0, dp in 0.0f64..2.0) {
            let p1 = p0 + dp;
            let lhs = (&u - &project(&u, m)).sobolev_norm(p0);
            let rhs = wavenumber(m).powf(-(p1 - p0)) * u.sobolev_norm(p1);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn linear_birkhoff_roundtrip(u in field_strategy(16)) {
            let back = inverse_linear_birkhoff(&linear_birkhoff(&u));
            for (a, b) in back.pairs().iter().zip(u.pairs()) {
                prop_assert!((a[0] - b[0]).abs() <= 1e-15 * b[0].abs().max(1e-300) * 4.0);
                prop_assert!((a[1] - b[1]).abs() <= 1e-15 * b[1].abs().max(1e-300) * 4.0);
            }
        }
    }

    #[test]
    fn tail_bound_equality_single_mode() {
        // a single mode above the cutoff attains the bound exactly
        let m = 3;
        let u = Field::basis(4, 6);
        let (p0, p1) = (0.5, 2.0);
        let lhs = (&u - &project(&u, m)).sobolev_norm(p0);
        let rhs_single = wavenumber(4).powf(-(p1 - p0)) * u.sobolev_norm(p1);
        assert!((lhs - rhs_single).abs() < 1e-12 * lhs);
        assert!(lhs <= wavenumber(m).powf(-(p1 - p0)) * u.sobolev_norm(p1));
    }
}

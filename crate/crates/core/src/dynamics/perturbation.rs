use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::spectral::{project, wavenumber, Collocation, Field};

use super::DynamicsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    None,
    Derivative,
    Antiderivative,
    DoubleAntiderivative,
    SmoothingQuadratic,
}

impl PerturbationKind {
    pub fn is_linear(self) -> bool {
        !matches!(self, PerturbationKind::SmoothingQuadratic)
    }

    /// Kinds whose flow keeps the perturbed equation Hamiltonian.
    pub fn is_hamiltonian(self) -> bool {
        matches!(
            self,
            PerturbationKind::None | PerturbationKind::Derivative | PerturbationKind::Antiderivative
        )
    }
}

/// Declarative perturbation `f` with its smoothing order `ζ₀`.
///
/// The only recognised parameter is `scale`, a constant factor on `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub zeta0: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, zeta0: f64) -> Result<Self, DynamicsError> {
        let s = Self {
            kind,
            zeta0,
            params: BTreeMap::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn none() -> Self {
        Self::new(PerturbationKind::None, 0.0).unwrap()
    }

    /// `f(u) = ∂_x u`.
    pub fn derivative() -> Self {
        Self::new(PerturbationKind::Derivative, 0.0).unwrap()
    }

    /// `f(u) = ∂_x^{-1} u`.
    pub fn antiderivative() -> Self {
        Self::new(PerturbationKind::Antiderivative, 1.0).unwrap()
    }

    /// `f(u) = ∂_x^{-2} u`.
    pub fn double_antiderivative() -> Self {
        Self::new(PerturbationKind::DoubleAntiderivative, 2.0).unwrap()
    }

    /// `f(u) = ∂_x^{-⌈ζ₀⌉}(u² - ∫u²)`.
    pub fn smoothing_quadratic(zeta0: f64) -> Result<Self, DynamicsError> {
        Self::new(PerturbationKind::SmoothingQuadratic, zeta0)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.params.insert("scale".into(), scale);
        self
    }

    pub fn scale(&self) -> f64 {
        self.params.get("scale").copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidPerturbation(msg));
        if !(self.zeta0 >= 0.0) || !self.zeta0.is_finite() {
            return bad(format!("zeta0 must be a finite nonnegative number, got {}", self.zeta0));
        }
        let ok = match self.kind {
            PerturbationKind::None => true,
            PerturbationKind::Derivative => self.zeta0 == 0.0,
            PerturbationKind::Antiderivative => self.zeta0 == 1.0,
            PerturbationKind::DoubleAntiderivative => self.zeta0 == 2.0,
            PerturbationKind::SmoothingQuadratic => self.zeta0 >= 2.0,
        };
        if !ok {
            return bad(format!(
                "zeta0 = {} is inconsistent with kind {:?}",
                self.zeta0, self.kind
            ));
        }
        for (k, v) in &self.params {
            if k != "scale" {
                return bad(format!("unknown perturbation parameter `{k}`"));
            }
            if !v.is_finite() {
                return bad(format!("parameter `{k}` must be finite"));
            }
        }
        Ok(())
    }

    /// Number of antiderivatives taken by the quadratic kind.
    fn quadratic_order(&self) -> u32 {
        self.zeta0.ceil() as u32
    }

    /// `ℙ_m f(u)` at the resolution of `u`.
    pub fn apply(&self, u: &Field) -> Field {
        if self.kind == PerturbationKind::SmoothingQuadratic {
            let m = u.m_max();
            let mut grid = Collocation::for_products(m, 2, m);
            let sq = square(&mut grid, u, m);
            return self.apply_with_square(u, &sq);
        }
        self.apply_linear(u)
    }

    fn apply_linear(&self, u: &Field) -> Field {
        let s = self.scale();
        let mut out = u.clone();
        for (i, c) in out.pairs_mut().iter_mut().enumerate() {
            let w = wavenumber(i + 1);
            let (a, b) = (c[0], c[1]);
            *c = match self.kind {
                PerturbationKind::None => [0.0, 0.0],
                PerturbationKind::Derivative => [s * w * b, -s * w * a],
                PerturbationKind::Antiderivative => [-s * b / w, s * a / w],
                PerturbationKind::DoubleAntiderivative => {
                    let r = -s / (w * w);
                    [r * a, r * b]
                }
                PerturbationKind::SmoothingQuadratic => unreachable!(),
            };
        }
        out
    }

    /// As [`Self::apply`], reusing a precomputed `ℙ_m(u²)` (mean removed).
    pub(crate) fn apply_with_square(&self, u: &Field, sq: &Field) -> Field {
        if self.kind != PerturbationKind::SmoothingQuadratic {
            return self.apply_linear(u);
        }
        let mut f = project(sq, u.m_max()).resized(u.m_max());
        for _ in 0..self.quadratic_order() {
            f = f.antiderivative();
        }
        f.scale(self.scale())
    }

    /// `Σ_{0<|i|≤m} ∂f_i/∂û_i` at `u`.
    pub fn divergence(&self, u: &Field, m: usize) -> f64 {
        let s = self.scale();
        match self.kind {
            PerturbationKind::None
            | PerturbationKind::Derivative
            | PerturbationKind::Antiderivative => 0.0,
            PerturbationKind::DoubleAntiderivative => {
                -2.0 * s * (1..=m).rev().map(|i| wavenumber(i).powi(-2)).sum::<f64>()
            }
            PerturbationKind::SmoothingQuadratic => {
                let base = project(u, m).resized(m);
                let h = 1e-6 * base.sobolev_norm(0.0).max(1.0);
                let mut grid = Collocation::for_products(m, 2, m);
                let mut acc = 0.0;
                for i in (0..m).rev() {
                    for slot in 0..2 {
                        let mut up = base.clone();
                        up.pairs_mut()[i][slot] += h;
                        let mut dn = base.clone();
                        dn.pairs_mut()[i][slot] -= h;
                        let fp = self.apply_with_square(&up, &square(&mut grid, &up, m));
                        let fm = self.apply_with_square(&dn, &square(&mut grid, &dn, m));
                        acc += (fp.pairs()[i][slot] - fm.pairs()[i][slot]) / (2.0 * h);
                    }
                }
                acc
            }
        }
    }
}

/// `ℙ_m(u²)` without its mean, exact when the grid resolves the product.
pub(crate) fn square(grid: &mut Collocation, u: &Field, m: usize) -> Field {
    let mut vals = vec![0.0; grid.len()];
    grid.to_grid(u, &mut vals);
    for v in vals.iter_mut() {
        *v *= *v;
    }
    grid.from_grid(&vals, m)
}

pub fn apply_perturbation(spec: &PerturbationSpec, u: &Field) -> Field {
    spec.apply(u)
}

pub fn divergence(spec: &PerturbationSpec, u: &Field, m: usize) -> f64 {
    spec.divergence(u, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn linear_kinds_on_basis_vectors() {
        let f = PerturbationSpec::antiderivative().apply(&Field::basis(1, 2));
        assert!((f.coeff(-1) - 1.0 / TAU).abs() < 1e-15 && f.coeff(1) == 0.0);
        let f = PerturbationSpec::double_antiderivative().apply(&Field::basis(1, 2));
        assert!((f.coeff(1) + TAU.powi(-2)).abs() < 1e-15 && f.coeff(-1) == 0.0);
        let f = PerturbationSpec::derivative().apply(&Field::basis(-1, 2));
        assert!((f.coeff(1) - TAU).abs() < 1e-14 && f.coeff(-1) == 0.0);
    }

    #[test]
    fn linear_kinds_match_field_calculus() {
        let u = Field::from_pairs(vec![[0.3, -0.2], [0.1, 0.4], [-0.05, 0.02]]).unwrap();
        let d = PerturbationSpec::derivative().apply(&u);
        assert!((&d - &u.derivative(1)).sobolev_norm(0.0) < 1e-14);
        let a = PerturbationSpec::antiderivative().apply(&u);
        assert!((&a.derivative(1) - &u).sobolev_norm(0.0) < 1e-14);
        let a2 = PerturbationSpec::double_antiderivative().with_scale(3.0).apply(&u);
        assert!((&a2.derivative(2) - &u.scale(3.0)).sobolev_norm(0.0) < 1e-14);
    }

    #[test]
    fn smoothing_quadratic_against_pointwise_square() {
        let u = Field::from_pairs(vec![[0.3, -0.2], [0.1, 0.4]]).unwrap();
        let spec = PerturbationSpec::smoothing_quadratic(2.0).unwrap();
        let f = spec.apply(&u);
        // ∂²f = ℙ_2(u² - mean), checked by brute-force projection onto e_{±1}, e_{±2}
        let d2 = f.derivative(2);
        let n = 4000;
        for k in 1..=2i64 {
            for sgn in [1i64, -1] {
                let idx = sgn * k;
                let e = Field::basis(idx, 2);
                let proj: f64 = (0..n)
                    .map(|j| {
                        let x = (j as f64 + 0.5) / n as f64;
                        u.eval(x).powi(2) * e.eval(x)
                    })
                    .sum::<f64>()
                    / n as f64;
                assert!((d2.coeff(idx) - proj).abs() < 1e-12, "mode {idx}");
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let u = Field::from_pairs(vec![[0.3, -0.2], [0.1, 0.4]]).unwrap();
        assert_eq!(PerturbationSpec::derivative().divergence(&u, 2), 0.0);
        assert_eq!(PerturbationSpec::antiderivative().divergence(&u, 2), 0.0);
        let d = PerturbationSpec::double_antiderivative().divergence(&u, 1);
        assert!((d + 2.0 * TAU.powi(-2)).abs() < 1e-15);
        assert!((d + 0.05066).abs() < 1e-5);
        let q = PerturbationSpec::smoothing_quadratic(2.0).unwrap();
        assert!(q.divergence(&Field::zeros(4), 4).abs() < 1e-12);
    }

    #[test]
    fn smoothing_quadratic_divergence_matches_exact_trace() {
        // ∂f_i/∂û_i for f = ∂^{-2}ℙ(u²): derivative of the square's coefficient along e_i
        // is 2⟨u e_i, e_i⟩, then scaled by -(2πk)^{-2}
        let u = Field::from_pairs(vec![[0.3, -0.2], [0.1, 0.4], [0.05, 0.0]]).unwrap();
        let m = 3;
        let q = PerturbationSpec::smoothing_quadratic(2.0).unwrap();
        let n = 4096;
        let mut exact = 0.0;
        for k in 1..=m {
            for sgn in [1i64, -1] {
                let e = Field::basis(sgn * k as i64, m);
                let pair: f64 = (0..n)
                    .map(|j| {
                        let x = j as f64 / n as f64;
                        2.0 * u.eval(x) * e.eval(x).powi(2)
                    })
                    .sum::<f64>()
                    / n as f64;
                exact += -pair / wavenumber(k).powi(2);
            }
        }
        assert!((q.divergence(&u, m) - exact).abs() < 1e-8);
    }

    #[test]
    fn spec_validation() {
        assert!(PerturbationSpec::new(PerturbationKind::Antiderivative, 2.0).is_err());
        assert!(PerturbationSpec::new(PerturbationKind::Derivative, 1.0).is_err());
        assert!(PerturbationSpec::smoothing_quadratic(1.5).is_err());
        let mut s = PerturbationSpec::derivative();
        s.params.insert("gain".into(), 1.0);
        assert!(s.validate().is_err());
        let json = serde_json::to_string(&PerturbationSpec::double_antiderivative()).unwrap();
        assert!(json.contains("double_antiderivative"));
    }

    #[test]
    fn zero_mean_preserved() {
        // the field type has no mean slot; the quadratic kind must drop ∫u² rather than alias it
        let u = Field::basis(1, 3);
        let f = PerturbationSpec::smoothing_quadratic(2.0).unwrap().apply(&u);
        // e_1² - 1 = e_2/√2
        assert!((f.coeff(2) + std::f64::consts::FRAC_1_SQRT_2 / wavenumber(2).powi(2)).abs() < 1e-15);
        assert!(f.coeff(1).abs() < 1e-15 && f.coeff(3).abs() < 1e-15);
    }
}

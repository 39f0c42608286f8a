use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Field;

/// Collocation view of a [`Field`] on `n` equispaced points `x_j = j/n`.
///
/// Owns its FFT plans and scratch; one instance per worker.
pub struct Collocation {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Collocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Collocation").field("n", &self.n).finish()
    }
}

impl Collocation {
    pub fn new(n: usize) -> Self {
        assert!(n >= 4, "collocation grid needs at least 4 points");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Grid that represents products of `degree` fields with `m` modes
    /// without aliasing into modes `<= keep`.
    pub fn for_products(m: usize, degree: usize, keep: usize) -> Self {
        Self::new((degree * m + keep + 1).next_power_of_two().max(8))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Highest mode the grid can hold.
    pub fn max_mode(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Grid values of `u`; modes above [`Self::max_mode`] are ignored.
    pub fn to_grid(&mut self, u: &Field, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        let zero = Complex64::new(0.0, 0.0);
        self.buf.iter_mut().for_each(|c| *c = zero);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (i, p) in u.pairs().iter().enumerate().take(self.max_mode()) {
            let k = i + 1;
            let c = Complex64::new(p[0] * r, -p[1] * r);
            self.buf[k] = c;
            self.buf[self.n - k] = c.conj();
        }
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.re;
        }
    }

    /// Coefficients `k = 1..=m` of the grid function; the mean is dropped.
    pub fn from_grid(&mut self, values: &[f64], m: usize) -> Field {
        let mut out = Field::zeros(m);
        self.from_grid_into(values, &mut out);
        out
    }

    pub fn from_grid_into(&mut self, values: &[f64], out: &mut Field) {
        debug_assert_eq!(values.len(), self.n);
        for (c, v) in self.buf.iter_mut().zip(values) {
            *c = Complex64::new(*v, 0.0);
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let s = std::f64::consts::SQRT_2 / self.n as f64;
        let kmax = self.max_mode();
        for (i, p) in out.pairs_mut().iter_mut().enumerate() {
            let k = i + 1;
            if k > kmax {
                *p = [0.0; 2];
            } else {
                let c = self.buf[k];
                *p = [c.re * s, -c.im * s];
            }
        }
    }

    /// Mean of the grid values; exact quadrature for band-limited
    /// integrands that the grid resolves.
    pub fn mean(values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_roundtrip_and_values() {
        let u = Field::from_pairs(vec![[0.3, -0.1], [0.0, 0.7], [0.2, 0.05]]).unwrap();
        let mut g = Collocation::new(16);
        let mut vals = vec![0.0; 16];
        g.to_grid(&u, &mut vals);
        for (j, v) in vals.iter().enumerate() {
            assert!((v - u.eval(j as f64 / 16.0)).abs() < 1e-14);
        }
        let back = g.from_grid(&vals, 3);
        assert!((&back - &u).sobolev_norm(0.0) < 1e-15);
    }

    #[test]
    fn products_are_exact_when_resolved() {
        // e_1² = 1 + cos 4πx = 1 + e_2/√2
        let mut g = Collocation::for_products(1, 2, 2);
        let n = g.len();
        let mut vals = vec![0.0; n];
        g.to_grid(&Field::basis(1, 1), &mut vals);
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        assert!((Collocation::mean(&sq) - 1.0).abs() < 1e-14);
        let f = g.from_grid(&sq, 2);
        assert!((f.coeff(2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!(f.coeff(1).abs() < 1e-14);
    }
}

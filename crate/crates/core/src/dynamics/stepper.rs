//! Integrating-factor RK4 for `u_t = -u_xxx + 6ℙ_m(uu_x) + εℙ_m f(u)`.
//!
//! The Airy part is applied exactly as a rotation of each coefficient pair;
//! the remaining terms go through the classical four stages.

use crate::spectral::{wavenumber, Collocation, Field};

use super::perturbation::{square, PerturbationSpec};

/// Cached pair rotations `exp(-h∂³)` and `exp(-h∂³/2)`.
struct Propagator {
    h: f64,
    full: Vec<(f64, f64)>,
    half: Vec<(f64, f64)>,
}

impl Propagator {
    fn new(m: usize, h: f64) -> Self {
        let table = |t: f64| {
            (1..=m)
                .map(|k| {
                    let (s, c) = (wavenumber(k).powi(3) * t).sin_cos();
                    (c, s)
                })
                .collect()
        };
        Self {
            h,
            full: table(h),
            half: table(0.5 * h),
        }
    }
}

fn rotate(u: &mut Field, table: &[(f64, f64)]) {
    for (p, &(c, s)) in u.pairs_mut().iter_mut().zip(table) {
        let (a, b) = (p[0], p[1]);
        *p = [a * c + b * s, -a * s + b * c];
    }
}

/// Exact Airy flow over fast time `t`.
pub fn airy_flow(u: &Field, t: f64) -> Field {
    let mut out = u.clone();
    let p = Propagator::new(u.m_max(), t);
    rotate(&mut out, &p.full);
    out
}

pub(crate) struct Stepper {
    m: usize,
    eps: f64,
    spec: PerturbationSpec,
    grid: Collocation,
    vals: Vec<f64>,
    prop: Option<Propagator>,
}

impl Stepper {
    pub fn new(m: usize, eps: f64, spec: PerturbationSpec, dealias: bool) -> Self {
        let n = if dealias {
            (3 * m + 1).next_power_of_two()
        } else {
            (2 * m + 2).next_power_of_two()
        }
        .max(8);
        Self {
            m,
            eps,
            spec,
            grid: Collocation::new(n),
            vals: vec![0.0; n],
            prop: None,
        }
    }

    pub fn grid_max_abs(&mut self, u: &Field) -> f64 {
        self.grid.to_grid(u, &mut self.vals);
        self.vals.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `6ℙ_m(uu_x) + εℙ_m f(u)`.
    pub fn nonlinear(&mut self, u: &Field) -> Field {
        let sq = square(&mut self.grid, u, self.m);
        let mut out = sq.derivative(1).scale(3.0);
        if self.eps != 0.0 && self.spec.kind != super::PerturbationKind::None {
            let f = self.spec.apply_with_square(u, &sq);
            out.axpy(self.eps, &f);
        }
        out
    }

    /// Full right-hand side including the linear term.
    pub fn rhs(&mut self, u: &Field) -> Field {
        let mut out = self.nonlinear(u);
        out += &u.derivative(3).scale(-1.0);
        out
    }

    pub fn step(&mut self, u: &Field, h: f64) -> Field {
        if self.prop.as_ref().map(|p| p.h) != Some(h) {
            self.prop = Some(Propagator::new(self.m, h));
        }
        let k1 = self.nonlinear(u);

        let mut eu_half = u.clone();
        rotate(&mut eu_half, &self.prop.as_ref().unwrap().half);

        let mut s = u.clone();
        s.axpy(0.5 * h, &k1);
        rotate(&mut s, &self.prop.as_ref().unwrap().half);
        let k2 = self.nonlinear(&s);

        let mut s = eu_half.clone();
        s.axpy(0.5 * h, &k2);
        let k3 = self.nonlinear(&s);

        let p = self.prop.as_ref().unwrap();
        let mut s = eu_half.clone();
        s.axpy(h, &k3);
        rotate(&mut s, &p.half);
        let k4 = self.nonlinear(&s);

        let p = self.prop.as_ref().unwrap();
        // u⁺ = E(h)u + h/6 [E(h)k1 + 2E(h/2)(k2 + k3) + k4]
        let mut mid = k2;
        mid.axpy(1.0, &k3);
        let mut acc = u.clone();
        acc.axpy(h / 6.0, &k1);
        rotate(&mut acc, &p.half);
        acc.axpy(h / 3.0, &mid);
        rotate(&mut acc, &p.half);
        acc.axpy(h / 6.0, &k4);
        acc
    }
}

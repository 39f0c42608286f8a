//! Polynomial conservation laws of KdV (`u_t = -u_xxx + 6uu_x`).
//!
//! Each density is a sum of monomials `c·Π_j ∂^{a_j}u`. Integrals and
//! gradients are evaluated by collocation on grids large enough that every
//! product is resolved exactly.

use crate::dynamics::PerturbationSpec;
use crate::spectral::{project, Collocation, Field};

use super::MeasureError;

struct Monomial {
    coef: f64,
    orders: &'static [u32],
}

const fn mono(coef: f64, orders: &'static [u32]) -> Monomial {
    Monomial { coef, orders }
}

const J0: &[Monomial] = &[mono(0.5, &[0, 0])];
const J1: &[Monomial] = &[mono(0.5, &[1, 1]), mono(1.0, &[0, 0, 0])];
const J2: &[Monomial] = &[
    mono(0.5, &[2, 2]),
    mono(5.0, &[0, 1, 1]),
    mono(2.5, &[0, 0, 0, 0]),
];
const J3: &[Monomial] = &[
    mono(0.5, &[3, 3]),
    mono(7.0, &[0, 2, 2]),
    mono(35.0, &[0, 0, 1, 1]),
    mono(7.0, &[0, 0, 0, 0, 0]),
];
const J4: &[Monomial] = &[
    mono(0.5, &[4, 4]),
    mono(9.0, &[0, 3, 3]),
    mono(-10.0, &[2, 2, 2]),
    mono(63.0, &[0, 0, 2, 2]),
    mono(-17.5, &[1, 1, 1, 1]),
    mono(210.0, &[0, 0, 0, 1, 1]),
    mono(21.0, &[0, 0, 0, 0, 0, 0]),
];

/// Highest supported order of the conservation-law hierarchy.
pub const MAX_ORDER: usize = 4;

fn density(n: usize) -> Result<&'static [Monomial], MeasureError> {
    match n {
        0 => Ok(J0),
        1 => Ok(J1),
        2 => Ok(J2),
        3 => Ok(J3),
        4 => Ok(J4),
        _ => Err(MeasureError::UnsupportedOrder(n)),
    }
}

fn degree(terms: &[Monomial]) -> usize {
    terms.iter().map(|t| t.orders.len()).max().unwrap_or(0)
}

fn max_order(terms: &[Monomial]) -> u32 {
    terms.iter().flat_map(|t| t.orders.iter().copied()).max().unwrap_or(0)
}

fn grid_derivatives(grid: &mut Collocation, u: &Field, top: u32) -> Vec<Vec<f64>> {
    (0..=top)
        .map(|a| {
            let mut v = vec![0.0; grid.len()];
            grid.to_grid(&u.derivative(a), &mut v);
            v
        })
        .collect()
}

/// `𝒥_n(u)` for `n ≤ 4`; `𝒥_n = ½||u||_n² + (lower-order polynomial terms)`.
pub fn conservation_functional(u: &Field, n: usize) -> Result<f64, MeasureError> {
    let terms = density(n)?;
    let m = u.m_max();
    let mut grid = Collocation::new((degree(terms) * m + 1).next_power_of_two().max(8));
    let d = grid_derivatives(&mut grid, u, max_order(terms));
    let npts = grid.len();
    let mut total = 0.0;
    // the quadratic term is the largest for smooth data; sum it last
    for t in terms.iter().rev() {
        let acc: f64 = (0..npts)
            .map(|x| t.orders.iter().map(|&a| d[a as usize][x]).product::<f64>())
            .sum();
        total += t.coef * acc / npts as f64;
    }
    Ok(total)
}

/// `L²` gradient of `𝒥_n` at `u`, resolved on modes `1..=out_m`.
pub fn functional_gradient(u: &Field, n: usize, out_m: usize) -> Result<Field, MeasureError> {
    let terms = density(n)?;
    let m = u.m_max();
    let deg = degree(terms);
    let mut grid = Collocation::new(((deg - 1) * m + out_m + 1).next_power_of_two().max(8));
    let d = grid_derivatives(&mut grid, u, max_order(terms));
    let npts = grid.len();
    let mut grad = Field::zeros(out_m);
    let mut prod = vec![0.0; npts];
    for t in terms {
        for i in 0..t.orders.len() {
            for (x, p) in prod.iter_mut().enumerate() {
                let mut v = t.coef;
                for (j, &a) in t.orders.iter().enumerate() {
                    if j != i {
                        v *= d[a as usize][x];
                    }
                }
                *p = v;
            }
            let a = t.orders[i];
            let g = grid.from_grid(&prod, out_m).derivative(a);
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            grad.axpy(sign, &g);
        }
    }
    Ok(grad)
}

/// `(ℰ_n, ℰ_n^f)` for the `m`-mode Galerkin system, where along its flow in
/// slow time `d𝒥_n/dτ = ε^{-1}ℰ_n + ℰ_n^f`:
///
/// `ℰ_n = -6⟨∇𝒥_n(u), ℙ_m^⊥(uu_x)⟩`, `ℰ_n^f = ⟨∇𝒥_n(u), ℙ_m f(u)⟩`.
pub fn galerkin_drift(
    u_m: &Field,
    m: usize,
    n: usize,
    spec: &PerturbationSpec,
) -> Result<(f64, f64), MeasureError> {
    let um = project(u_m, m).resized(m);
    let grad = functional_gradient(&um, n, 2 * m)?;
    let mut grid = Collocation::for_products(m, 2, 2 * m);
    let mut vals = vec![0.0; grid.len()];
    grid.to_grid(&um, &mut vals);
    for v in vals.iter_mut() {
        *v *= *v;
    }
    // uu_x = ½∂(u²), keep only modes m+1..=2m
    let high = grid.from_grid(&vals, 2 * m).derivative(1).scale(0.5);
    let mut e = 0.0;
    for k in (m + 1..=2 * m).rev() {
        let (g, h) = (grad.pair(k), high.pair(k));
        e += g[0] * h[0] + g[1] * h[1];
    }
    let ef = if spec.kind == crate::dynamics::PerturbationKind::None {
        0.0
    } else {
        grad.dot(&spec.apply(&um))
    };
    Ok((-6.0 * e, ef))
}

//! Time integration of KdV, its perturbations and Galerkin truncations.
//!
//! Everything runs in fast time `t` with an exact Airy propagator. A
//! trajectory records slow time `τ = εt` when `ε > 0`, and `t` itself for the
//! unperturbed flow.

mod perturbation;
mod stepper;
mod trajectory;

pub use perturbation::{apply_perturbation, divergence, PerturbationKind, PerturbationSpec};
pub use stepper::airy_flow;
pub use trajectory::{Provenance, Trajectory, TRAJECTORY_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{project, wavenumber, Field};
use stepper::Stepper;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("step unstable at tau = {tau} after {halvings} step halvings")]
    StepUnstable {
        tau: f64,
        halvings: u32,
        partial: Box<Trajectory>,
    },
    #[error("field unresolved at tau = {tau}: tail energy fraction {tail:.3e}")]
    Unresolved {
        tau: f64,
        tail: f64,
        partial: Box<Trajectory>,
    },
    #[error("invalid evolution parameters: {0}")]
    InvalidParams(String),
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("trajectory io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory format: {0}")]
    Format(String),
}

impl DynamicsError {
    /// Samples computed before a numerical failure.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            DynamicsError::StepUnstable { partial, .. } | DynamicsError::Unresolved { partial, .. } => {
                Some(partial)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// End time in fast time `t`.
    Fast(f64),
    /// End time in slow time `τ = εt`.
    Slow(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub eps: f64,
    /// Fast-time step; `None` picks one from the nonlinear CFL rule,
    /// capped at `dt_max`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Cap on the automatic step. The CFL rule alone allows steps far too
    /// long for accuracy at small amplitude.
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub horizon: Horizon,
    /// Galerkin dimension. `None` uses the resolution of the initial field.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "default_true")]
    pub dealias: bool,
    /// Largest accepted `L²` growth factor over one step.
    #[serde(default = "default_growth")]
    pub growth_limit: f64,
    /// Largest accepted energy fraction in the top third of the modes.
    #[serde(default)]
    pub tail_tol: Option<f64>,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
}

fn default_true() -> bool {
    true
}
fn default_growth() -> f64 {
    1.5
}
fn default_halvings() -> u32 {
    12
}
fn default_dt_max() -> f64 {
    1e-3
}

/// Courant number for `6·max|u|·2πm·dt`.
pub const CFL: f64 = 0.5;

impl EvolveParams {
    pub fn fast(eps: f64, t_end: f64) -> Self {
        Self {
            eps,
            dt: None,
            dt_max: default_dt_max(),
            horizon: Horizon::Fast(t_end),
            m: None,
            dealias: true,
            growth_limit: default_growth(),
            tail_tol: None,
            max_halvings: default_halvings(),
        }
    }

    pub fn slow(eps: f64, tau_end: f64) -> Self {
        Self {
            horizon: Horizon::Slow(tau_end),
            ..Self::fast(eps, 0.0)
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_tail_tol(mut self, tol: f64) -> Self {
        self.tail_tol = Some(tol);
        self
    }

    /// Clock used for trajectory samples: `τ` when `ε > 0`, else `t`.
    pub fn is_slow_clock(&self) -> bool {
        self.eps > 0.0
    }

    /// Horizon in the trajectory clock.
    pub fn clock_end(&self) -> f64 {
        match (self.horizon, self.is_slow_clock()) {
            (Horizon::Fast(t), true) => t * self.eps,
            (Horizon::Fast(t), false) => t,
            (Horizon::Slow(tau), _) => tau,
        }
    }

    /// Fast-time length of a span of the trajectory clock.
    pub fn to_fast(&self, span: f64) -> f64 {
        if self.is_slow_clock() {
            span / self.eps
        } else {
            span
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParams(m.into()));
        if !(0.0..=1.0).contains(&self.eps) {
            return bad("eps must lie in [0, 1]");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad("dt must be positive");
            }
        }
        if !(self.dt_max > 0.0) || !self.dt_max.is_finite() {
            return bad("dt_max must be positive");
        }
        match self.horizon {
            Horizon::Fast(t) if !(t > 0.0) || !t.is_finite() => return bad("horizon must be positive"),
            Horizon::Slow(t) if !(t > 0.0) || !t.is_finite() => return bad("horizon must be positive"),
            Horizon::Slow(_) if self.eps == 0.0 => {
                return bad("a slow-time horizon needs eps > 0")
            }
            _ => {}
        }
        if self.m == Some(0) {
            return bad("Galerkin dimension must be at least 1");
        }
        if !(self.growth_limit > 1.0) {
            return bad("growth_limit must exceed 1");
        }
        Ok(())
    }
}

/// `V(u) = -u_xxx + 6ℙ(uu_x)` at the resolution of `u`, dealiased.
pub fn kdv_rhs(u: &Field) -> Field {
    Stepper::new(u.m_max(), 0.0, PerturbationSpec::none(), true).rhs(u)
}

/// Right-hand side of the Galerkin system in fast time,
/// `-u_xxx + 6ℙ_m(uu_x) + εℙ_m f(u)`.
pub fn galerkin_rhs(u: &Field, m: usize, eps: f64, spec: &PerturbationSpec) -> Field {
    let um = project(u, m).resized(m);
    Stepper::new(m, eps, spec.clone(), true).rhs(&um)
}

/// Full-resolution flow; identical to [`galerkin_evolve`] with `m = m_max`.
pub fn evolve(
    u0: &Field,
    params: &EvolveParams,
    spec: &PerturbationSpec,
    sample_stride: f64,
) -> Result<Trajectory, DynamicsError> {
    let m = params.m.unwrap_or(u0.m_max());
    galerkin_evolve(u0, m, params, spec, sample_stride)
}

/// Flow of the `m`-mode Galerkin system, sampled every `sample_stride` of
/// the trajectory clock (plus the horizon itself).
pub fn galerkin_evolve(
    u0: &Field,
    m: usize,
    params: &EvolveParams,
    spec: &PerturbationSpec,
    sample_stride: f64,
) -> Result<Trajectory, DynamicsError> {
    params.validate()?;
    spec.validate()?;
    if m == 0 {
        return Err(DynamicsError::InvalidParams("Galerkin dimension must be at least 1".into()));
    }
    if !(sample_stride > 0.0) {
        return Err(DynamicsError::InvalidParams("sample stride must be positive".into()));
    }
    let mut run_params = params.clone();
    run_params.m = Some(m);
    let mut u = project(u0, m).resized(m);
    let mut traj = Trajectory::new(run_params.clone(), spec.clone());
    let end = params.clock_end();
    let mut stepper = Stepper::new(m, params.eps, spec.clone(), params.dealias);
    let tail_cut = (2 * m).div_ceil(3);

    let check_tail = |u: &Field, tau: f64, traj: &Trajectory| -> Result<(), DynamicsError> {
        if let Some(tol) = params.tail_tol {
            let tail = u.tail_fraction(tail_cut);
            if tail > tol {
                return Err(DynamicsError::Unresolved {
                    tau,
                    tail,
                    partial: Box::new(traj.clone()),
                });
            }
        }
        Ok(())
    };

    check_tail(&u, 0.0, &traj)?;
    traj.push(0.0, u.clone());
    let n_strides = ((end / sample_stride) * (1.0 + 1e-12)).floor() as usize;
    let mut halvings = 0u32;
    let mut idx = 0usize;
    loop {
        let tau0 = idx as f64 * sample_stride;
        let tau1 = if idx < n_strides {
            (idx + 1) as f64 * sample_stride
        } else if end - tau0 > 1e-12 * end {
            end
        } else {
            break;
        };
        let span = params.to_fast(tau1 - tau0);
        let dt = match params.dt {
            Some(dt) => dt,
            None => {
                let amax = stepper.grid_max_abs(&u);
                if amax > 0.0 {
                    (CFL / (6.0 * amax * wavenumber(m))).min(params.dt_max)
                } else {
                    span
                }
            }
        };
        let mut nsub = ((span / dt).ceil() as u64).max(1) << halvings;
        let mut h = span / nsub as f64;
        let mut done = 0u64;
        let start = u.clone();
        while done < nsub {
            let n0 = u.sobolev_norm(0.0);
            let next = stepper.step(&u, h);
            let n1 = next.sobolev_norm(0.0);
            let ok = n1.is_finite() && n1 <= params.growth_limit * n0 + 1e-300;
            if ok {
                u = next;
                done += 1;
            } else {
                halvings += 1;
                if halvings > params.max_halvings {
                    return Err(DynamicsError::StepUnstable {
                        tau: tau0,
                        halvings,
                        partial: Box::new(traj),
                    });
                }
                log::debug!("step rejected at clock {tau0}, halving to {}", h / 2.0);
                // restart the stride with twice as many substeps
                u = start.clone();
                nsub *= 2;
                h = span / nsub as f64;
                done = 0;
            }
        }
        check_tail(&u, tau1, &traj)?;
        traj.push(tau1, u.clone());
        idx += 1;
        if tau1 >= end {
            break;
        }
    }
    Ok(traj)
}

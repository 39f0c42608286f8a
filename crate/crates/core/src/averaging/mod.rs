//! Averaging experiments: rates of the actions under a perturbation, their
//! angle averages, the averaged equation, and diagnostics of the perturbed
//! flow against it.

mod compare;
mod diagnostics;
mod rates;
mod solve;
mod weyl;

pub use compare::{compare, ComparisonReport, CompareParams};
pub use diagnostics::{
    quasi_invariance_rate, resonance_occupation, write_rate_csv, OccupationReport, RateSample,
    ResonanceZone,
};
pub use rates::{
    action_rate, action_rates, estimate_averaged_field, lipschitz_quotient, rescale_to_actions,
    AveragedField, AveragingParams, RateEstimate, RateModel, NUMERICAL_FLOOR,
};
pub use solve::{solve_averaged, solve_averaged_with, AveragedSolution, SolveOptions};
pub use weyl::{phase_average, weyl_report, WeylReport, WeylStatistic};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::hill::HillError;
use crate::measures::MeasureError;
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum AveragingError {
    #[error("representative is resonant: {0}")]
    ResonantRepresentative(String),
    #[error("averaged field evaluation failed: {0}")]
    EvaluatorFailure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Hill(#[from] HillError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Experiment-facing estimators: the linear reflection model and its phase
//! fit, Lorentzian peak fits, Gaussian quadrature-record synthesis, and
//! multivariate cumulant estimation.

mod cumulants;
mod lorentz;
mod reflection;
mod sampling;

pub use cumulants::{
    cumulants_to_moments, estimate_cumulants, moments_to_cumulants, CumulantEntry, CumulantTable,
    MomentKey,
};
pub use lorentz::{fit_lorentzian, LorentzFit};
pub use reflection::{
    fit_reflection, phase_winding, reflection_model, FitResult, ReflectionTrace,
};
pub use sampling::{sample_gaussian_output, QuadratureSamples};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("fit failed to reduce the residual (final {residual:.3e})")]
    FitDiverged { residual: f64 },
    #[error("fit is ambiguous: second minimum at residual {:.3e} vs best {:.3e}", alternate.residual, best.residual)]
    Ambiguous {
        best: Box<FitResult>,
        alternate: Box<FitResult>,
    },
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("need at least {needed} samples for cumulant estimation, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("covariance is unphysical: smallest symplectic eigenvalue {min_symplectic:.6} < 1/2")]
    UnphysicalCovariance { min_symplectic: f64 },
    #[error("detection efficiency must lie in (0, 1], got {eta}")]
    InvalidEfficiency { eta: f64 },
    #[error("moment ({0},{1},{2},{3}) missing from input")]
    MissingMoment(u8, u8, u8, u8),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("csv: {0}")]
    Csv(String),
}

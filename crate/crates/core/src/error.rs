use thiserror::Error;

use crate::equilibria::EquilibriumKind;
use crate::integrator::Trajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter {field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("state component {index} is negative or not finite: {value}")]
    NegativeState { index: usize, value: f64 },
    #[error("unknown parameter name `{0}` (expected one of a1, a2, d1, d2, m1, m2)")]
    UnknownParameter(String),
    #[error("{0} is undefined for this parameter set")]
    UndefinedBreakEven(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriaError {
    #[error("Routh-Hurwitz record requested for a {0:?} equilibrium; only interior equilibria qualify")]
    NotInterior(EquilibriumKind),
}

#[derive(Debug, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64, partial: Option<Box<Trajectory>> },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64, partial: Option<Box<Trajectory>> },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

impl IntegrationError {
    /// The part of the trajectory computed before the failure, if any.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            IntegrationError::StepSizeUnderflow { partial, .. }
            | IntegrationError::NonFinite { partial, .. } => partial.as_deref(),
            _ => None,
        }
    }

    pub(crate) fn with_partial(self, tr: Trajectory) -> Self {
        match self {
            IntegrationError::StepSizeUnderflow { t, h, .. } => {
                IntegrationError::StepSizeUnderflow { t, h, partial: Some(Box::new(tr)) }
            }
            IntegrationError::NonFinite { t, .. } => {
                IntegrationError::NonFinite { t, partial: Some(Box::new(tr)) }
            }
            other => other,
        }
    }
}

#[derive(Debug, Error)]
pub enum CycleError {
    #[error("no planar limit cycle predicted: {0}")]
    NoCyclePredicted(String),
    #[error("section returns did not converge after {returns} returns (residual {residual:e})")]
    NotConverged { returns: usize, residual: f64 },
    #[error("cycle sample spacing {spacing} exceeds max_step {max_step}")]
    InterpolationGap { spacing: f64, max_step: f64 },
    #[error("M33 from the variational system ({ode}) and from quadrature ({quadrature}) disagree by {rel:e} relative")]
    Inconsistent { ode: f64, quadrature: f64, rel: f64 },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<crate::ode::StepFailure> for CycleError {
    fn from(f: crate::ode::StepFailure) -> Self {
        CycleError::Integration(f.into())
    }
}

#[derive(Debug, Error)]
pub enum UsageError {
    #[error("{0}")]
    Invalid(String),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Usage(#[from] UsageError),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(UsageError::Invalid(msg.into()))
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Integration(e) => !matches!(e, IntegrationError::InvalidConfig(_)),
            Error::Cycle(e) => matches!(
                e,
                CycleError::NotConverged { .. }
                    | CycleError::Inconsistent { .. }
                    | CycleError::Integration(_)
            ),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

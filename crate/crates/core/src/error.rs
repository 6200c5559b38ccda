use std::fmt;

use serde::Serialize;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("steady state is not unique: null space has dimension {dimension}")]
    NonUniqueSteadyState { dimension: usize },
    #[error("singular system: {0}")]
    Singular(String),
    #[error(
        "step size underflow at t = {t} (h = {h:e}); try smaller Rabi-to-linewidth ratios \
         or the exact-diagonalization path"
    )]
    Stiffness { t: f64, h: f64 },
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("no positive solution: {0}")]
    NoPositiveSolution(String),
    #[error("fit window rejected: {0}")]
    FitWindow(String),
    #[error("scan failed: every one of {cells} cells failed")]
    ScanFailure { cells: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Errors caused by user input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownKey(_)
                | Error::InvalidParams(_)
                | Error::InvalidDimension(_)
                | Error::DimensionMismatch { .. }
                | Error::Domain(_)
                | Error::Resource(_)
        )
    }

    /// Short machine-readable name of the variant.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Domain(_) => "domain",
            Error::InvalidParams(_) => "invalid_params",
            Error::Config(_) => "config",
            Error::UnknownKey(_) => "unknown_key",
            Error::Resource(_) => "resource",
            Error::NonUniqueSteadyState { .. } => "non_unique_steady_state",
            Error::Singular(_) => "singular",
            Error::Stiffness { .. } => "stiffness",
            Error::Degenerate(_) => "degenerate",
            Error::NoPositiveSolution(_) => "no_positive_solution",
            Error::FitWindow(_) => "fit_window",
            Error::ScanFailure { .. } => "scan_failure",
            Error::Numerical(_) => "numerical",
        }
    }
}

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Population in the top two Fock levels of a mode exceeds the tail bound.
    Truncation { mode: usize, tail: f64 },
    /// `omega_a < eta_a * nu`: internal dynamics too slow for the perturbative rates.
    ValidityGate { omega_a: f64, bound: f64 },
    /// Exponential model does not describe the data.
    PoorFit { relative_residual: f64 },
    /// Mean phonon number is not monotone over the fitted window.
    NonMonotone { window_start: f64 },
    /// Heating dominates (`a_plus >= a_minus`); there is no stationary phonon number.
    Heating { a_plus: f64, a_minus: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Truncation { mode, tail } => {
                write!(f, "Fock truncation: mode {mode} holds {tail:.3e} in its top two levels")
            }
            Warning::ValidityGate { omega_a, bound } => {
                write!(f, "omega_a = {omega_a} is below eta_a * nu = {bound}; closed-form rates are not valid")
            }
            Warning::PoorFit { relative_residual } => {
                write!(f, "exponential fit is poor: residual is {:.1}% of the amplitude", 100.0 * relative_residual)
            }
            Warning::NonMonotone { window_start } => {
                write!(f, "mean phonon number is not monotone after t = {window_start}")
            }
            Warning::Heating { a_plus, a_minus } => {
                write!(f, "heating dominates: a_plus = {a_plus:e} >= a_minus = {a_minus:e}")
            }
        }
    }
}

impl Warning {
    pub(crate) fn emit(self) -> Self {
        log::warn!("{self}");
        self
    }
}

/// A value together with the warnings raised while computing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assessed<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Assessed<T> {
    pub fn new(value: T, warnings: Vec<Warning>) -> Self {
        Self { value, warnings }
    }
}

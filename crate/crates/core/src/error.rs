use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("non-finite amplitude for mode {0}")]
    NonFiniteAmplitude(String),

    #[error("superposition needs at least one term")]
    EmptySuperposition,

    #[error("input mode {label} is outside the supported range: {reason}")]
    InputOutOfRange { label: String, reason: String },

    #[error("unstable cavity: g1*g2 = {0} is outside [0, 1]")]
    UnstableCavity(f64),

    #[error("quadrature grid under-resolved: {0}")]
    UnderResolvedGrid(String),

    #[error("no bright ring found in intensity grid")]
    NoBrightRing,

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),

    #[error("visibility undefined: {0}")]
    Visibility(String),

    #[error("arm delay {delay_ns} ns is not within tolerance of a bin multiple of {period_ns} ns")]
    ArmDelayMismatch { delay_ns: f64, period_ns: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NonFiniteAmplitude(_) => "non_finite_amplitude",
            Error::EmptySuperposition => "empty_superposition",
            Error::InputOutOfRange { .. } => "input_out_of_range",
            Error::UnstableCavity(_) => "unstable_cavity",
            Error::UnderResolvedGrid(_) => "under_resolved_grid",
            Error::NoBrightRing => "no_bright_ring",
            Error::ZeroDiagonal(_) => "zero_diagonal",
            Error::Visibility(_) => "visibility",
            Error::ArmDelayMismatch { .. } => "arm_delay_mismatch",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}

/// Checks that `value` is a finite number in `[0, 1]`.
pub(crate) fn check_unit(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::param(field, format!("{value} is not in [0, 1]")))
    }
}

pub(crate) fn check_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            field,
            format!("{value} must be finite and > 0"),
        ))
    }
}

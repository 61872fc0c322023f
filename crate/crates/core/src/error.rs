use thiserror::Error;

use crate::kernels::Kernel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pilot kernel unsuitable: {0} is not twice differentiable")]
    PilotKernelUnsuitable(Kernel),

    #[error("degenerate sample: moment and IQR scale estimates are both zero")]
    DegenerateSample,

    #[error("degenerate curvature: R(f'') estimate vanishes at pilot bandwidth {g}")]
    DegenerateCurvature { g: f64 },

    #[error("inflection point: second derivative is zero")]
    InflectionPoint,

    #[error("non-finite objective value {value} at h = {h}")]
    NonFiniteObjective { h: f64, value: f64 },

    #[error("rejection sampling gave up after {attempts} attempts")]
    RejectionLimit { attempts: usize },

    #[error("grid [{grid_lo}, {grid_hi}] does not cover [{need_lo}, {need_hi}]")]
    InsufficientCoverage {
        grid_lo: f64,
        grid_hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("unknown model id {0} (expected 1-6)")]
    UnknownModel(u32),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable cause, used in `key=value` diagnostics.
    pub fn key(&self) -> &'static str {
        match self {
            Error::InvalidSample(_) => "invalid_sample",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::PilotKernelUnsuitable(_) => "pilot_kernel_unsuitable",
            Error::DegenerateSample => "degenerate_sample",
            Error::DegenerateCurvature { .. } => "degenerate_curvature",
            Error::InflectionPoint => "inflection_point",
            Error::NonFiniteObjective { .. } => "non_finite_objective",
            Error::RejectionLimit { .. } => "rejection_limit",
            Error::InsufficientCoverage { .. } => "insufficient_coverage",
            Error::UnknownModel(_) => "unknown_model",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Whether the failure came out of the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSample
                | Error::DegenerateCurvature { .. }
                | Error::InflectionPoint
                | Error::NonFiniteObjective { .. }
                | Error::RejectionLimit { .. }
                | Error::InsufficientCoverage { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

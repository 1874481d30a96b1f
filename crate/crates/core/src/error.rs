use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("thermal grid undefined at zero temperature")]
    ZeroTemperatureGrid,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("propagator pole: {0}")]
    Pole(&'static str),

    #[error("tau = {tau} outside [0, {beta}]; reduce modulo beta first")]
    TauOutOfRange { tau: f64, beta: f64 },

    #[error("ground-state sector degenerate (mu = 0)")]
    DegenerateGroundState,

    #[error("momentum must be discretized in a periodic way: {0}")]
    OffGridMomentum(String),

    #[error("overall momentum conservation delta function violated: momenta sum to {0}")]
    MomentumNotConserved(i64),

    #[error("winding sum cannot reach tolerance {target:e} within {max_winding} terms (achievable tail bound {achievable:e})")]
    WindingCutoff {
        max_winding: usize,
        target: f64,
        achievable: f64,
    },

    #[error("internal consistency check `{check}` failed: {detail}")]
    Consistency { check: &'static str, detail: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty eigensystem")]
    EmptyEigenSystem,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn consistency(check: &'static str, detail: impl Into<String>) -> Self {
        Error::Consistency {
            check,
            detail: detail.into(),
        }
    }
}

use alloc::string::String;

/// Errors raised by the model, controller and simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Pitch is within the guard band of +-pi/2 where the Euler-rate map is singular.
    #[error("attitude is singular: pitch {pitch} rad is within the gimbal-lock guard")]
    SingularAttitude { pitch: f64 },

    #[error("allocation matrix is not invertible (condition number {condition:e})")]
    NonInvertibleAllocation { condition: f64 },

    #[error("numerical divergence at t = {t} s: state magnitude exceeded {limit:e}")]
    NumericalDivergence { t: f64, limit: f64 },

    /// An interaction model produced a wrench above the configured cap.
    #[error("environment force {magnitude} N exceeds the cap of {cap} N at t = {t} s")]
    EnvironmentWrenchCap { t: f64, magnitude: f64, cap: f64 },

    /// A parameter violates a type invariant; the message names the invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

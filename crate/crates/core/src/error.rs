use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qualification profile {0} is outside [0, 1]")]
    InvalidProfile(f64),

    #[error("group share {0} is outside (0, 1)")]
    InvalidShare(f64),

    #[error("utilities must satisfy u0 <= 0 <= u1 (got u0 = {u0}, u1 = {u1})")]
    InvalidUtility { u0: f64, u1: f64 },

    #[error("selection probability {value} for {entry} is outside [0, 1]")]
    InvalidPolicy { entry: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("declared Lipschitz constant {declared} for {map} is exceeded by sampled ratio {observed}")]
    LipschitzViolation {
        map: &'static str,
        declared: f64,
        observed: f64,
    },

    #[error("contraction constant {0} is not below 1; no exponential bound is available")]
    NotContractive(f64),

    #[error("AA case switched from {from} to {to} at t = {time}")]
    CaseSwitch {
        time: f64,
        from: &'static str,
        to: &'static str,
    },

    #[error("step-halving check failed: endpoint difference {difference:e} exceeds {tolerance:e}")]
    StepHalving { difference: f64, tolerance: f64 },

    #[error("stereotype error {eps} for group {group} is invalid at profile {profile}: {reason}")]
    InvalidStereotype {
        group: char,
        eps: f64,
        profile: f64,
        reason: &'static str,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

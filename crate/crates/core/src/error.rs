use thiserror::Error;

use crate::sensing::ProfileViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("transmission time must be non-negative, got {0} s")]
    NegativeDuration(f64),

    #[error("sensing quantum index {k} outside 1..={m}")]
    InstantOutOfRange { k: usize, m: usize },

    #[error("no built-in sensing profile for {0} instants (only 10 is built in)")]
    UnsupportedProfileLength(usize),

    #[error("invalid sensing profile: {}", format_violations(.0))]
    InvalidProfile(Vec<ProfileViolation>),

    #[error("length mismatch: expected {expected} sensing instants, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{what} must lie in [0, 1], got {value}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("primary queue unstable: arrival rate {lambda} >= service rate {mu}")]
    UnstableQueue { lambda: f64, mu: f64 },

    #[error("delay cap must exceed one slot, got {0}")]
    DelayCapTooSmall(f64),

    #[error("grid oracle supports at most {max} free parameters, variant has {free}")]
    TooManyFreeParameters { free: usize, max: usize },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
}

fn format_violations(v: &[ProfileViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

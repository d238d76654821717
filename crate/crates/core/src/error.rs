use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("model `{0}` is already registered")]
    DuplicateModel(String),
    #[error("model `{0}` is not registered")]
    UnknownModel(String),
    #[error("model description must not be empty")]
    EmptyDescription,
    #[error("port {0} is outside 1..=65535")]
    InvalidPort(u32),
    #[error("no models are registered")]
    EmptyFleet,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("token list must not be empty")]
    EmptyTokens,
    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("sequences must have equal length >= 2 (got {left} and {right})")]
    BadSequences { left: usize, right: usize },
    #[error("request `{0}` is already queued")]
    DuplicateRequest(String),
    #[error("request `{0}` failed: target model is no longer available")]
    RoutingUnavailable(String),
    #[error("no accesses recorded yet")]
    NoAccesses,
    #[error("loading model `{0}` failed")]
    LoadFailed(String),
    #[error("profile `{profile}` is invalid: {reason}")]
    InvalidProfile { profile: String, reason: String },
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("request `{0}` is unknown or already rated")]
    UnknownRequest(String),
    #[error("rating {0} is outside 1..=5")]
    InvalidRating(u8),
    #[error("percentile of an empty sequence")]
    EmptyInput,
}

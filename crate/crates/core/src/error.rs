use alloc::string::String;

/// Errors raised by the models. Outcomes such as a failed vote or a failed
/// escalation are values, not errors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no eligible planner")]
    NoPlanner,
    #[error("policy {policy} cannot resolve {target}")]
    InvalidPolicy { policy: String, target: String },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

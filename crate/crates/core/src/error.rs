use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid party count {0}: at least 2 parties are required (at most {max})", max = crate::quantum::MAX_PARTIES)]
    InvalidPartyCount(usize),

    #[error("unsupported party count {0}: the protocol needs at least 3 parties")]
    UnsupportedPartyCount(usize),

    #[error("visibility {0} is outside [0, 1]")]
    InvalidVisibility(f64),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("invalid setting: party {party} has no option {index}")]
    InvalidSetting { party: usize, index: usize },

    #[error("round is not a key round")]
    InvalidRound,

    #[error("correlator for setting tuple {0} is missing")]
    IncompleteCorrelators(usize),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("protocol order violation: {0}")]
    ProtocolOrderViolation(String),

    #[error("invalid product-state strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid attack spec: {0}")]
    InvalidSpec(String),

    #[error("size limit: {what} supports at most {max} parties, got {n}")]
    SizeLimit { what: &'static str, max: usize, n: usize },

    #[error("convex-combination attack undefined for visibility {0} below 1/sqrt(2)")]
    AttackUndefined(f64),

    #[error("probability {0} is outside [0, 1]")]
    Domain(f64),

    #[error("transcript carries no eavesdropper guesses")]
    NotCcTranscript,

    #[error("invalid session config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Unified error type for the whole analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (graph JSON, report JSON, CLI values).
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally invalid graph: self-loop, out-of-range endpoint, duplicate edge.
    #[error("invalid graph: {0}")]
    Validation(String),

    /// A generator was asked for an unsupported size (too few or too many links).
    #[error("invalid size: {0}")]
    InvalidSize(String),

    /// A numeric parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Enumerating the independent sets would exceed the configured cap.
    #[error("state space too large: more than {cap} feasible states")]
    StateSpaceTooLarge { cap: usize },

    /// Link index not present in the graph.
    #[error("unknown link index {0}")]
    UnknownLink(usize),

    /// Truncation level beyond the largest feasible-state cardinality.
    #[error("column {level} out of range (max cardinality {max})")]
    ColumnOutOfRange { level: usize, max: usize },

    /// Birth–death chain queried at a level outside its column range.
    #[error("level {level} outside chain range {lo}..={hi}")]
    LevelOutOfRange { level: usize, lo: usize, hi: usize },

    /// The dense linear solver hit a (numerically) singular system.
    #[error("singular linear system")]
    SingularSystem,

    /// Passage time requested between nested traps (defined to be zero).
    #[error("traps are nested: one contains the other")]
    NestedTraps,

    /// Simulation configuration violates its invariants.
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    /// Too few visits/samples for a meaningful empirical estimate.
    #[error("insufficient samples: {got} (need at least {need})")]
    InsufficientSamples { got: usize, need: usize },

    /// Threshold set violates its invariants (all must be strictly positive).
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
}

pub type Result<T> = std::result::Result<T, Error>;

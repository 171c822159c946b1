//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Malformed scenario, profile, belief, or other caller-supplied data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A conditioning event (observed action or own mode) has probability
    /// zero under the current belief/prescription pair.
    #[error("impossible observation: {0}")]
    ImpossibleObservation(String),

    /// Forward belief enumeration exceeded the configured state cap.
    #[error(
        "state explosion at t={time}: {stored} stored beliefs exceed the cap of {cap}; \
         use a coarser dedup_rounding or raise max_belief_states"
    )]
    StateExplosion { time: usize, stored: usize, cap: usize },

    /// A solved table is missing an entry it should contain by construction.
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    /// Execution asked for a belief outside the solved policy's support,
    /// typically a scenario/policy mismatch.
    #[error("unreachable belief at t={time}: {detail}")]
    UnreachableBelief { time: usize, detail: String },

    /// The requested operation is not defined for this configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Exact evaluation visited more history branches than the cap allows.
    #[error(
        "history explosion: enumeration exceeded {cap} branches; \
         use Monte-Carlo evaluation instead"
    )]
    HistoryExplosion { cap: u64 },
}

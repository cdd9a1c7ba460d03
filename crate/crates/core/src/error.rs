use thiserror::Error;

use crate::topology::NodeId;

/// Errors surfaced by the simulator and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("node {0} has no alive neighbor to take over")]
    NoAliveNeighbor(NodeId),

    #[error("no route from {src} to {dst}")]
    Unreachable { src: NodeId, dst: NodeId },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("event at {at} ms is earlier than the clock ({now} ms)")]
    PastEvent { at: u64, now: u64 },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("node {0} is blacklisted")]
    Blacklisted(NodeId),

    #[error("node {0} is already admitted")]
    DuplicateAdmission(NodeId),

    #[error("unknown signature rule {0}")]
    UnknownRule(u32),

    #[error("malformed rule: {0}")]
    MalformedRule(String),

    #[error("stale policy version {got} for scope {scope} (current {current})")]
    StalePolicy {
        scope: String,
        got: u64,
        current: u64,
    },

    #[error("metrics reports are not comparable: {0}")]
    ScaleMismatch(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

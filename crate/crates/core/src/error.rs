use thiserror::Error;

use crate::update::ClusterId;

/// Errors surfaced by the replication engine and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid container id `{0}`: expected `table:columnFamily`")]
    InvalidContainerId(String),

    #[error("sigma percentage {0} outside (0, 100]")]
    InvalidSigmaPercent(f64),

    #[error("total update count must be positive")]
    EmptyWorkload,

    #[error("duplicate update ({origin}, {sequence}) offered to the unified cache")]
    DuplicateUpdate { origin: ClusterId, sequence: u64 },

    #[error("block already open on this session")]
    BlockAlreadyOpen,

    #[error("no block open on this session")]
    NoOpenBlock,

    #[error("session bound to cluster {expected} used against cluster {actual}")]
    WrongCluster { expected: ClusterId, actual: ClusterId },

    #[error("batch addressed to cluster {destination} delivered to cluster {node}")]
    MisaddressedBatch { destination: ClusterId, node: ClusterId },

    #[error("no link {0} -> {1}")]
    UnknownLink(ClusterId, ClusterId),

    #[error("livelock: event cap of {cap} exceeded at t={now}ms")]
    Livelock { cap: u64, now: u64 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("malformed batch encoding: {0}")]
    Wire(String),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

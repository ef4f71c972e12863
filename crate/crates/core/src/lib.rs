//! Geo-replication engine that bounds how far replicas may drift, per data
//! container, along three dimensions: time (θ), pending update count (σ) and
//! numeric value divergence (ν). Also a deterministic discrete-event
//! simulator that runs several clusters against each other.
//!
//! ## Examples
//!
//! - **`sigma_bound`** - a source shipping every third write
//! - **`vector_bounds`** - time, count and divergence bounds one at a time
//! - **`unified_cache`** - per-container queues and block-closure drains
//! - **`consistency_blocks`** - IMMEDIATE and ANY blocks
//! - **`lww_convergence`** - last-writer-wins under reordered delivery
//! - **`master_master_ring`** - two masters, no echo, equal digests
//! - **`simnet_partition`** - delivery deferred across a partition
//! - **`zipfian_workload`** - key popularity and the read/write interleave
//! - **`bandwidth_peaks`** - bursty writes, plain vs bounded shipping
//! - **`wire_trace`** - batch encoding and trace files
//!
//! ```bash
//! cargo run --release -p geoqod --example bandwidth_peaks
//! ```

pub mod blocks;
pub mod cache;
pub mod cluster;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod qod;
pub mod replication;
pub mod scenario;
pub mod simnet;
pub mod update;
pub mod wire;
pub mod workload;

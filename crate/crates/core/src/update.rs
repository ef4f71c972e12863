//! Pending-edit records: the unit the write-ahead log, the unified cache and
//! shipment batches carry.

use std::fmt;
use std::sync::Arc;

use bytes::Bytes;

use crate::qod::ContainerId;

/// Identifier of a simulated data-center replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Identifier of a consistency block. Zero is reserved for "no block" on the
/// wire, so ids are always non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u64);

impl BlockId {
    /// Block ids carry the issuing cluster in the upper 24 bits so they stay
    /// unique across a whole topology.
    pub fn new(cluster: ClusterId, counter: u64) -> Self {
        debug_assert!(counter > 0 && counter < (1 << 40));
        BlockId(((cluster.0 as u64 + 1) << 40) | counter)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Globally unique identity of an update: `(origin_cluster, origin_sequence)`.
pub type UpdateId = (ClusterId, u64);

/// Fixed per-update wire overhead in bytes:
/// container length (u16) + key length (u16) + value length (u32) +
/// timestamp (u64) + origin (u32) + sequence (u64) + block id (u64).
pub const UPDATE_HEADER_BYTES: u64 = 2 + 2 + 4 + 8 + 4 + 8 + 8;

/// One pending edit.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub container: ContainerId,
    pub key: Arc<str>,
    pub value: Bytes,
    /// The value parsed as a decimal number, when it is one.
    pub numeric_value: Option<f64>,
    pub wall_timestamp: u64,
    pub origin_cluster: ClusterId,
    pub origin_sequence: u64,
    /// Encoded length on the wire; see [`UPDATE_HEADER_BYTES`].
    pub size_bytes: u64,
    pub block_id: Option<BlockId>,
}

impl Update {
    pub fn new(
        container: ContainerId,
        key: impl Into<Arc<str>>,
        value: impl Into<Bytes>,
        wall_timestamp: u64,
        origin_cluster: ClusterId,
        origin_sequence: u64,
        block_id: Option<BlockId>,
    ) -> Self {
        let key = key.into();
        let value = value.into();
        let numeric_value = parse_numeric(&value);
        let size_bytes = UPDATE_HEADER_BYTES + container.as_str().len() as u64 + key.len() as u64 + value.len() as u64;
        Update {
            container,
            key,
            value,
            numeric_value,
            wall_timestamp,
            origin_cluster,
            origin_sequence,
            size_bytes,
            block_id,
        }
    }

    pub fn id(&self) -> UpdateId {
        (self.origin_cluster, self.origin_sequence)
    }
}

fn parse_numeric(value: &[u8]) -> Option<f64> {
    let text = std::str::from_utf8(value).ok()?;
    let parsed: f64 = text.trim().parse().ok()?;
    parsed.is_finite().then_some(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cid() -> ContainerId {
        "usertable:family".parse().unwrap()
    }

    #[test]
    fn size_counts_header_container_key_and_value() {
        let u = Update::new(cid(), "user1", vec![0u8; 100], 0, ClusterId(1), 1, None);
        assert_eq!(u.size_bytes, 36 + 16 + 5 + 100);
    }

    #[test]
    fn numeric_payloads_are_parsed() {
        let u = Update::new(cid(), "k", "111.5", 0, ClusterId(1), 1, None);
        assert_eq!(u.numeric_value, Some(111.5));
        let u = Update::new(cid(), "k", vec![0xffu8, 0x00], 0, ClusterId(1), 2, None);
        assert_eq!(u.numeric_value, None);
        let u = Update::new(cid(), "k", "NaN", 0, ClusterId(1), 3, None);
        assert_eq!(u.numeric_value, None);
    }

    #[test]
    fn block_ids_are_distinct_across_clusters() {
        assert_ne!(BlockId::new(ClusterId(1), 1), BlockId::new(ClusterId(2), 1));
        assert_ne!(BlockId::new(ClusterId(0), 1).0, 0);
    }
}

//! Consistency blocks: client-delimited groups of writes that replicate as
//! one unit.
//!
//! Writes inside a block hit the local store and WAL right away. Only their
//! replication is deferred: nothing of the block reaches the replication
//! sources until [`ClientSession::end_consistent_block`].

use bytes::Bytes;

use crate::cluster::ClusterNode;
use crate::error::{Error, Result};
use crate::qod::ContainerId;
use crate::replication::ShipmentBatch;
use crate::update::{BlockId, ClusterId, Update};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockMode {
    /// Ship the whole block as soon as it ends.
    Immediate,
    /// Ship the whole block the first time any involved container's bound
    /// trips.
    Any,
}

#[derive(Debug)]
struct OpenBlock {
    id: BlockId,
    mode: BlockMode,
    updates: Vec<Update>,
}

/// A client connection to one cluster.
#[derive(Debug)]
pub struct ClientSession {
    cluster: ClusterId,
    next_block: u64,
    open: Option<OpenBlock>,
}

impl ClientSession {
    pub fn new(cluster: ClusterId) -> Self {
        ClientSession { cluster, next_block: 1, open: None }
    }

    pub fn cluster(&self) -> ClusterId {
        self.cluster
    }

    pub fn open_block(&self) -> Option<(BlockId, BlockMode)> {
        self.open.as_ref().map(|b| (b.id, b.mode))
    }

    pub fn start_consistent_block(&mut self, mode: BlockMode) -> Result<BlockId> {
        if self.open.is_some() {
            return Err(Error::BlockAlreadyOpen);
        }
        let id = BlockId::new(self.cluster, self.next_block);
        self.next_block += 1;
        self.open = Some(OpenBlock { id, mode, updates: Vec::new() });
        Ok(id)
    }

    /// Writes locally; outside a block the write also enters the replication
    /// path and may complete batches, which are returned.
    pub fn put(
        &mut self,
        node: &mut ClusterNode,
        cid: &ContainerId,
        key: &str,
        value: impl Into<Bytes>,
        now: u64,
    ) -> Result<Vec<ShipmentBatch>> {
        self.check(node)?;
        match self.open.as_mut() {
            Some(block) => {
                let update = node.new_update(cid.clone(), key, value, now, Some(block.id));
                node.write_local(&update);
                block.updates.push(update);
                Ok(Vec::new())
            }
            None => {
                let update = node.new_update(cid.clone(), key, value, now, None);
                node.apply_local(update, now)
            }
        }
    }

    /// Like [`put`](Self::put) with the container in `table:columnFamily`
    /// text form.
    pub fn put_str(
        &mut self,
        node: &mut ClusterNode,
        container: &str,
        key: &str,
        value: impl Into<Bytes>,
        now: u64,
    ) -> Result<Vec<ShipmentBatch>> {
        let cid: ContainerId = container.parse()?;
        self.put(node, &cid, key, value, now)
    }

    pub fn end_consistent_block(&mut self, node: &mut ClusterNode, now: u64) -> Result<Vec<ShipmentBatch>> {
        self.check(node)?;
        let block = self.open.take().ok_or(Error::NoOpenBlock)?;
        if block.updates.is_empty() {
            return Ok(Vec::new());
        }
        node.release_block(block.id, block.mode, &block.updates, now)
    }

    fn check(&self, node: &ClusterNode) -> Result<()> {
        if node.id() != self.cluster {
            return Err(Error::WrongCluster { expected: self.cluster, actual: node.id() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qod::VectorK;
    use crate::replication::{BoundsTable, ReplicationSource, ShippingMode, Trigger};
    use std::sync::Arc;

    const A: ClusterId = ClusterId(1);
    const B: ClusterId = ClusterId(2);

    fn cid(s: &str) -> ContainerId {
        s.parse().unwrap()
    }

    fn node(bounds: BoundsTable) -> ClusterNode {
        let mut node = ClusterNode::new(A);
        node.add_source(ReplicationSource::new(A, B, Arc::new(bounds), ShippingMode::Qod { theta_tick_ms: 100 }));
        node
    }

    #[test]
    fn start_opens_block() {
        let mut s = ClientSession::new(A);
        let id = s.start_consistent_block(BlockMode::Immediate).unwrap();
        assert_eq!(s.open_block(), Some((id, BlockMode::Immediate)));
        let mut s2 = ClientSession::new(A);
        let id2 = s2.start_consistent_block(BlockMode::Any).unwrap();
        assert_eq!(s2.open_block().unwrap().1, BlockMode::Any);
        assert_eq!(id, id2, "ids are per session counter");
    }

    #[test]
    fn nested_start_is_rejected() {
        let mut s = ClientSession::new(A);
        s.start_consistent_block(BlockMode::Any).unwrap();
        assert!(matches!(s.start_consistent_block(BlockMode::Any), Err(Error::BlockAlreadyOpen)));
    }

    #[test]
    fn end_without_start_is_rejected() {
        let mut n = node(BoundsTable::default());
        let mut s = ClientSession::new(A);
        assert!(matches!(s.end_consistent_block(&mut n, 0), Err(Error::NoOpenBlock)));
    }

    #[test]
    fn put_outside_block_on_immediate_container_ships() {
        let mut n = node(BoundsTable::uniform(VectorK::immediate()));
        let mut s = ClientSession::new(A);
        let out = s.put(&mut n, &cid("t:a"), "k", "v", 0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 1);
    }

    #[test]
    fn malformed_container_is_rejected() {
        let mut n = node(BoundsTable::default());
        let mut s = ClientSession::new(A);
        assert!(matches!(s.put_str(&mut n, "nocolon", "k", "v", 0), Err(Error::InvalidContainerId(_))));
    }

    #[test]
    fn immediate_block_is_held_then_ships_whole() {
        let mut n = node(BoundsTable::uniform(VectorK::immediate()));
        let mut s = ClientSession::new(A);
        s.start_consistent_block(BlockMode::Immediate).unwrap();
        assert!(s.put(&mut n, &cid("t:a"), "k1", "v", 0).unwrap().is_empty());
        assert!(s.put(&mut n, &cid("t:b"), "k2", "v", 0).unwrap().is_empty());
        // Locally visible already.
        assert!(n.get(&cid("t:a"), "k1").is_some());
        let out = s.end_consistent_block(&mut n, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 2);
        assert_eq!(out[0].trigger, Trigger::ImmediateBlock);
        let src = n.source(B).unwrap();
        assert_eq!(src.state(&cid("t:a")).unwrap().actual_sigma, 0);
        assert_eq!(src.state(&cid("t:b")).unwrap().actual_sigma, 0);
    }

    #[test]
    fn any_block_ships_when_smaller_bound_trips() {
        let bounds =
            BoundsTable::default().with(cid("t:a"), VectorK::with_sigma(3)).with(cid("t:b"), VectorK::with_sigma(5));
        let mut n = node(bounds);
        let mut s = ClientSession::new(A);
        s.start_consistent_block(BlockMode::Any).unwrap();
        s.put(&mut n, &cid("t:a"), "x", "1", 0).unwrap();
        s.put(&mut n, &cid("t:b"), "y", "1", 0).unwrap();
        s.put(&mut n, &cid("t:b"), "z", "1", 0).unwrap();
        assert!(s.end_consistent_block(&mut n, 0).unwrap().is_empty());
        assert!(s.put(&mut n, &cid("t:a"), "x", "2", 1).unwrap().is_empty());
        let out = s.put(&mut n, &cid("t:a"), "x", "3", 2).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 5);
        assert_eq!(out[0].block_ids().len(), 1);
    }

    #[test]
    fn any_block_with_immediate_member_ships_at_end() {
        let bounds =
            BoundsTable::default().with(cid("t:a"), VectorK::with_sigma(30)).with(cid("t:b"), VectorK::immediate());
        let mut n = node(bounds);
        let mut s = ClientSession::new(A);
        s.start_consistent_block(BlockMode::Any).unwrap();
        s.put(&mut n, &cid("t:a"), "x", "1", 0).unwrap();
        s.put(&mut n, &cid("t:b"), "y", "1", 0).unwrap();
        let out = s.end_consistent_block(&mut n, 0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].trigger, Trigger::AnyBlock);
        assert_eq!(out[0].len(), 2);
    }

    #[test]
    fn session_rejects_foreign_cluster() {
        let mut other = ClusterNode::new(B);
        let mut s = ClientSession::new(A);
        assert!(matches!(s.put(&mut other, &cid("t:a"), "k", "v", 0), Err(Error::WrongCluster { .. })));
    }
}

//! A simulated data-center replica: point store, write-ahead log and one
//! replication source per outgoing peer.
//!
//! Remote batches are resolved last-writer-wins on `(wall_timestamp,
//! origin_cluster)`; equal timestamps go to the larger cluster id, and
//! same-millisecond writes from one origin keep program order through the
//! origin sequence.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use bytes::Bytes;
use sha2::{Digest, Sha256};

use crate::blocks::BlockMode;
use crate::error::{Error, Result};
use crate::qod::ContainerId;
use crate::replication::{ReplicationSource, ShipmentBatch};
use crate::update::{BlockId, ClusterId, Update, UpdateId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredCell {
    pub value: Bytes,
    /// Timestamp of the originating write.
    pub wall_timestamp: u64,
    pub origin_cluster: ClusterId,
    pub origin_sequence: u64,
}

impl StoredCell {
    fn version(&self) -> (u64, ClusterId, u64) {
        (self.wall_timestamp, self.origin_cluster, self.origin_sequence)
    }
}

#[derive(Debug, Clone)]
pub struct WalEntry {
    /// Local sequence, contiguous from 1.
    pub sequence: u64,
    pub update: Update,
}

/// Outcome of applying one remote batch.
#[derive(Debug, Default)]
pub struct ApplyReport {
    pub applied: u64,
    /// Older than the stored cell under last-writer-wins.
    pub discarded: u64,
    /// Already seen `(origin, sequence)` pairs.
    pub duplicates: u64,
    /// Updates that originated at this very node.
    pub echoes: u64,
    /// Batches produced by re-offering applied updates to onward peers.
    pub outgoing: Vec<ShipmentBatch>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub local_writes: u64,
    pub remote_applied: u64,
    pub remote_discarded: u64,
    pub duplicates: u64,
    pub echoes_received: u64,
}

#[derive(Debug)]
pub struct ClusterNode {
    id: ClusterId,
    store: BTreeMap<ContainerId, BTreeMap<Arc<str>, StoredCell>>,
    wal: Vec<WalEntry>,
    next_origin_sequence: u64,
    seen: HashSet<UpdateId>,
    sources: BTreeMap<ClusterId, ReplicationSource>,
    stats: NodeStats,
}

impl ClusterNode {
    pub fn new(id: ClusterId) -> Self {
        ClusterNode {
            id,
            store: BTreeMap::new(),
            wal: Vec::new(),
            next_origin_sequence: 1,
            seen: HashSet::new(),
            sources: BTreeMap::new(),
            stats: NodeStats::default(),
        }
    }

    pub fn id(&self) -> ClusterId {
        self.id
    }

    pub fn add_source(&mut self, source: ReplicationSource) {
        assert_eq!(source.source(), self.id, "replication source belongs to another cluster");
        self.sources.insert(source.peer(), source);
    }

    pub fn peers(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.sources.keys().copied()
    }

    pub fn source(&self, peer: ClusterId) -> Option<&ReplicationSource> {
        self.sources.get(&peer)
    }

    pub fn sources(&self) -> impl Iterator<Item = &ReplicationSource> {
        self.sources.values()
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    pub fn wal(&self) -> &[WalEntry] {
        &self.wal
    }

    pub fn get(&self, cid: &ContainerId, key: &str) -> Option<&StoredCell> {
        self.store.get(cid)?.get(key)
    }

    pub fn cell_count(&self) -> usize {
        self.store.values().map(BTreeMap::len).sum()
    }

    /// Stamps a fresh local update with the next origin sequence.
    pub fn new_update(
        &mut self,
        cid: ContainerId,
        key: &str,
        value: impl Into<Bytes>,
        now: u64,
        block: Option<BlockId>,
    ) -> Update {
        let seq = self.next_origin_sequence;
        self.next_origin_sequence += 1;
        Update::new(cid, key, value, now, self.id, seq, block)
    }

    /// Applies a local write to the store and WAL without offering it for
    /// replication.
    pub(crate) fn write_local(&mut self, update: &Update) {
        debug_assert_eq!(update.origin_cluster, self.id);
        self.seen.insert(update.id());
        self.stats.local_writes += 1;
        self.put_cell(update);
        self.append_wal(update.clone());
    }

    /// Local write: stored unconditionally, logged, then offered to every
    /// peer's replication source.
    pub fn apply_local(&mut self, update: Update, now: u64) -> Result<Vec<ShipmentBatch>> {
        if update.origin_cluster != self.id {
            return Err(Error::WrongCluster { expected: self.id, actual: update.origin_cluster });
        }
        self.write_local(&update);
        let mut out = Vec::new();
        for source in self.sources.values_mut() {
            out.extend(source.offer(update.clone(), now)?);
        }
        Ok(out)
    }

    /// Convenience local write outside any block.
    pub fn put(
        &mut self,
        cid: &ContainerId,
        key: &str,
        value: impl Into<Bytes>,
        now: u64,
    ) -> Result<Vec<ShipmentBatch>> {
        let update = self.new_update(cid.clone(), key, value, now, None);
        self.apply_local(update, now)
    }

    /// Hands a finished consistency block to every replication source.
    pub(crate) fn release_block(
        &mut self,
        block: BlockId,
        mode: BlockMode,
        updates: &[Update],
        now: u64,
    ) -> Result<Vec<ShipmentBatch>> {
        let mut out = Vec::new();
        for source in self.sources.values_mut() {
            out.extend(source.offer_block(block, mode, updates, now)?);
        }
        Ok(out)
    }

    /// Applies a remote batch in one step. Updates that win are logged and
    /// re-offered to the other peers with their origin preserved; relayed
    /// block members are re-offered together as an `Any` block.
    pub fn apply_remote_batch(&mut self, batch: &ShipmentBatch, now: u64) -> Result<ApplyReport> {
        if batch.destination_cluster != self.id {
            return Err(Error::MisaddressedBatch { destination: batch.destination_cluster, node: self.id });
        }
        let mut report = ApplyReport::default();
        let mut onward: Vec<Update> = Vec::new();
        for update in &batch.updates {
            if update.origin_cluster == self.id {
                report.echoes += 1;
                continue;
            }
            if !self.seen.insert(update.id()) {
                report.duplicates += 1;
                continue;
            }
            if self.put_cell_if_newer(update) {
                report.applied += 1;
                self.append_wal(update.clone());
                onward.push(update.clone());
            } else {
                report.discarded += 1;
            }
        }
        self.stats.remote_applied += report.applied;
        self.stats.remote_discarded += report.discarded;
        self.stats.duplicates += report.duplicates;
        self.stats.echoes_received += report.echoes;

        let relays = self.sources.values_mut().filter(|s| s.peer() != batch.source_cluster);
        for source in relays {
            let mut released: HashSet<BlockId> = HashSet::new();
            for update in &onward {
                match update.block_id {
                    None => report.outgoing.extend(source.offer(update.clone(), now)?),
                    Some(block) if released.insert(block) => {
                        let members: Vec<Update> =
                            onward.iter().filter(|u| u.block_id == Some(block)).cloned().collect();
                        report.outgoing.extend(source.offer_block(block, BlockMode::Any, &members, now)?);
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(report)
    }

    pub fn theta_tick(&mut self, now: u64) -> Vec<ShipmentBatch> {
        self.sources.values_mut().flat_map(|s| s.theta_tick(now)).collect()
    }

    pub fn poll(&mut self, now: u64) -> Vec<ShipmentBatch> {
        self.sources.values_mut().filter_map(|s| s.poll(now)).collect()
    }

    pub fn final_drain(&mut self, now: u64) -> Vec<ShipmentBatch> {
        self.sources.values_mut().flat_map(|s| s.final_drain(now)).collect()
    }

    /// Delivery acknowledgement for a batch this node shipped.
    pub fn acknowledge(&mut self, batch: &ShipmentBatch) {
        if let Some(source) = self.sources.get_mut(&batch.destination_cluster) {
            source.acknowledge(batch);
        }
    }

    pub fn pending_total(&self) -> usize {
        self.sources.values().map(|s| s.cache().pending_total()).sum()
    }

    pub fn has_theta_pending(&self) -> bool {
        self.sources.values().any(ReplicationSource::has_theta_pending)
    }

    /// SHA-256 over every cell in canonical `(container, key)` order, hex
    /// encoded. Insertion order does not matter.
    pub fn store_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (cid, cells) in &self.store {
            for (key, cell) in cells {
                for field in [cid.as_str().as_bytes(), key.as_bytes(), &cell.value[..]] {
                    hasher.update((field.len() as u64).to_be_bytes());
                    hasher.update(field);
                }
                hasher.update(cell.wall_timestamp.to_be_bytes());
                hasher.update(cell.origin_cluster.0.to_be_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Writes the WAL as text, one record per line:
    /// `sequence origin origin_sequence timestamp container block key_hex value_hex`
    /// separated by single spaces, with `-` for "no block".
    pub fn dump_wal(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for entry in &self.wal {
            let u = &entry.update;
            let block = u.block_id.map_or_else(|| "-".to_owned(), |b| b.0.to_string());
            writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                entry.sequence,
                u.origin_cluster,
                u.origin_sequence,
                u.wall_timestamp,
                u.container,
                block,
                hex::encode(u.key.as_bytes()),
                hex::encode(&u.value),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    fn append_wal(&mut self, update: Update) {
        let sequence = self.wal.len() as u64 + 1;
        self.wal.push(WalEntry { sequence, update });
    }

    fn put_cell(&mut self, update: &Update) {
        let cell = StoredCell {
            value: update.value.clone(),
            wall_timestamp: update.wall_timestamp,
            origin_cluster: update.origin_cluster,
            origin_sequence: update.origin_sequence,
        };
        self.store.entry(update.container.clone()).or_default().insert(update.key.clone(), cell);
    }

    fn put_cell_if_newer(&mut self, update: &Update) -> bool {
        let incoming = (update.wall_timestamp, update.origin_cluster, update.origin_sequence);
        let newer = self.get(&update.container, &update.key).is_none_or(|cell| incoming > cell.version());
        if newer {
            self.put_cell(update);
        }
        newer
    }
}

//! The unified cache: per-peer pending updates grouped by container.
//!
//! Within a container updates stay in arrival order. Draining is closed over
//! consistency blocks: if a drained container holds a member of some block,
//! every container holding another member of that block is drained in the
//! same step, so a block never leaves in pieces.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::qod::ContainerId;
use crate::update::{BlockId, Update, UpdateId};

#[derive(Debug, Default)]
pub struct UnifiedCache {
    queues: BTreeMap<ContainerId, VecDeque<Update>>,
    block_index: HashMap<BlockId, BTreeSet<(ContainerId, UpdateId)>>,
    total_pending_bytes: u64,
    seen: HashSet<UpdateId>,
    coalesce: bool,
    enqueued: u64,
    drained: u64,
    coalesced: u64,
}

/// Updates removed from the cache by one drain.
#[derive(Debug, Default)]
pub struct Drain {
    /// Containers in canonical order, each in arrival order.
    pub updates: Vec<Update>,
    /// Every container the drain emptied.
    pub containers: Vec<ContainerId>,
}

impl Drain {
    pub fn total_bytes(&self) -> u64 {
        self.updates.iter().map(|u| u.size_bytes).sum()
    }
}

impl UnifiedCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// A cache that keeps only the newest pending value per key. Updates
    /// belonging to a block are never dropped.
    pub fn with_coalescing() -> Self {
        UnifiedCache { coalesce: true, ..Self::default() }
    }

    pub fn enqueue(&mut self, update: Update) -> Result<()> {
        if !self.seen.insert(update.id()) {
            return Err(Error::DuplicateUpdate { origin: update.origin_cluster, sequence: update.origin_sequence });
        }
        self.enqueued += 1;
        let queue = self.queues.entry(update.container.clone()).or_default();
        if self.coalesce {
            if let Some(pos) = queue.iter().position(|old| old.block_id.is_none() && old.key == update.key) {
                let old = queue.remove(pos).expect("position is in range");
                self.total_pending_bytes -= old.size_bytes;
                self.coalesced += 1;
            }
        }
        if let Some(block) = update.block_id {
            self.block_index.entry(block).or_default().insert((update.container.clone(), update.id()));
        }
        self.total_pending_bytes += update.size_bytes;
        queue.push_back(update);
        Ok(())
    }

    /// Drains `cid` and, transitively, every container sharing a block with
    /// what is drained. Returns `None` when the container has nothing queued.
    pub fn drain_container(&mut self, cid: &ContainerId) -> Option<Drain> {
        if self.pending_count(cid) == 0 {
            return None;
        }
        Some(self.drain_closure([cid.clone()]))
    }

    /// Drains the block-closure of the given containers.
    pub fn drain_closure(&mut self, seeds: impl IntoIterator<Item = ContainerId>) -> Drain {
        let mut work: Vec<ContainerId> = seeds.into_iter().collect();
        let mut taken: BTreeMap<ContainerId, VecDeque<Update>> = BTreeMap::new();
        while let Some(cid) = work.pop() {
            if taken.contains_key(&cid) {
                continue;
            }
            let queue = self.queues.remove(&cid).unwrap_or_default();
            for update in &queue {
                let Some(block) = update.block_id else { continue };
                if let Some(members) = self.block_index.remove(&block) {
                    work.extend(members.into_iter().map(|(c, _)| c).filter(|c| !taken.contains_key(c) && *c != cid));
                }
            }
            taken.insert(cid, queue);
        }
        let mut drain = Drain::default();
        for (cid, queue) in taken {
            if queue.is_empty() {
                continue;
            }
            drain.containers.push(cid);
            drain.updates.extend(queue);
        }
        let bytes = drain.total_bytes();
        self.total_pending_bytes -= bytes;
        self.drained += drain.updates.len() as u64;
        drain
    }

    /// Drains every container.
    pub fn drain_all(&mut self) -> Drain {
        let all: Vec<ContainerId> = self.queues.keys().cloned().collect();
        self.drain_closure(all)
    }

    pub fn pending_count(&self, cid: &ContainerId) -> usize {
        self.queues.get(cid).map_or(0, VecDeque::len)
    }

    pub fn pending_total(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn total_pending_bytes(&self) -> u64 {
        self.total_pending_bytes
    }

    pub fn is_empty(&self) -> bool {
        self.queues.values().all(VecDeque::is_empty)
    }

    /// Containers with at least one queued update, in canonical order.
    pub fn pending_containers(&self) -> impl Iterator<Item = &ContainerId> {
        self.queues.iter().filter(|(_, q)| !q.is_empty()).map(|(c, _)| c)
    }

    /// Oldest queued update of a container.
    pub fn oldest(&self, cid: &ContainerId) -> Option<&Update> {
        self.queues.get(cid).and_then(VecDeque::front)
    }

    pub fn block_members(&self, block: BlockId) -> usize {
        self.block_index.get(&block).map_or(0, BTreeSet::len)
    }

    pub fn enqueued_count(&self) -> u64 {
        self.enqueued
    }

    pub fn drained_count(&self) -> u64 {
        self.drained
    }

    pub fn coalesced_count(&self) -> u64 {
        self.coalesced
    }
}

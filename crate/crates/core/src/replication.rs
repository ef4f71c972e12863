//! Per-peer shipping: a [`ReplicationSource`] owns the unified cache and the
//! container states for one `(cluster, peer)` pair and turns bound trips into
//! [`ShipmentBatch`]es.
//!
//! Anti-echo is by origin: an update is never queued for the cluster that
//! originated it, however many hops it has travelled.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::blocks::BlockMode;
use crate::cache::{Drain, UnifiedCache};
use crate::error::Result;
use crate::qod::{check_arrival, evaluate_theta, ContainerId, ContainerState, Trip, VectorK};
use crate::update::{BlockId, ClusterId, Update};
use crate::wire::BATCH_HEADER_BYTES;

/// Why a batch left the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trigger {
    Sigma,
    Theta,
    Nu,
    ImmediateBlock,
    AnyBlock,
    FinalDrain,
    /// Arrival on a container whose vector is all-inactive.
    Immediate,
    /// Periodic flush of the plain (bound-less) shipper.
    Poll,
}

impl Trigger {
    pub fn code(self) -> u8 {
        match self {
            Trigger::Sigma => 1,
            Trigger::Theta => 2,
            Trigger::Nu => 3,
            Trigger::ImmediateBlock => 4,
            Trigger::AnyBlock => 5,
            Trigger::FinalDrain => 6,
            Trigger::Immediate => 7,
            Trigger::Poll => 8,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => Trigger::Sigma,
            2 => Trigger::Theta,
            3 => Trigger::Nu,
            4 => Trigger::ImmediateBlock,
            5 => Trigger::AnyBlock,
            6 => Trigger::FinalDrain,
            7 => Trigger::Immediate,
            8 => Trigger::Poll,
            _ => return None,
        })
    }

    fn from_trip(trip: Trip) -> Self {
        match trip {
            Trip::Immediate => Trigger::Immediate,
            Trip::Sigma => Trigger::Sigma,
            Trip::Theta => Trigger::Theta,
            Trip::Nu => Trigger::Nu,
        }
    }
}

/// An atomically delivered group of updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ShipmentBatch {
    /// Per-source sequence number, starting at 1.
    pub sequence: u64,
    pub source_cluster: ClusterId,
    pub destination_cluster: ClusterId,
    pub created_at: u64,
    pub trigger: Trigger,
    pub updates: Vec<Update>,
    /// Member sizes plus [`BATCH_HEADER_BYTES`].
    pub total_bytes: u64,
}

impl ShipmentBatch {
    pub fn new(
        sequence: u64,
        source_cluster: ClusterId,
        destination_cluster: ClusterId,
        created_at: u64,
        trigger: Trigger,
        updates: Vec<Update>,
    ) -> Self {
        let total_bytes = BATCH_HEADER_BYTES + updates.iter().map(|u| u.size_bytes).sum::<u64>();
        ShipmentBatch { sequence, source_cluster, destination_cluster, created_at, trigger, updates, total_bytes }
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn block_ids(&self) -> BTreeSet<BlockId> {
        self.updates.iter().filter_map(|u| u.block_id).collect()
    }
}

/// Per-container bounds with a fallback for unlisted containers.
#[derive(Debug, Clone, Default)]
pub struct BoundsTable {
    pub default: VectorK,
    pub containers: BTreeMap<ContainerId, VectorK>,
}

impl BoundsTable {
    pub fn uniform(bound: VectorK) -> Self {
        BoundsTable { default: bound, containers: BTreeMap::new() }
    }

    pub fn with(mut self, cid: ContainerId, bound: VectorK) -> Self {
        self.containers.insert(cid, bound);
        self
    }

    pub fn get(&self, cid: &ContainerId) -> &VectorK {
        self.containers.get(cid).unwrap_or(&self.default)
    }
}

/// How a source decides when to ship.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShippingMode {
    /// Bound-driven shipping; θ is re-validated every `theta_tick_ms`.
    Qod { theta_tick_ms: u64 },
    /// Bound-less baseline: everything accumulated is shipped every
    /// `poll_interval_ms`.
    Plain { poll_interval_ms: u64 },
}

impl ShippingMode {
    pub fn tick_ms(&self) -> u64 {
        match *self {
            ShippingMode::Qod { theta_tick_ms } => theta_tick_ms,
            ShippingMode::Plain { poll_interval_ms } => poll_interval_ms,
        }
    }
}

/// Entries of a source's optional event trace.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceEvent {
    BlockReady {
        time: u64,
        block: BlockId,
        mode: BlockMode,
        containers: Vec<ContainerId>,
    },
    Trip {
        time: u64,
        container: ContainerId,
        trip: Trip,
    },
    Shipped {
        time: u64,
        batch: u64,
        trigger: Trigger,
        containers: Vec<ContainerId>,
        blocks: Vec<BlockId>,
        /// `actual_sigma` of every shipped container right after the drain.
        counters_after: Vec<(ContainerId, u64)>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceStats {
    pub offered: u64,
    pub echoes_dropped: u64,
    pub batches: u64,
    pub shipped_updates: u64,
    pub shipped_bytes: u64,
    pub acked_batches: u64,
}

#[derive(Debug)]
pub struct ReplicationSource {
    source: ClusterId,
    peer: ClusterId,
    cache: UnifiedCache,
    states: BTreeMap<ContainerId, ContainerState>,
    bounds: Arc<BoundsTable>,
    mode: ShippingMode,
    shipped_position: BTreeMap<ClusterId, u64>,
    next_batch: u64,
    stats: SourceStats,
    trace: Option<Vec<SourceEvent>>,
}

impl ReplicationSource {
    pub fn new(source: ClusterId, peer: ClusterId, bounds: Arc<BoundsTable>, mode: ShippingMode) -> Self {
        ReplicationSource {
            source,
            peer,
            cache: UnifiedCache::new(),
            states: BTreeMap::new(),
            bounds,
            mode,
            shipped_position: BTreeMap::new(),
            next_batch: 1,
            stats: SourceStats::default(),
            trace: None,
        }
    }

    pub fn with_coalescing(mut self) -> Self {
        self.cache = UnifiedCache::with_coalescing();
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn source(&self) -> ClusterId {
        self.source
    }

    pub fn peer(&self) -> ClusterId {
        self.peer
    }

    pub fn mode(&self) -> ShippingMode {
        self.mode
    }

    pub fn cache(&self) -> &UnifiedCache {
        &self.cache
    }

    pub fn stats(&self) -> &SourceStats {
        &self.stats
    }

    pub fn trace(&self) -> &[SourceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn state(&self, cid: &ContainerId) -> Option<&ContainerState> {
        self.states.get(cid)
    }

    pub fn bound(&self, cid: &ContainerId) -> &VectorK {
        self.bounds.get(cid)
    }

    /// Highest acknowledged sequence per origin cluster.
    pub fn shipped_position(&self, origin: ClusterId) -> u64 {
        self.shipped_position.get(&origin).copied().unwrap_or(0)
    }

    /// Queues one update and ships its container if a bound trips.
    pub fn offer(&mut self, update: Update, now: u64) -> Result<Option<ShipmentBatch>> {
        if update.origin_cluster == self.peer {
            self.stats.echoes_dropped += 1;
            return Ok(None);
        }
        self.stats.offered += 1;
        let cid = update.container.clone();
        let size = update.size_bytes;
        let probe = matches!(self.mode, ShippingMode::Qod { .. }).then(|| update.clone());
        self.cache.enqueue(update)?;
        self.states.entry(cid.clone()).or_default().pending_bytes += size;
        let Some(update) = probe else { return Ok(None) };
        Ok(self.evaluate_arrival(&update, now, None))
    }

    /// Queues a whole consistency block at once, then applies the block's
    /// shipping rule. At most one batch results.
    pub fn offer_block(
        &mut self,
        block: BlockId,
        mode: BlockMode,
        updates: &[Update],
        now: u64,
    ) -> Result<Option<ShipmentBatch>> {
        let updates: Vec<&Update> = updates
            .iter()
            .filter(|u| {
                let echo = u.origin_cluster == self.peer;
                if echo {
                    self.stats.echoes_dropped += 1;
                }
                !echo
            })
            .collect();
        if updates.is_empty() {
            return Ok(None);
        }
        for u in &updates {
            self.stats.offered += 1;
            self.cache.enqueue((*u).clone())?;
            self.states.entry(u.container.clone()).or_default().pending_bytes += u.size_bytes;
        }
        let containers: BTreeSet<ContainerId> = updates.iter().map(|u| u.container.clone()).collect();
        self.record(|| SourceEvent::BlockReady {
            time: now,
            block,
            mode,
            containers: containers.iter().cloned().collect(),
        });
        if let ShippingMode::Plain { .. } = self.mode {
            return Ok(None);
        }
        match mode {
            BlockMode::Immediate => {
                // Ending an IMMEDIATE block trips every container it touched.
                for cid in &containers {
                    self.record(|| SourceEvent::Trip { time: now, container: cid.clone(), trip: Trip::Immediate });
                }
                Ok(self.ship(containers, Trigger::ImmediateBlock, now))
            }
            BlockMode::Any => {
                for u in updates {
                    if let Some(batch) = self.evaluate_arrival(u, now, Some(Trigger::AnyBlock)) {
                        return Ok(Some(batch));
                    }
                }
                Ok(None)
            }
        }
    }

    fn evaluate_arrival(&mut self, update: &Update, now: u64, label: Option<Trigger>) -> Option<ShipmentBatch> {
        let bound = *self.bounds.get(&update.container);
        let state = self.states.entry(update.container.clone()).or_default();
        let trip = check_arrival(state, &bound, update, now)?;
        let cid = update.container.clone();
        self.record(|| SourceEvent::Trip { time: now, container: cid.clone(), trip });
        self.ship([cid], label.unwrap_or(Trigger::from_trip(trip)), now)
    }

    /// Periodic θ validation: ships every overdue container, in canonical
    /// container order.
    pub fn theta_tick(&mut self, now: u64) -> Vec<ShipmentBatch> {
        if let ShippingMode::Plain { .. } = self.mode {
            return Vec::new();
        }
        let candidates: Vec<ContainerId> = self.cache.pending_containers().cloned().collect();
        let mut batches = Vec::new();
        for cid in candidates {
            let pending = self.cache.pending_count(&cid);
            let bound = *self.bounds.get(&cid);
            let state = self.states.entry(cid.clone()).or_default();
            if !evaluate_theta(state, &bound, now, pending) {
                continue;
            }
            self.record(|| SourceEvent::Trip { time: now, container: cid.clone(), trip: Trip::Theta });
            batches.extend(self.ship([cid], Trigger::Theta, now));
        }
        batches
    }

    /// Baseline flush: everything accumulated leaves in one batch.
    pub fn poll(&mut self, now: u64) -> Option<ShipmentBatch> {
        let all: Vec<ContainerId> = self.cache.pending_containers().cloned().collect();
        self.ship(all, Trigger::Poll, now)
    }

    /// Ships every non-empty container regardless of bounds.
    pub fn final_drain(&mut self, now: u64) -> Vec<ShipmentBatch> {
        let candidates: Vec<ContainerId> = self.cache.pending_containers().cloned().collect();
        candidates.into_iter().filter_map(|cid| self.ship([cid], Trigger::FinalDrain, now)).collect()
    }

    /// Records delivery of `batch`; the per-origin positions only move here.
    pub fn acknowledge(&mut self, batch: &ShipmentBatch) {
        self.stats.acked_batches += 1;
        for u in &batch.updates {
            let pos = self.shipped_position.entry(u.origin_cluster).or_insert(0);
            *pos = (*pos).max(u.origin_sequence);
        }
    }

    /// Whether any pending container has an active θ (the simulator keeps
    /// ticking while this holds).
    pub fn has_theta_pending(&self) -> bool {
        self.cache.pending_containers().any(|cid| self.bounds.get(cid).theta_ms() > 0)
    }

    fn ship(
        &mut self,
        seeds: impl IntoIterator<Item = ContainerId>,
        trigger: Trigger,
        now: u64,
    ) -> Option<ShipmentBatch> {
        let Drain { updates, containers } = self.cache.drain_closure(seeds);
        if updates.is_empty() {
            return None;
        }
        for cid in &containers {
            let state = self.states.entry(cid.clone()).or_default();
            state.record_shipment(now, updates.iter().filter(|u| &u.container == cid));
        }
        let batch = ShipmentBatch::new(self.next_batch, self.source, self.peer, now, trigger, updates);
        self.next_batch += 1;
        self.stats.batches += 1;
        self.stats.shipped_updates += batch.len() as u64;
        self.stats.shipped_bytes += batch.total_bytes;
        if self.trace.is_some() {
            let counters_after = containers.iter().map(|c| (c.clone(), self.states[c].actual_sigma)).collect();
            let event = SourceEvent::Shipped {
                time: now,
                batch: batch.sequence,
                trigger,
                containers,
                blocks: batch.block_ids().into_iter().collect(),
                counters_after,
            };
            self.record(|| event);
        }
        Some(batch)
    }

    fn record(&mut self, event: impl FnOnce() -> SourceEvent) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(event());
        }
    }
}

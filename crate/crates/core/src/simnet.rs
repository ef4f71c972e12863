//! Deterministic discrete-event clock and network.
//!
//! Events run in `(timestamp, insertion sequence)` order. Links have a fixed
//! latency and a sorted list of half-open partition intervals; a batch sent
//! over a partitioned link is retried when the partition ends. Bytes are
//! charged to the accounting window that contains the delivery time.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};
use crate::replication::ShipmentBatch;
use crate::update::ClusterId;

pub const DEFAULT_WINDOW_MS: u64 = 1000;
pub const DEFAULT_EVENT_CAP: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSpec {
    latency_ms: u64,
    partitions: Vec<(u64, u64)>,
}

impl LinkSpec {
    /// Partitions are `[start, end)` intervals; they must be non-empty,
    /// sorted and non-overlapping.
    pub fn new(latency_ms: u64, partitions: Vec<(u64, u64)>) -> Result<Self> {
        for &(start, end) in &partitions {
            if start >= end {
                return Err(Error::Scenario(format!("empty partition [{start}, {end})")));
            }
        }
        for pair in partitions.windows(2) {
            if pair[0].1 > pair[1].0 {
                return Err(Error::Scenario(format!(
                    "partitions [{}, {}) and [{}, {}) overlap or are unsorted",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(LinkSpec { latency_ms, partitions })
    }

    pub fn healthy(latency_ms: u64) -> Self {
        LinkSpec { latency_ms, partitions: Vec::new() }
    }

    pub fn latency_ms(&self) -> u64 {
        self.latency_ms
    }

    pub fn partitions(&self) -> &[(u64, u64)] {
        &self.partitions
    }

    /// End of the partition covering `t`, if the link is down at `t`.
    pub fn down_until(&self, t: u64) -> Option<u64> {
        self.partitions.iter().find(|&&(start, end)| start <= t && t < end).map(|&(_, end)| end)
    }
}

/// Network-level events the simulator owner must route back to the network
/// or to the destination cluster.
#[derive(Debug, Clone)]
pub enum NetEvent {
    Deliver(ShipmentBatch),
    Retry(ShipmentBatch),
}

/// What [`SimNet::submit`] did with a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Submission {
    Scheduled { deliver_at: u64 },
    Deferred { retry_at: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowStats {
    pub bytes: u64,
    pub batches: u64,
    pub max_batch_bytes: u64,
}

struct Scheduled<E> {
    at: u64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

pub struct SimNet<E> {
    now: u64,
    next_seq: u64,
    queue: BinaryHeap<Scheduled<E>>,
    links: BTreeMap<(ClusterId, ClusterId), LinkSpec>,
    window_ms: u64,
    windows: BTreeMap<(u64, ClusterId, ClusterId), WindowStats>,
    event_cap: u64,
    processed: u64,
    deferrals: u64,
}

impl<E> SimNet<E> {
    pub fn new(window_ms: u64) -> Self {
        assert!(window_ms > 0, "window size must be positive");
        SimNet {
            now: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            links: BTreeMap::new(),
            window_ms,
            windows: BTreeMap::new(),
            event_cap: DEFAULT_EVENT_CAP,
            processed: 0,
            deferrals: 0,
        }
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn add_link(&mut self, src: ClusterId, dst: ClusterId, spec: LinkSpec) {
        self.links.insert((src, dst), spec);
    }

    pub fn link(&self, src: ClusterId, dst: ClusterId) -> Option<&LinkSpec> {
        self.links.get(&(src, dst))
    }

    pub fn links(&self) -> impl Iterator<Item = (ClusterId, ClusterId)> + '_ {
        self.links.keys().copied()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn window_ms(&self) -> u64 {
        self.window_ms
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn processed_events(&self) -> u64 {
        self.processed
    }

    /// Number of sends that found their link down.
    pub fn deferrals(&self) -> u64 {
        self.deferrals
    }

    /// Bytes charged per `(window index, src, dst)`.
    pub fn windows(&self) -> &BTreeMap<(u64, ClusterId, ClusterId), WindowStats> {
        &self.windows
    }

    pub fn total_charged_bytes(&self) -> u64 {
        self.windows.values().map(|w| w.bytes).sum()
    }

    pub fn schedule(&mut self, at: u64, event: E) {
        assert!(at >= self.now, "event scheduled in the past ({at} < {})", self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { at, seq, event });
    }

    pub fn schedule_in(&mut self, delay: u64, event: E) {
        self.schedule(self.now + delay, event);
    }

    /// Next event, advancing the clock.
    pub fn pop(&mut self) -> Option<(u64, E)> {
        let next = self.queue.pop()?;
        debug_assert!(next.at >= self.now);
        self.now = next.at;
        self.processed += 1;
        Some((next.at, next.event))
    }

    /// Processes events until none remain and returns the final clock. Fails
    /// once more than the configured event cap has been processed, or when
    /// the handler fails.
    pub fn run_until_quiescent<F>(&mut self, mut handler: F) -> Result<u64>
    where
        F: FnMut(&mut Self, E) -> Result<()>,
    {
        while let Some((_, event)) = self.pop() {
            if self.processed > self.event_cap {
                return Err(Error::Livelock { cap: self.event_cap, now: self.now });
            }
            handler(self, event)?;
        }
        Ok(self.now)
    }
}

impl<E: From<NetEvent>> SimNet<E> {
    /// Sends a batch now: delivery after the link latency if the link is up,
    /// otherwise a retry when the current partition ends.
    pub fn submit(&mut self, batch: ShipmentBatch) -> Result<Submission> {
        let key = (batch.source_cluster, batch.destination_cluster);
        let link = self.links.get(&key).ok_or(Error::UnknownLink(key.0, key.1))?;
        if let Some(retry_at) = link.down_until(self.now) {
            self.deferrals += 1;
            self.schedule(retry_at, NetEvent::Retry(batch).into());
            return Ok(Submission::Deferred { retry_at });
        }
        let deliver_at = self.now + link.latency_ms;
        let stats = self.windows.entry((deliver_at / self.window_ms, key.0, key.1)).or_default();
        stats.bytes += batch.total_bytes;
        stats.batches += 1;
        stats.max_batch_bytes = stats.max_batch_bytes.max(batch.total_bytes);
        self.schedule(deliver_at, NetEvent::Deliver(batch).into());
        Ok(Submission::Scheduled { deliver_at })
    }
}

//! Scenario runner: drives client sessions, replication timers and the
//! simulated network to quiescence and collects metrics.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::blocks::ClientSession;
use crate::cluster::ClusterNode;
use crate::error::Result;
use crate::metrics::{MetricsReport, RowTotals, Summary, WindowRow};
use crate::qod::ContainerId;
use crate::replication::{ReplicationSource, ShipmentBatch, ShippingMode};
use crate::scenario::Scenario;
use crate::simnet::{NetEvent, SimNet};
use crate::update::ClusterId;
use crate::wire;
use crate::workload::{Operation, OperationStream};

#[derive(Debug)]
pub enum Event {
    Net(NetEvent),
    /// Issue client operation `i`.
    Op(u64),
    /// θ re-validation in QoD mode, poll in plain mode.
    Tick,
}

impl From<NetEvent> for Event {
    fn from(e: NetEvent) -> Self {
        Event::Net(e)
    }
}

/// A batch as it reached its destination.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub delivered_at: u64,
    pub batch: ShipmentBatch,
}

#[derive(Debug, Default)]
struct LinkMetrics {
    pending: BTreeMap<u64, u64>,
    last_pending: Option<(u64, u64)>,
    staleness: BTreeMap<u64, u64>,
}

impl LinkMetrics {
    fn sample_pending(&mut self, window: u64, depth: u64) {
        if let Some((w, last)) = self.last_pending {
            if w < window && last > 0 {
                // Depth carried unchanged through windows without events.
                for gap in w + 1..=window {
                    self.pending.insert(gap, last);
                }
            }
        }
        let slot = self.pending.entry(window).or_default();
        *slot = (*slot).max(depth);
        self.last_pending = Some((window, depth));
    }
}

struct World {
    nodes: BTreeMap<ClusterId, ClusterNode>,
    clients: Vec<ClusterId>,
    sessions: Vec<ClientSession>,
    ops: OperationStream,
    arrival: crate::workload::ArrivalPattern,
    mode: ShippingMode,
    window_ms: u64,
    links: BTreeMap<(ClusterId, ClusterId), LinkMetrics>,
    pending_max: BTreeMap<ContainerId, u64>,
    deliveries: Option<Vec<Delivery>>,
    operations: u64,
    reads: u64,
    hits: u64,
}

impl World {
    fn handle(&mut self, net: &mut SimNet<Event>, event: Event) -> Result<()> {
        let now = net.now();
        match event {
            Event::Op(i) => {
                self.issue(net, i, now)?;
                if let Some(next) = self.ops.peek_index() {
                    net.schedule(self.arrival.time_of(next).max(now), Event::Op(next));
                }
            }
            Event::Tick => {
                let mut out = Vec::new();
                for node in self.nodes.values_mut() {
                    out.extend(match self.mode {
                        ShippingMode::Qod { .. } => node.theta_tick(now),
                        ShippingMode::Plain { .. } => node.poll(now),
                    });
                }
                submit_all(net, out)?;
                let waiting = self.nodes.values().any(|n| match self.mode {
                    ShippingMode::Qod { .. } => n.has_theta_pending(),
                    ShippingMode::Plain { .. } => n.pending_total() > 0,
                });
                if waiting || !net.is_idle() {
                    net.schedule_in(self.mode.tick_ms(), Event::Tick);
                }
            }
            Event::Net(NetEvent::Retry(batch)) => {
                net.submit(batch)?;
            }
            Event::Net(NetEvent::Deliver(batch)) => {
                let dest = self.nodes.get_mut(&batch.destination_cluster).expect("links join known clusters");
                let report = dest.apply_remote_batch(&batch, now)?;
                if let Some(src) = self.nodes.get_mut(&batch.source_cluster) {
                    src.acknowledge(&batch);
                }
                submit_all(net, report.outgoing)?;
                let link = self.links.entry((batch.source_cluster, batch.destination_cluster)).or_default();
                if let Some(worst) = batch.updates.iter().map(|u| now.saturating_sub(u.wall_timestamp)).max() {
                    let slot = link.staleness.entry(now / self.window_ms).or_default();
                    *slot = (*slot).max(worst);
                }
                if let Some(log) = self.deliveries.as_mut() {
                    log.push(Delivery { delivered_at: now, batch });
                }
            }
        }
        self.sample(now);
        Ok(())
    }

    fn issue(&mut self, net: &mut SimNet<Event>, i: u64, now: u64) -> Result<()> {
        let Some(op) = self.ops.next() else { return Ok(()) };
        let slot = (i % self.clients.len() as u64) as usize;
        let node = self.nodes.get_mut(&self.clients[slot]).expect("clients are known clusters");
        let session = &mut self.sessions[slot];
        self.operations += 1;
        let out = match op {
            Operation::Read { container, key } => {
                self.reads += 1;
                self.hits += u64::from(node.get(&container, &key).is_some());
                Vec::new()
            }
            Operation::Write { container, key, value } => session.put(node, &container, &key, value, now)?,
            Operation::Block(block) => {
                session.start_consistent_block(block.mode)?;
                for w in block.writes {
                    session.put(node, &w.container, &w.key, w.value, now)?;
                }
                session.end_consistent_block(node, now)?
            }
        };
        submit_all(net, out)
    }

    fn sample(&mut self, now: u64) {
        let window = now / self.window_ms;
        for node in self.nodes.values() {
            for source in node.sources() {
                let cache = source.cache();
                self.links
                    .entry((source.source(), source.peer()))
                    .or_default()
                    .sample_pending(window, cache.pending_total() as u64);
                for cid in cache.pending_containers() {
                    let depth = cache.pending_count(cid) as u64;
                    match self.pending_max.get_mut(cid) {
                        Some(max) => *max = (*max).max(depth),
                        None => {
                            self.pending_max.insert(cid.clone(), depth);
                        }
                    }
                }
            }
        }
    }
}

fn submit_all(net: &mut SimNet<Event>, batches: Vec<ShipmentBatch>) -> Result<()> {
    for batch in batches {
        net.submit(batch)?;
    }
    Ok(())
}

/// A scenario wired up and ready to run.
pub struct Simulation {
    scenario: Scenario,
    net: SimNet<Event>,
    world: World,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let bounds = Arc::new(scenario.bounds.clone());
        let mut nodes: BTreeMap<ClusterId, ClusterNode> =
            scenario.clusters.iter().map(|&c| (c, ClusterNode::new(c))).collect();
        let mut net = SimNet::new(scenario.window_ms).with_event_cap(scenario.event_cap);
        for (&(src, dst), spec) in &scenario.links {
            net.add_link(src, dst, spec.clone());
            let mut source = ReplicationSource::new(src, dst, Arc::clone(&bounds), scenario.mode);
            if scenario.coalesce {
                source = source.with_coalescing();
            }
            if scenario.trace {
                source = source.with_trace();
            }
            nodes.get_mut(&src).expect("validated topology").add_source(source);
        }
        let ops = scenario.workload.generate()?;
        let world = World {
            nodes,
            clients: scenario.clients.clone(),
            sessions: scenario.clients.iter().map(|&c| ClientSession::new(c)).collect(),
            ops,
            arrival: scenario.arrival,
            mode: scenario.mode,
            window_ms: scenario.window_ms,
            links: BTreeMap::new(),
            pending_max: BTreeMap::new(),
            deliveries: scenario.trace.then(Vec::new),
            operations: 0,
            reads: 0,
            hits: 0,
        };
        Ok(Simulation { scenario, net, world })
    }

    /// Runs to quiescence, then drains every cache until nothing is left in
    /// flight.
    pub fn run(mut self) -> Result<RunResult> {
        let started = Instant::now();
        if let Some(first) = self.world.ops.peek_index() {
            self.net.schedule(self.world.arrival.time_of(first), Event::Op(first));
        }
        self.net.schedule(self.scenario.mode.tick_ms(), Event::Tick);
        let world = &mut self.world;
        self.net.run_until_quiescent(|net, e| world.handle(net, e))?;
        loop {
            let now = self.net.now();
            let drained: Vec<ShipmentBatch> = self.world.nodes.values_mut().flat_map(|n| n.final_drain(now)).collect();
            if drained.is_empty() {
                break;
            }
            submit_all(&mut self.net, drained)?;
            self.world.sample(now);
            let world = &mut self.world;
            self.net.run_until_quiescent(|net, e| world.handle(net, e))?;
        }
        let wall_seconds = started.elapsed().as_secs_f64();
        let report = self.report(wall_seconds);
        Ok(RunResult {
            report,
            nodes: self.world.nodes,
            deliveries: self.world.deliveries.unwrap_or_default(),
            reads: self.world.reads,
            read_hits: self.world.hits,
            processed_events: self.net.processed_events(),
            deferrals: self.net.deferrals(),
            scenario: self.scenario,
        })
    }

    fn report(&self, wall_seconds: f64) -> MetricsReport {
        let window_ms = self.scenario.window_ms;
        let final_time = self.net.now();
        let last_window = final_time / window_ms;
        let charged = self.net.windows();
        let mut rows = Vec::new();
        for w in 0..=last_window {
            for &(src, dst) in self.scenario.links.keys() {
                let stats = charged.get(&(w, src, dst)).copied().unwrap_or_default();
                let link = self.world.links.get(&(src, dst));
                let pending = link.map_or(0, |l| pending_at(l, w));
                let staleness = link.and_then(|l| l.staleness.get(&w).copied()).unwrap_or(0);
                rows.push(WindowRow {
                    window_start_ms: w * window_ms,
                    link_src: src.0,
                    link_dst: dst.0,
                    bytes: stats.bytes,
                    batches: stats.batches,
                    max_batch_bytes: stats.max_batch_bytes,
                    pending_max: pending,
                    staleness_max_ms: staleness,
                });
            }
        }
        let totals = RowTotals::from_rows(&rows);
        let operations = self.world.operations;
        let summary = Summary {
            scenario: self.scenario.name.clone(),
            window_ms,
            peak_window_bytes: totals.peak_window_bytes,
            total_bytes: totals.total_bytes,
            batches: totals.batches,
            max_batch_bytes: totals.max_batch_bytes,
            average_window_bytes: totals.total_bytes as f64 / (last_window + 1) as f64,
            max_staleness_ms: totals.max_staleness_ms,
            operations,
            wall_seconds,
            ingestion_ops_per_sec: operations as f64 / wall_seconds.max(f64::EPSILON),
            final_time_ms: final_time,
            pending_max: self.world.pending_max.clone(),
            digests: self.world.nodes.iter().map(|(&id, n)| (id, n.store_digest())).collect(),
        };
        MetricsReport { rows, summary }
    }
}

fn pending_at(link: &LinkMetrics, window: u64) -> u64 {
    if let Some(&v) = link.pending.get(&window) {
        return v;
    }
    // Past the last sample the depth holds at its last value.
    match link.last_pending {
        Some((w, d)) if w < window => d,
        _ => 0,
    }
}

/// Everything a finished run leaves behind.
pub struct RunResult {
    pub report: MetricsReport,
    pub nodes: BTreeMap<ClusterId, ClusterNode>,
    /// Every delivered batch in delivery order; empty unless tracing.
    pub deliveries: Vec<Delivery>,
    pub reads: u64,
    pub read_hits: u64,
    pub processed_events: u64,
    pub deferrals: u64,
    pub scenario: Scenario,
}

impl RunResult {
    pub fn node(&self, id: ClusterId) -> &ClusterNode {
        &self.nodes[&id]
    }

    pub fn csv_file_name(&self) -> String {
        format!("{}.csv", self.scenario.name)
    }

    /// Writes `<name>.csv`, and with tracing on also `<name>.trace` (the
    /// delivered batches in wire form) and `<name>.wal-<cluster>.txt` per
    /// cluster. Returns the written paths.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let csv_path = dir.join(self.csv_file_name());
        crate::metrics::write_csv(BufWriter::new(fs::File::create(&csv_path)?), &self.report.rows)?;
        written.push(csv_path);
        if self.scenario.trace {
            let trace_path = dir.join(format!("{}.trace", self.scenario.name));
            wire::write_trace(
                BufWriter::new(fs::File::create(&trace_path)?),
                self.deliveries.iter().map(|d| &d.batch),
            )?;
            written.push(trace_path);
            for (id, node) in &self.nodes {
                let path = dir.join(format!("{}.wal-{}.txt", self.scenario.name, id.0));
                node.dump_wal(&path)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// Loads, runs and returns the result in one step.
pub fn run_scenario(scenario: Scenario) -> Result<RunResult> {
    Simulation::new(scenario)?.run()
}

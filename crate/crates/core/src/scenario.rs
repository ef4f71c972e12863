//! Scenario files: TOML documents describing a topology, bounds, a workload
//! and network conditions. See the crate README for the full key reference.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bytes::Bytes;
use serde::Deserialize;

use crate::blocks::BlockMode;
use crate::error::{Error, Result};
use crate::qod::{resolve_sigma_percentage, ContainerId, VectorK};
use crate::replication::{BoundsTable, ShippingMode};
use crate::simnet::{LinkSpec, DEFAULT_EVENT_CAP, DEFAULT_WINDOW_MS};
use crate::update::ClusterId;
use crate::workload::{
    generate_block_script, ArrivalPattern, BlockWrite, KeyDistribution, MixMode, ScriptedBlock, ValueKind,
    WorkloadSpec, DEFAULT_OPERATIONS, DEFAULT_VALUE_SIZE, DEFAULT_ZIPFIAN_CONSTANT,
};

pub const DEFAULT_POLL_INTERVAL_MS: u64 = 1000;
pub const DEFAULT_THETA_TICK_MS: u64 = 100;

/// A validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub clusters: Vec<ClusterId>,
    pub links: BTreeMap<(ClusterId, ClusterId), LinkSpec>,
    /// Clusters issuing client operations, round-robin by operation index.
    pub clients: Vec<ClusterId>,
    pub mode: ShippingMode,
    pub coalesce: bool,
    pub bounds: BoundsTable,
    pub workload: WorkloadSpec,
    pub arrival: ArrivalPattern,
    pub window_ms: u64,
    pub event_cap: u64,
    /// Keep per-batch and per-source event traces (needed for trace dumps).
    pub trace: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    seed: Option<u64>,
    topology: RawTopology,
    #[serde(default)]
    replication: RawReplication,
    #[serde(default)]
    bounds: RawBounds,
    workload: RawWorkload,
    #[serde(default)]
    network: RawNetwork,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    clusters: Vec<u32>,
    links: Vec<RawLink>,
    clients: Option<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    from: u32,
    to: u32,
    #[serde(default)]
    latency_ms: u64,
    /// Shorthand for links in both directions.
    #[serde(default)]
    bidirectional: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawReplication {
    mode: String,
    theta_tick_ms: u64,
    poll_interval_ms: u64,
    coalesce: bool,
}

impl Default for RawReplication {
    fn default() -> Self {
        RawReplication {
            mode: "qod".into(),
            theta_tick_ms: DEFAULT_THETA_TICK_MS,
            poll_interval_ms: DEFAULT_POLL_INTERVAL_MS,
            coalesce: false,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    default: Option<RawVector>,
    #[serde(default)]
    container: Vec<RawContainerBound>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVector {
    #[serde(default)]
    theta_ms: u64,
    sigma: Option<u64>,
    sigma_percent: Option<f64>,
    #[serde(default)]
    nu: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContainerBound {
    id: String,
    #[serde(flatten)]
    vector: RawVector,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    total_operations: Option<u64>,
    write_fraction: Option<f64>,
    mix: Option<String>,
    distribution: Option<String>,
    zipfian_constant: Option<f64>,
    keyspace_size: Option<u64>,
    value_size_bytes: Option<usize>,
    numeric_max: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    container: Vec<RawWeightedContainer>,
    arrival: Option<RawArrival>,
    blocks: Option<RawBlockGenerator>,
    #[serde(default)]
    block: Vec<RawBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeightedContainer {
    id: String,
    #[serde(default = "one")]
    weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "pattern", rename_all = "lowercase")]
enum RawArrival {
    Rate { ops_per_second: u64 },
    Burst { size: u64, spacing_ms: u64, per_cycle: Option<u64>, cycle_ms: Option<u64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockGenerator {
    count: usize,
    writes_per_block: usize,
    /// "immediate", "any" or "alternate".
    mode: String,
    containers: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    mode: String,
    writes: Vec<RawBlockWrite>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockWrite {
    container: String,
    key: String,
    value: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    #[serde(default = "default_window")]
    window_ms: u64,
    #[serde(default = "default_cap")]
    event_cap: u64,
    #[serde(default)]
    partition: Vec<RawPartition>,
}

impl Default for RawNetwork {
    fn default() -> Self {
        RawNetwork { window_ms: DEFAULT_WINDOW_MS, event_cap: DEFAULT_EVENT_CAP, partition: Vec::new() }
    }
}

fn default_window() -> u64 {
    DEFAULT_WINDOW_MS
}

fn default_cap() -> u64 {
    DEFAULT_EVENT_CAP
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    from: u32,
    to: u32,
    start_ms: u64,
    end_ms: u64,
    #[serde(default)]
    bidirectional: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    #[serde(default)]
    trace: bool,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Scenario(msg.into()))
}

fn block_mode(s: &str) -> Result<BlockMode> {
    match s.to_ascii_lowercase().as_str() {
        "immediate" => Ok(BlockMode::Immediate),
        "any" => Ok(BlockMode::Any),
        other => invalid(format!("unknown block mode `{other}`")),
    }
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        Self::from_raw(raw)
    }

    /// Replaces the workload seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.workload.seed = seed;
        self
    }

    /// σ bound in effect for `cid`.
    pub fn sigma_for(&self, cid: &ContainerId) -> u64 {
        self.bounds.get(cid).sigma()
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        if raw.name.is_empty() || raw.name.contains(['/', '\\']) {
            return invalid(format!("scenario name `{}` must be a plain file stem", raw.name));
        }
        let clusters: Vec<ClusterId> = raw.topology.clusters.iter().copied().map(ClusterId).collect();
        let known: BTreeSet<ClusterId> = clusters.iter().copied().collect();
        if known.is_empty() {
            return invalid("topology needs at least one cluster");
        }
        if known.len() != clusters.len() {
            return invalid("duplicate cluster id in topology");
        }
        let check = |id: u32, what: &str| -> Result<ClusterId> {
            let id = ClusterId(id);
            if known.contains(&id) {
                Ok(id)
            } else {
                invalid(format!("{what} references unknown cluster {id}"))
            }
        };

        let mut partitions: BTreeMap<(ClusterId, ClusterId), Vec<(u64, u64)>> = BTreeMap::new();
        for p in &raw.network.partition {
            let (a, b) = (check(p.from, "partition")?, check(p.to, "partition")?);
            partitions.entry((a, b)).or_default().push((p.start_ms, p.end_ms));
            if p.bidirectional {
                partitions.entry((b, a)).or_default().push((p.start_ms, p.end_ms));
            }
        }
        let mut latencies: BTreeMap<(ClusterId, ClusterId), u64> = BTreeMap::new();
        for l in &raw.topology.links {
            let (a, b) = (check(l.from, "link")?, check(l.to, "link")?);
            if a == b {
                return invalid(format!("link {a} -> {b} is a self-loop"));
            }
            let mut add = |key| {
                if latencies.insert(key, l.latency_ms).is_some() {
                    return invalid(format!("duplicate link {} -> {}", key.0, key.1));
                }
                Ok(())
            };
            add((a, b))?;
            if l.bidirectional {
                add((b, a))?;
            }
        }
        if let Some(key) = partitions.keys().find(|k| !latencies.contains_key(k)) {
            return invalid(format!("partition on missing link {} -> {}", key.0, key.1));
        }
        let mut links = BTreeMap::new();
        for (key, latency) in latencies {
            let mut parts = partitions.remove(&key).unwrap_or_default();
            parts.sort_unstable();
            links.insert(key, LinkSpec::new(latency, parts)?);
        }

        let clients = match &raw.topology.clients {
            Some(ids) if ids.is_empty() => return invalid("clients list is empty"),
            Some(ids) => ids.iter().map(|&c| check(c, "clients")).collect::<Result<Vec<_>>>()?,
            None => vec![clusters[0]],
        };

        let mode = match raw.replication.mode.as_str() {
            "qod" => {
                if raw.replication.theta_tick_ms == 0 {
                    return invalid("theta_tick_ms must be positive");
                }
                ShippingMode::Qod { theta_tick_ms: raw.replication.theta_tick_ms }
            }
            "plain" => {
                if raw.replication.poll_interval_ms == 0 {
                    return invalid("poll_interval_ms must be positive");
                }
                ShippingMode::Plain { poll_interval_ms: raw.replication.poll_interval_ms }
            }
            other => return invalid(format!("unknown replication mode `{other}`")),
        };

        let workload = build_workload(&raw.workload, raw.seed)?;
        workload.validate()?;
        let arrival = match raw.workload.arrival {
            None => ArrivalPattern::Rate { ops_per_second: 10_000 },
            Some(RawArrival::Rate { ops_per_second }) => ArrivalPattern::Rate { ops_per_second },
            Some(RawArrival::Burst { size, spacing_ms, per_cycle, cycle_ms }) => {
                ArrivalPattern::Burst { size, spacing_ms, per_cycle, cycle_ms: cycle_ms.unwrap_or(1000) }
            }
        };
        arrival.validate()?;

        let total_updates = workload.total_updates();
        let resolve = |v: &RawVector| -> Result<VectorK> {
            let sigma = match (v.sigma, v.sigma_percent) {
                (Some(_), Some(_)) => return invalid("give either sigma or sigma_percent, not both"),
                (Some(s), None) => s,
                (None, Some(p)) => resolve_sigma_percentage(p, total_updates)?,
                (None, None) => 0,
            };
            VectorK::new(v.theta_ms, sigma, v.nu)
        };
        let mut bounds = BoundsTable::uniform(match &raw.bounds.default {
            Some(v) => resolve(v)?,
            None => VectorK::immediate(),
        });
        for c in &raw.bounds.container {
            let cid: ContainerId = c.id.parse()?;
            if bounds.containers.insert(cid, resolve(&c.vector)?).is_some() {
                return invalid(format!("duplicate bounds for container {}", c.id));
            }
        }

        if raw.network.window_ms == 0 {
            return invalid("window_ms must be positive");
        }

        Ok(Scenario {
            name: raw.name,
            clusters,
            links,
            clients,
            mode,
            coalesce: raw.replication.coalesce,
            bounds,
            workload,
            arrival,
            window_ms: raw.network.window_ms,
            event_cap: raw.network.event_cap,
            trace: raw.output.trace,
            output_dir: raw.output.dir,
        })
    }
}

fn build_workload(raw: &RawWorkload, scenario_seed: Option<u64>) -> Result<WorkloadSpec> {
    let defaults = WorkloadSpec::default();
    let mix = match raw.mix.as_deref() {
        None | Some("interleave") => MixMode::Interleave,
        Some("random") => MixMode::Random,
        Some(other) => return invalid(format!("unknown mix `{other}`")),
    };
    let distribution = match raw.distribution.as_deref() {
        None | Some("zipfian") => {
            KeyDistribution::Zipfian { constant: raw.zipfian_constant.unwrap_or(DEFAULT_ZIPFIAN_CONSTANT) }
        }
        Some("uniform") => KeyDistribution::Uniform,
        Some(other) => return invalid(format!("unknown distribution `{other}`")),
    };
    let containers = if raw.container.is_empty() {
        defaults.containers.clone()
    } else {
        raw.container.iter().map(|c| Ok((c.id.parse()?, c.weight))).collect::<Result<Vec<_>>>()?
    };
    let mut block_script = Vec::new();
    if let Some(g) = &raw.blocks {
        let mode = match g.mode.as_str() {
            "alternate" => None,
            m => Some(block_mode(m)?),
        };
        let targets: Vec<ContainerId> = match &g.containers {
            Some(ids) => ids.iter().map(|c| c.parse()).collect::<Result<_>>()?,
            None => containers.iter().map(|(c, _)| c.clone()).collect(),
        };
        if g.writes_per_block == 0 || targets.is_empty() {
            return invalid("generated blocks need writes and containers");
        }
        block_script.extend(generate_block_script(g.count, g.writes_per_block, &targets, mode));
    }
    for b in &raw.block {
        let writes = b
            .writes
            .iter()
            .map(|w| {
                Ok(BlockWrite {
                    container: w.container.parse()?,
                    key: w.key.clone(),
                    value: Bytes::from(w.value.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        block_script.push(ScriptedBlock { mode: block_mode(&b.mode)?, writes });
    }
    Ok(WorkloadSpec {
        total_operations: raw.total_operations.unwrap_or(DEFAULT_OPERATIONS),
        write_fraction: raw.write_fraction.unwrap_or(0.5),
        mix,
        distribution,
        keyspace_size: raw.keyspace_size.unwrap_or(defaults.keyspace_size),
        value_size_bytes: raw.value_size_bytes.unwrap_or(DEFAULT_VALUE_SIZE),
        value_kind: match raw.numeric_max {
            Some(max) => ValueKind::Numeric { max },
            None => ValueKind::Opaque,
        },
        containers,
        seed: raw.seed.or(scenario_seed).unwrap_or(defaults.seed),
        block_script,
    })
}

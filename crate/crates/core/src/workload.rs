//! YCSB-style workload generation.
//!
//! A [`WorkloadSpec`] and its seed fully determine the operation stream.
//! Keys are `user<N>`; with the zipfian distribution `N` is the popularity
//! rank, so `user0` is the hottest key.

use bytes::Bytes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocks::BlockMode;
use crate::error::{Error, Result};
use crate::qod::ContainerId;

pub const DEFAULT_ZIPFIAN_CONSTANT: f64 = 0.99;
pub const DEFAULT_OPERATIONS: u64 = 50_000;
pub const DEFAULT_VALUE_SIZE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyDistribution {
    Zipfian { constant: f64 },
    Uniform,
}

/// How reads and writes are interleaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixMode {
    /// Exact and evenly spread: operation `i` is a write iff
    /// `floor((i+1)·w) > floor(i·w)`. Alternates R/W for `w = 0.5`.
    Interleave,
    /// Independent Bernoulli draw per operation.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueKind {
    /// `value_size_bytes` of filler tagged with the operation index.
    Opaque,
    /// A decimal number drawn uniformly from `[0, max)`, for ν-bounded
    /// containers.
    Numeric { max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockWrite {
    pub container: ContainerId,
    pub key: String,
    pub value: Bytes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedBlock {
    pub mode: BlockMode,
    pub writes: Vec<BlockWrite>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    Read { container: ContainerId, key: String },
    Write { container: ContainerId, key: String, value: Bytes },
    Block(ScriptedBlock),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub total_operations: u64,
    pub write_fraction: f64,
    pub mix: MixMode,
    pub distribution: KeyDistribution,
    pub keyspace_size: u64,
    pub value_size_bytes: usize,
    pub value_kind: ValueKind,
    /// Target containers with positive weights.
    pub containers: Vec<(ContainerId, f64)>,
    pub seed: u64,
    /// Blocks replace evenly spaced slots of the stream.
    pub block_script: Vec<ScriptedBlock>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            total_operations: DEFAULT_OPERATIONS,
            write_fraction: 0.5,
            mix: MixMode::Interleave,
            distribution: KeyDistribution::Zipfian { constant: DEFAULT_ZIPFIAN_CONSTANT },
            keyspace_size: 10_000,
            value_size_bytes: DEFAULT_VALUE_SIZE,
            value_kind: ValueKind::Opaque,
            containers: vec![("usertable:family".parse().expect("valid literal"), 1.0)],
            seed: 1,
            block_script: Vec::new(),
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scenario(msg));
        if self.total_operations == 0 {
            return bad("total_operations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad(format!("write_fraction {} outside [0, 1]", self.write_fraction));
        }
        if self.keyspace_size == 0 {
            return bad("keyspace_size must be positive".into());
        }
        if let KeyDistribution::Zipfian { constant } = self.distribution {
            check_zipfian_constant(constant)?;
        }
        if let ValueKind::Numeric { max } = self.value_kind {
            if !(max.is_finite() && max > 0.0) {
                return bad(format!("numeric value range {max} must be positive"));
            }
        }
        if self.containers.is_empty() {
            return bad("workload needs at least one container".into());
        }
        if let Some((c, w)) = self.containers.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return bad(format!("container {c} has non-positive weight {w}"));
        }
        if self.block_script.len() as u64 > self.total_operations {
            return bad("more scripted blocks than operations".into());
        }
        if let Some(i) = self.block_script.iter().position(|b| b.writes.is_empty()) {
            return bad(format!("scripted block {i} has no writes"));
        }
        Ok(())
    }

    /// Slots taken by scripted blocks, ascending.
    fn block_slots(&self) -> Vec<u64> {
        let n = self.block_script.len() as u64;
        (0..n).map(|j| j * self.total_operations / n).collect()
    }

    /// Number of writes the stream will contain (block writes included).
    /// Exact for [`MixMode::Interleave`], the expectation for
    /// [`MixMode::Random`].
    pub fn total_updates(&self) -> u64 {
        let block_writes: u64 = self.block_script.iter().map(|b| b.writes.len() as u64).sum();
        let regular = match self.mix {
            MixMode::Interleave => {
                let slots = self.block_slots();
                let mut next = slots.iter().peekable();
                (0..self.total_operations)
                    .filter(|&i| {
                        if next.peek() == Some(&&i) {
                            next.next();
                            return false;
                        }
                        interleave_is_write(i, self.write_fraction)
                    })
                    .count() as u64
            }
            MixMode::Random => {
                let regular = self.total_operations - self.block_script.len() as u64;
                (regular as f64 * self.write_fraction).round() as u64
            }
        };
        regular + block_writes
    }

    pub fn generate(&self) -> Result<OperationStream> {
        self.validate()?;
        let zipf = match self.distribution {
            KeyDistribution::Zipfian { constant } => Some(Zipfian::new(self.keyspace_size, constant)?),
            KeyDistribution::Uniform => None,
        };
        let total_weight: f64 = self.containers.iter().map(|(_, w)| w).sum();
        let mut acc = 0.0;
        let container_cdf = self
            .containers
            .iter()
            .map(|(_, w)| {
                acc += w / total_weight;
                acc
            })
            .collect();
        Ok(OperationStream {
            block_slots: self.block_slots(),
            spec: self.clone(),
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            zipf,
            container_cdf,
            index: 0,
            next_block: 0,
        })
    }
}

fn interleave_is_write(i: u64, w: f64) -> bool {
    ((i + 1) as f64 * w).floor() > (i as f64 * w).floor()
}

fn check_zipfian_constant(constant: f64) -> Result<()> {
    if constant > 0.0 && constant < 1.0 {
        Ok(())
    } else {
        Err(Error::Scenario(format!("zipfian constant {constant} outside (0, 1)")))
    }
}

/// Deterministic operation iterator.
#[derive(Debug)]
pub struct OperationStream {
    spec: WorkloadSpec,
    rng: ChaCha8Rng,
    zipf: Option<Zipfian>,
    container_cdf: Vec<f64>,
    block_slots: Vec<u64>,
    index: u64,
    next_block: usize,
}

impl OperationStream {
    /// Index of the next operation, if any remain.
    pub fn peek_index(&self) -> Option<u64> {
        (self.index < self.spec.total_operations).then_some(self.index)
    }

    fn pick_container(&mut self) -> ContainerId {
        let idx = if self.container_cdf.len() == 1 {
            0
        } else {
            let u: f64 = self.rng.random();
            self.container_cdf.partition_point(|&c| c <= u).min(self.container_cdf.len() - 1)
        };
        self.spec.containers[idx].0.clone()
    }

    fn pick_key(&mut self) -> String {
        let idx = match &self.zipf {
            Some(z) => z.sample(&mut self.rng),
            None => self.rng.random_range(0..self.spec.keyspace_size),
        };
        format!("user{idx}")
    }

    fn make_value(&mut self, op: u64) -> Bytes {
        match self.spec.value_kind {
            ValueKind::Numeric { max } => {
                let v: f64 = self.rng.random_range(0.0..max);
                Bytes::from(format!("{v:.3}"))
            }
            ValueKind::Opaque => {
                let mut value = format!("op{op}|").into_bytes();
                value.truncate(self.spec.value_size_bytes);
                let fill = b'a' + (op % 26) as u8;
                value.resize(self.spec.value_size_bytes, fill);
                Bytes::from(value)
            }
        }
    }
}

impl Iterator for OperationStream {
    type Item = Operation;

    fn next(&mut self) -> Option<Operation> {
        let i = self.index;
        if i >= self.spec.total_operations {
            return None;
        }
        self.index += 1;
        if self.block_slots.get(self.next_block) == Some(&i) {
            let block = self.spec.block_script[self.next_block].clone();
            self.next_block += 1;
            return Some(Operation::Block(block));
        }
        let write = match self.spec.mix {
            MixMode::Interleave => interleave_is_write(i, self.spec.write_fraction),
            MixMode::Random => self.rng.random_bool(self.spec.write_fraction),
        };
        let container = self.pick_container();
        let key = self.pick_key();
        Some(if write {
            let value = self.make_value(i);
            Operation::Write { container, key, value }
        } else {
            Operation::Read { container, key }
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.total_operations - self.index) as usize;
        (left, Some(left))
    }
}

/// Zipfian key-rank sampler: rank `r` in `[0, n)` is drawn with probability
/// proportional to `1 / (r + 1)^constant`. Sampling inverts the exact
/// cumulative distribution, so memory is linear in the keyspace.
#[derive(Debug, Clone)]
pub struct Zipfian {
    cdf: Vec<f64>,
}

impl Zipfian {
    pub fn new(keyspace: u64, constant: f64) -> Result<Self> {
        check_zipfian_constant(constant)?;
        if keyspace == 0 {
            return Err(Error::Scenario("zipfian keyspace must be positive".into()));
        }
        let weights: Vec<f64> = (1..=keyspace).map(|k| (k as f64).powf(-constant)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        *cdf.last_mut().expect("keyspace >= 1") = 1.0;
        Ok(Zipfian { cdf })
    }

    pub fn keyspace(&self) -> u64 {
        self.cdf.len() as u64
    }

    pub fn probability(&self, rank: u64) -> f64 {
        let r = rank as usize;
        self.cdf[r] - if r == 0 { 0.0 } else { self.cdf[r - 1] }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1) as u64
    }
}

/// Deterministic block script: `count` blocks of `writes_per_block` writes,
/// spread round-robin across `containers`. Modes alternate
/// IMMEDIATE/ANY when `mode` is `None`.
pub fn generate_block_script(
    count: usize,
    writes_per_block: usize,
    containers: &[ContainerId],
    mode: Option<BlockMode>,
) -> Vec<ScriptedBlock> {
    (0..count)
        .map(|j| ScriptedBlock {
            mode: mode.unwrap_or(if j % 2 == 0 { BlockMode::Immediate } else { BlockMode::Any }),
            writes: (0..writes_per_block)
                .map(|w| BlockWrite {
                    container: containers[(j + w) % containers.len()].clone(),
                    key: format!("block{j}-{w}"),
                    value: Bytes::from(format!("{j}.{w}")),
                })
                .collect(),
        })
        .collect()
}

/// When operation `i` is issued, in simulated milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalPattern {
    /// Evenly spread at a fixed rate.
    Rate { ops_per_second: u64 },
    /// `size` operations arrive together every `spacing_ms`. With
    /// `per_cycle` set, only that many bursts happen per `cycle_ms` and the
    /// rest of the cycle is idle.
    Burst { size: u64, spacing_ms: u64, per_cycle: Option<u64>, cycle_ms: u64 },
}

impl ArrivalPattern {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ArrivalPattern::Rate { ops_per_second } => ops_per_second > 0,
            ArrivalPattern::Burst { size, per_cycle, cycle_ms, spacing_ms } => {
                size > 0 && per_cycle.is_none_or(|p| p > 0 && p.saturating_sub(1) * spacing_ms < cycle_ms)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("invalid arrival pattern {self:?}")))
        }
    }

    pub fn time_of(&self, i: u64) -> u64 {
        match *self {
            ArrivalPattern::Rate { ops_per_second } => i * 1000 / ops_per_second,
            ArrivalPattern::Burst { size, spacing_ms, per_cycle, cycle_ms } => {
                let burst = i / size;
                match per_cycle {
                    None => burst * spacing_ms,
                    Some(p) => (burst / p) * cycle_ms + (burst % p) * spacing_ms,
                }
            }
        }
    }
}

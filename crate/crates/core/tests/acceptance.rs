//! Acceptance suite. Runs serially (no libtest harness) so the throughput
//! measurement does not compete with other tests, and prints one PASS/FAIL
//! line per criterion. Exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geoqod::blocks::BlockMode;
use geoqod::harness::{run_scenario, RunResult};
use geoqod::metrics::write_csv;
use geoqod::qod::{evaluate_sigma, ContainerState, VectorK};
use geoqod::replication::{SourceEvent, Trigger};
use geoqod::scenario::Scenario;
use geoqod::update::{BlockId, ClusterId};

const A: ClusterId = ClusterId(1);
const B: ClusterId = ClusterId(2);

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn load(name: &str) -> Scenario {
    Scenario::from_path(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run_traced(name: &str) -> RunResult {
    let mut s = load(name);
    s.trace = true;
    run_scenario(s).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn criterion_1_sigma_oracle() -> String {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x51_67_4d_41);
    let mut arrivals = 0u64;
    let mut deviations = 0u64;
    for _ in 0..100_000 {
        let b: u64 = rng.random_range(1..=10_000);
        let n: u64 = rng.random_range(1..=3 * b);
        let bound = VectorK::with_sigma(b);
        let mut state = ContainerState::default();
        for i in 1..=n {
            let fired = evaluate_sigma(&mut state, &bound);
            if fired != (i % b == 0) {
                deviations += 1;
            }
        }
        arrivals += n;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(deviations, 0, "deviations from the modular oracle");
    assert!(elapsed < 10.0, "took {elapsed:.2}s");
    format!("100000 pairs, {arrivals} arrivals, 0 deviations, {elapsed:.2}s")
}

fn check_batch_sizes(name: &str, expected: usize) -> String {
    let started = Instant::now();
    let result = run_traced(name);
    let elapsed = started.elapsed().as_secs_f64();
    let mut sigma_batches = 0;
    let mut drained = 0;
    let mut total = 0;
    for d in &result.deliveries {
        total += d.batch.len();
        match d.batch.trigger {
            Trigger::Sigma => {
                assert_eq!(d.batch.len(), expected, "{name}: SIGMA batch {}", d.batch.sequence);
                sigma_batches += 1;
            }
            Trigger::FinalDrain => drained += d.batch.len(),
            other => panic!("{name}: unexpected trigger {other:?}"),
        }
    }
    assert_eq!(total, 50_000, "{name}: every write shipped once");
    assert_eq!(drained, 50_000 % expected, "{name}: final drain carries the remainder");
    assert!(elapsed < 30.0, "{name}: took {elapsed:.2}s");
    format!("{name}: {sigma_batches} x {expected}, drain {drained}, {elapsed:.2}s")
}

fn criterion_2_batch_size() -> String {
    // 2% and 0.5% of 50,000 writes.
    let two = check_batch_sizes("workload-a-qod2pct", 1000);
    let half = check_batch_sizes("workload-a-qod05pct", 250);
    format!("{two}; {half}")
}

fn criterion_3_peaks() -> String {
    let plain = run_scenario(load("plain-baseline")).unwrap().report.summary;
    let q05 = run_scenario(load("write-burst-qod05pct")).unwrap().report.summary;
    let q2 = run_scenario(load("write-burst-qod2pct")).unwrap().report.summary;
    assert_eq!(plain.window_ms, q05.window_ms);
    assert!(
        q05.peak_window_bytes < plain.peak_window_bytes,
        "peak {} (0.5%) not below {} (plain)",
        q05.peak_window_bytes,
        plain.peak_window_bytes
    );
    assert!(q2.batches < q05.batches, "batches {} (2%) vs {} (0.5%)", q2.batches, q05.batches);
    assert!(
        q2.max_batch_bytes > q05.max_batch_bytes,
        "max batch {} (2%) vs {} (0.5%)",
        q2.max_batch_bytes,
        q05.max_batch_bytes
    );
    format!(
        "peak plain {} > 0.5% {}; batches 2% {} < 0.5% {}; max batch 2% {} > 0.5% {}",
        plain.peak_window_bytes,
        q05.peak_window_bytes,
        q2.batches,
        q05.batches,
        q2.max_batch_bytes,
        q05.max_batch_bytes
    )
}

fn criterion_4_staleness() -> String {
    let result = run_traced("theta-staleness");
    let latency = result.scenario.links[&(A, B)].latency_ms();
    let limit = 1000 + 100 + latency;
    let mut worst = 0;
    let mut updates = 0;
    for d in &result.deliveries {
        for u in &d.batch.updates {
            let staleness = d.delivered_at - u.wall_timestamp;
            assert!(staleness <= limit, "update {:?} stale for {staleness} ms", u.id());
            worst = worst.max(staleness);
            updates += 1;
        }
    }
    assert_eq!(updates, result.node(A).stats().local_writes);
    assert_eq!(worst, result.report.summary.max_staleness_ms);
    format!("{updates} updates, max staleness {worst} ms <= {limit} ms")
}

fn criterion_5_blocks() -> String {
    let result = run_traced("blocks-mixed");
    let script = &result.scenario.workload.block_script;
    assert_eq!(script.len(), 1000);

    let mut batches_of: BTreeMap<BlockId, BTreeSet<u64>> = BTreeMap::new();
    let mut members: BTreeMap<BlockId, usize> = BTreeMap::new();
    for d in &result.deliveries {
        for u in &d.batch.updates {
            if let Some(b) = u.block_id {
                batches_of.entry(b).or_default().insert(d.batch.sequence);
                *members.entry(b).or_default() += 1;
            }
        }
    }
    assert_eq!(batches_of.len(), 1000, "every block shipped");
    for (block, batches) in &batches_of {
        assert_eq!(batches.len(), 1, "block {block:?} split over batches {batches:?}");
        assert_eq!(members[block], 4, "block {block:?} shipped whole");
    }

    let trace = result.node(A).source(B).unwrap().trace();
    let mut ready: HashMap<BlockId, (usize, BlockMode, Vec<_>)> = HashMap::new();
    let mut shipped_at: HashMap<BlockId, usize> = HashMap::new();
    for (i, event) in trace.iter().enumerate() {
        match event {
            SourceEvent::BlockReady { block, mode, containers, .. } => {
                ready.insert(*block, (i, *mode, containers.clone()));
            }
            SourceEvent::Shipped { blocks, containers, counters_after, .. } => {
                for b in blocks {
                    shipped_at.insert(*b, i);
                    for cid in &ready[b].2 {
                        assert!(containers.contains(cid), "block {b:?} container {cid} not drained");
                    }
                }
                assert!(counters_after.iter().all(|(_, c)| *c == 0), "counters after shipment: {counters_after:?}");
            }
            SourceEvent::Trip { .. } => {}
        }
    }
    let mut any_blocks = 0;
    let mut by_trip = 0;
    for (block, (ready_at, mode, containers)) in &ready {
        if *mode != BlockMode::Any {
            continue;
        }
        any_blocks += 1;
        let first_trip = trace[*ready_at..].iter().enumerate().find_map(|(offset, e)| match e {
            SourceEvent::Trip { container, time, .. } if containers.contains(container) => {
                Some((ready_at + offset, *time))
            }
            _ => None,
        });
        let ship = &trace[shipped_at[block]];
        let SourceEvent::Shipped { time, trigger, .. } = ship else { unreachable!() };
        match first_trip {
            Some((trip_index, trip_time)) => {
                assert!(shipped_at[block] > trip_index, "block {block:?} shipped before its first trip");
                let between = &trace[trip_index + 1..shipped_at[block]];
                assert!(
                    between.iter().all(|e| !matches!(e, SourceEvent::Shipped { .. })),
                    "block {block:?} not shipped by its first trip"
                );
                assert_eq!(*time, trip_time, "block {block:?} shipment time");
                by_trip += 1;
            }
            None => assert_eq!(*trigger, Trigger::FinalDrain, "block {block:?} shipped without a trip"),
        }
    }
    assert_eq!(any_blocks, 500);
    format!("1000 blocks in one batch each; {by_trip}/{any_blocks} ANY blocks shipped at their first trip, rest in final drain; counters 0")
}

fn criterion_6_master_master() -> String {
    let result = run_traced("master-master-partition");
    assert!(result.deferrals > 0, "the partition delayed traffic");
    let mut applied: HashMap<(ClusterId, (ClusterId, u64)), u32> = HashMap::new();
    for d in &result.deliveries {
        for u in &d.batch.updates {
            assert_ne!(u.origin_cluster, d.batch.destination_cluster, "echo delivered");
            *applied.entry((d.batch.destination_cluster, u.id())).or_default() += 1;
        }
    }
    assert!(applied.values().all(|&n| n == 1), "some update delivered twice");
    for (origin, dest) in [(A, B), (B, A)] {
        let written = result.node(origin).stats().local_writes;
        let received = applied.keys().filter(|(d, (o, _))| *d == dest && *o == origin).count() as u64;
        assert_eq!(received, written, "updates of {origin} at {dest}");
        let stats = result.node(dest).stats();
        assert_eq!(stats.echoes_received, 0);
        assert_eq!(stats.duplicates, 0);
        assert_eq!(stats.remote_applied + stats.remote_discarded, written);
    }
    let total = result.node(A).stats().local_writes + result.node(B).stats().local_writes;
    assert_eq!(total, 20_000);
    let (da, db) = (result.node(A).store_digest(), result.node(B).store_digest());
    assert_eq!(da, db, "digests differ");
    format!("{total} writes, each applied once at its peer, 0 echoes, digest {}", &da[..16])
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn criterion_7_throughput() -> String {
    let plain = load("workload-a-plain");
    let qod = load("workload-a-qod05pct");
    assert_eq!(plain.workload.seed, qod.workload.seed);
    // Warm-up run so allocator and caches settle before measuring.
    run_scenario(plain.clone()).unwrap();
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for _ in 0..5 {
        p.push(run_scenario(plain.clone()).unwrap().report.summary.ingestion_ops_per_sec);
        q.push(run_scenario(qod.clone()).unwrap().report.summary.ingestion_ops_per_sec);
    }
    let (mp, mq) = (median(p), median(q));
    let deviation = (mq - mp).abs() / mp;
    assert!(deviation <= 0.10, "QoD {mq:.0} ops/s vs plain {mp:.0} ops/s ({:.1}%)", deviation * 100.0);
    format!("median plain {mp:.0} ops/s, QoD 0.5% {mq:.0} ops/s, deviation {:.1}%", deviation * 100.0)
}

fn criterion_8_determinism() -> String {
    let dir = scenario_path("x").parent().unwrap().to_path_buf();
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "toml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in &names {
        let csv = || {
            let mut buf = Vec::new();
            write_csv(&mut buf, &run_scenario(load(name)).unwrap().report.rows).unwrap();
            buf
        };
        let (first, second) = (csv(), csv());
        assert!(first == second, "{name}: CSVs differ between runs");
    }
    format!("{} bundled scenarios byte-identical across two runs", names.len())
}

type Criterion = (&'static str, fn() -> String);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 sigma counter matches modular oracle", criterion_1_sigma_oracle),
        ("2 sigma batches carry exactly the bound", criterion_2_batch_size),
        ("3 lower bandwidth peaks than plain shipping", criterion_3_peaks),
        ("4 staleness within theta + tick + latency", criterion_4_staleness),
        ("5 consistency blocks ship atomically", criterion_5_blocks),
        ("6 master-master without echo converges", criterion_6_master_master),
        ("7 ingestion overhead within 10%", criterion_7_throughput),
        ("8 bundled scenarios are deterministic", criterion_8_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

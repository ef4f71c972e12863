use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geoqod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoqod")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
        .to_string_lossy()
        .into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_csv_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = geoqod(&["run", &scenario("workload-a-qod2pct"), "--out", out]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("scenario: workload-a-qod2pct"));
    assert!(text.contains("batches: 50\n"));
    assert!(text.contains("digest[1]: "));
    assert!(text.contains("digest[2]: "));
    let csv = std::fs::read_to_string(dir.path().join("workload-a-qod2pct.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "window_start_ms,link_src,link_dst,bytes,batches,max_batch_bytes,pending_max,staleness_max_ms"
    );
}

#[test]
fn quiet_run_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = geoqod(&["--quiet", "run", &scenario("blocks-mixed"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(dir.path().join("blocks-mixed.trace").exists());
    assert!(dir.path().join("blocks-mixed.wal-1.txt").exists());
}

#[test]
fn seed_flag_overrides_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = geoqod(&["run", &scenario("numeric-divergence"), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(out.join("numeric-divergence.csv")).unwrap()
    };
    assert_eq!(run("9", "a"), run("9", "b"));
    assert_ne!(run("9", "a"), run("10", "c"));
}

#[test]
fn validate_accepts_bundled_scenarios() {
    let o = geoqod(&["validate", &scenario("master-master-partition")]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("master-master-partition: ok (2 clusters, 2 links, 20000 operations"));
}

#[test]
fn unknown_cluster_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.toml",
        r#"
        name = "bad"
        [topology]
        clusters = [1, 2]
        links = [{ from = 1, to = 5 }]
        [workload]
        total_operations = 10
        "#,
    );
    for verb in ["validate", "run"] {
        let o = geoqod(&[verb, &path]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("unknown cluster 5"));
    }
}

#[test]
fn unreadable_or_malformed_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let garbage = write(dir.path(), "garbage.toml", "name = [");
    assert_eq!(geoqod(&["validate", &garbage]).status.code(), Some(2));
    assert_eq!(geoqod(&["run", "/nonexistent/scenario.toml"]).status.code(), Some(2));
}

#[test]
fn livelock_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "cap.toml",
        r#"
        name = "cap"
        [topology]
        clusters = [1, 2]
        links = [{ from = 1, to = 2 }]
        [workload]
        total_operations = 1000
        [network]
        event_cap = 100
        "#,
    );
    let o = geoqod(&["run", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("livelock"));
}

#[test]
fn compare_reports_ratios_and_rejects_window_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for name in ["plain-baseline", "write-burst-qod05pct", "workload-a-plain"] {
        assert!(geoqod(&["--quiet", "run", &scenario(name), "--out", out]).status.success());
    }
    let csv = |n: &str| dir.path().join(format!("{n}.csv")).to_string_lossy().into_owned();

    let same = geoqod(&["compare", &csv("plain-baseline"), &csv("plain-baseline")]);
    assert!(same.status.success());
    let text = stdout(&same);
    for metric in ["peak_window_bytes", "total_bytes", "batches"] {
        let line = text.lines().find(|l| l.starts_with(metric)).unwrap();
        assert!(line.ends_with("1.0000"), "{line}");
    }

    let o = geoqod(&["compare", &csv("plain-baseline"), &csv("write-burst-qod05pct")]);
    assert!(o.status.success());
    let peak = stdout(&o).lines().find(|l| l.starts_with("peak_window_bytes")).unwrap().to_owned();
    let ratio: f64 = peak.split_whitespace().last().unwrap().parse().unwrap();
    assert!(ratio < 1.0, "{peak}");

    let mismatch = geoqod(&["compare", &csv("plain-baseline"), &csv("workload-a-plain")]);
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("window sizes differ"));
}

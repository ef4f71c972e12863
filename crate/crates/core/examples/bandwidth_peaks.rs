//! Runs the bundled bursty write scenarios and compares their bandwidth
//! peaks against plain poll-based shipping.

use std::path::PathBuf;

use geoqod::harness::run_scenario;
use geoqod::metrics::compare;
use geoqod::scenario::Scenario;

fn main() -> geoqod::error::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let run = |name: &str| -> geoqod::error::Result<_> {
        let result = run_scenario(Scenario::from_path(&dir.join(format!("{name}.toml")))?)?;
        Ok(result.report.rows)
    };
    let plain = run("plain-baseline")?;
    for name in ["write-burst-qod05pct", "write-burst-qod2pct"] {
        println!("plain-baseline vs {name}");
        print!("{}", compare(&plain, &run(name)?)?);
        println!();
    }
    Ok(())
}

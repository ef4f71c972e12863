//! Per-window link metrics, the run summary, and CSV comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qod::ContainerId;
use crate::update::ClusterId;

/// One CSV row: traffic on one directed link during one window.
///
/// `bytes`, `batches` and `max_batch_bytes` are charged to the window of the
/// delivery time. `pending_max` is the largest cache depth of the link's
/// replication source seen during the window. `staleness_max_ms` is the
/// largest delivery time minus origin write time over updates delivered in
/// the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window_start_ms: u64,
    pub link_src: u32,
    pub link_dst: u32,
    pub bytes: u64,
    pub batches: u64,
    pub max_batch_bytes: u64,
    pub pending_max: u64,
    pub staleness_max_ms: u64,
}

pub const CSV_HEADER: [&str; 8] = [
    "window_start_ms",
    "link_src",
    "link_dst",
    "bytes",
    "batches",
    "max_batch_bytes",
    "pending_max",
    "staleness_max_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub window_ms: u64,
    /// Largest per-window byte total, summed over all links.
    pub peak_window_bytes: u64,
    pub total_bytes: u64,
    pub batches: u64,
    pub max_batch_bytes: u64,
    /// Mean bytes per window over the whole run, all links together.
    pub average_window_bytes: f64,
    pub max_staleness_ms: u64,
    pub operations: u64,
    pub wall_seconds: f64,
    pub ingestion_ops_per_sec: f64,
    pub final_time_ms: u64,
    pub pending_max: BTreeMap<ContainerId, u64>,
    pub digests: BTreeMap<ClusterId, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<WindowRow>,
    pub summary: Summary,
}

/// Totals recomputed from rows alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowTotals {
    pub peak_window_bytes: u64,
    pub total_bytes: u64,
    pub batches: u64,
    pub max_batch_bytes: u64,
    pub max_staleness_ms: u64,
}

impl RowTotals {
    pub fn from_rows(rows: &[WindowRow]) -> Self {
        let mut per_window: BTreeMap<u64, u64> = BTreeMap::new();
        let mut t = RowTotals::default();
        for r in rows {
            *per_window.entry(r.window_start_ms).or_default() += r.bytes;
            t.total_bytes += r.bytes;
            t.batches += r.batches;
            t.max_batch_bytes = t.max_batch_bytes.max(r.max_batch_bytes);
            t.max_staleness_ms = t.max_staleness_ms.max(r.staleness_max_ms);
        }
        t.peak_window_bytes = per_window.values().copied().max().unwrap_or(0);
        t
    }
}

pub fn write_csv(out: impl Write, rows: &[WindowRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<WindowRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Metrics(format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>())));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_csv_path(path: &Path) -> Result<Vec<WindowRow>> {
    read_csv(std::fs::File::open(path)?)
}

/// Window size implied by the rows: the smallest gap between distinct
/// window starts. `None` when the rows span a single window.
pub fn infer_window_ms(rows: &[WindowRow]) -> Option<u64> {
    let mut starts: Vec<u64> = rows.iter().map(|r| r.window_start_ms).collect();
    starts.sort_unstable();
    starts.dedup();
    starts.windows(2).map(|w| w[1] - w[0]).min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub window_ms: Option<u64>,
    pub a: RowTotals,
    pub b: RowTotals,
}

fn ratio(b: u64, a: u64) -> f64 {
    match (a, b) {
        (0, 0) => 1.0,
        (0, _) => f64::INFINITY,
        _ => b as f64 / a as f64,
    }
}

impl Comparison {
    pub fn peak_ratio(&self) -> f64 {
        ratio(self.b.peak_window_bytes, self.a.peak_window_bytes)
    }

    pub fn total_ratio(&self) -> f64 {
        ratio(self.b.total_bytes, self.a.total_bytes)
    }

    pub fn batch_ratio(&self) -> f64 {
        ratio(self.b.batches, self.a.batches)
    }

    pub fn max_batch_ratio(&self) -> f64 {
        ratio(self.b.max_batch_bytes, self.a.max_batch_bytes)
    }
}

/// Compares run B against run A. Both must use the same window size.
pub fn compare(a: &[WindowRow], b: &[WindowRow]) -> Result<Comparison> {
    let (wa, wb) = (infer_window_ms(a), infer_window_ms(b));
    if let (Some(x), Some(y)) = (wa, wb) {
        if x != y {
            return Err(Error::Metrics(format!("window sizes differ: {x} ms vs {y} ms")));
        }
    }
    Ok(Comparison { window_ms: wa.or(wb), a: RowTotals::from_rows(a), b: RowTotals::from_rows(b) })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let window = self.window_ms.map_or_else(|| "n/a".to_owned(), |w| format!("{w} ms"));
        writeln!(f, "window: {window}")?;
        writeln!(f, "{:<18}{:>16}{:>16}{:>10}", "metric", "a", "b", "b/a")?;
        let rows = [
            ("peak_window_bytes", self.a.peak_window_bytes, self.b.peak_window_bytes, self.peak_ratio()),
            ("total_bytes", self.a.total_bytes, self.b.total_bytes, self.total_ratio()),
            ("batches", self.a.batches, self.b.batches, self.batch_ratio()),
            ("max_batch_bytes", self.a.max_batch_bytes, self.b.max_batch_bytes, self.max_batch_ratio()),
        ];
        for (name, a, b, r) in rows {
            writeln!(f, "{name:<18}{a:>16}{b:>16}{r:>10.4}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(f, "window_ms: {}", self.window_ms)?;
        writeln!(f, "simulated_ms: {}", self.final_time_ms)?;
        writeln!(f, "operations: {}", self.operations)?;
        writeln!(f, "peak_window_bytes: {}", self.peak_window_bytes)?;
        writeln!(f, "total_bytes: {}", self.total_bytes)?;
        writeln!(f, "average_window_bytes: {:.1}", self.average_window_bytes)?;
        writeln!(f, "batches: {}", self.batches)?;
        writeln!(f, "max_batch_bytes: {}", self.max_batch_bytes)?;
        writeln!(f, "max_staleness_ms: {}", self.max_staleness_ms)?;
        writeln!(f, "ingestion_ops_per_sec: {:.0}", self.ingestion_ops_per_sec)?;
        for (cid, max) in &self.pending_max {
            writeln!(f, "pending_max[{cid}]: {max}")?;
        }
        for (cluster, digest) in &self.digests {
            writeln!(f, "digest[{cluster}]: {digest}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(start: u64, src: u32, bytes: u64, batches: u64) -> WindowRow {
        WindowRow {
            window_start_ms: start,
            link_src: src,
            link_dst: 9,
            bytes,
            batches,
            max_batch_bytes: bytes,
            pending_max: 0,
            staleness_max_ms: start / 10,
        }
    }

    #[test]
    fn csv_round_trip_with_header() {
        let rows = vec![row(0, 1, 10, 1), row(1000, 1, 0, 0)];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "window_start_ms,link_src,link_dst,bytes,batches,max_batch_bytes,pending_max,staleness_max_ms\n"
        ));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn empty_csv_still_has_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
        assert!(read_csv(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_csv(&b"a,b\n1,2\n"[..]).is_err());
    }

    #[test]
    fn peak_sums_links_within_window() {
        let rows = vec![row(0, 1, 10, 1), row(0, 2, 15, 1), row(100, 1, 20, 1)];
        let t = RowTotals::from_rows(&rows);
        assert_eq!(t.peak_window_bytes, 25);
        assert_eq!(t.total_bytes, 45);
        assert_eq!(t.batches, 3);
        assert_eq!(t.max_staleness_ms, 10);
    }

    #[test]
    fn identical_runs_compare_to_one() {
        let rows = vec![row(0, 1, 10, 1), row(100, 1, 20, 2)];
        let c = compare(&rows, &rows).unwrap();
        assert_eq!(c.window_ms, Some(100));
        assert_eq!((c.peak_ratio(), c.total_ratio(), c.batch_ratio()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn mismatched_windows_are_rejected() {
        let a = vec![row(0, 1, 1, 1), row(100, 1, 1, 1)];
        let b = vec![row(0, 1, 1, 1), row(1000, 1, 1, 1)];
        assert!(compare(&a, &b).is_err());
    }

    #[test]
    fn ratios_are_b_over_a() {
        let a = vec![row(0, 1, 100, 4), row(100, 1, 0, 0)];
        let b = vec![row(0, 1, 50, 1), row(100, 1, 50, 1)];
        let c = compare(&a, &b).unwrap();
        assert_eq!(c.peak_ratio(), 0.5);
        assert_eq!(c.total_ratio(), 1.0);
        assert_eq!(c.batch_ratio(), 0.5);
    }
}

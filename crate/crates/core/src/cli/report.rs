use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::manifest::{sha256_hex, write_atomic, FileDigest};
use super::plot::emit_plot;
use crate::protocol::{
    summarize, ProtocolError, RealizationResult, RunStatus, Strategy, SummaryTable, TestMetrics, TestSet,
};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const PLOT_FILE: &str = "q90_vs_bs.svg";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("results line {line}: {msg}")]
    Results { line: u64, msg: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("checksum mismatch for {path}: {detail}")]
    Checksum { path: String, detail: String },
    #[error("nothing to plot")]
    EmptySummary,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// 17 significant digits: enough to round-trip any f64.
fn machine(x: f64) -> String {
    format!("{x:.16e}")
}

/// `sig` significant digits in plain notation.
fn human(x: f64, sig: i32) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let decimals = sig - 1 - x.abs().log10().floor() as i32;
    if decimals >= 0 {
        format!("{x:.*}", decimals as usize)
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{}", (x / scale).round() * scale)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRow {
    realization: usize,
    seed: u64,
    bs_count: usize,
    strategy: Strategy,
    test_set: String,
    q90_initial_m: String,
    q90_after_m: String,
    gain: String,
    k_selected: usize,
    status: String,
}

#[derive(Debug, Serialize)]
struct SummaryCsvRow {
    bs_count: usize,
    strategy: Strategy,
    test_set: &'static str,
    mean_gain_pct: String,
    mean_q90_initial_m: String,
    mean_q90_after_m: String,
    n_valid: usize,
}

/// One row per (result, test set), ordered by (bs_count, strategy, test_set, realization).
pub fn results_csv(results: &[RealizationResult]) -> Result<Vec<u8>, ReportError> {
    let mut sorted: Vec<&RealizationResult> = results.iter().collect();
    sorted.sort_by_key(|r| (r.bs_count, r.strategy, r.realization));
    let mut w = csv::Writer::from_writer(Vec::new());
    for group in sorted.chunk_by(|a, b| (a.bs_count, a.strategy) == (b.bs_count, b.strategy)) {
        for t in TestSet::BOTH {
            for r in group {
                let m = r.metrics(t);
                w.serialize(ResultRow {
                    realization: r.realization,
                    seed: r.seed,
                    bs_count: r.bs_count,
                    strategy: r.strategy,
                    test_set: t.name().to_string(),
                    q90_initial_m: machine(m.q90_initial_m),
                    q90_after_m: machine(m.q90_after_m),
                    gain: machine(m.gain),
                    k_selected: r.k_selected,
                    status: r.status.label(),
                })?;
            }
        }
    }
    w.into_inner().map_err(|e| ReportError::Io(e.into_error()))
}

pub fn summary_csv(summary: &SummaryTable) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &summary.rows {
        w.serialize(SummaryCsvRow {
            bs_count: r.bs_count,
            strategy: r.strategy,
            test_set: r.test_set.name(),
            mean_gain_pct: machine(100.0 * r.mean_gain),
            mean_q90_initial_m: machine(r.mean_q90_initial_m),
            mean_q90_after_m: machine(r.mean_q90_after_m),
            n_valid: r.n_valid,
        })?;
    }
    w.into_inner().map_err(|e| ReportError::Io(e.into_error()))
}

/// Gain table in percent plus mean Q(0.9) values at 3 significant digits.
pub fn summary_text(summary: &SummaryTable) -> String {
    let mut out = summary.gain_table();
    let _ = writeln!(out, "Mean Q(0.9) in m (initial -> after)");
    for r in &summary.rows {
        let _ = writeln!(
            out,
            "{:>3} BS  {:<10}{:<6} {:>7} -> {:<7} valid {}/{}",
            r.bs_count,
            r.strategy.name(),
            r.test_set.name(),
            human(r.mean_q90_initial_m, 3),
            human(r.mean_q90_after_m, 3),
            r.n_valid,
            r.n_valid + r.n_invalid,
        );
    }
    out
}

/// Rebuilds per-realization results from a results CSV. Index sets and
/// digests are not stored there and come back empty.
pub fn read_results(path: &Path) -> Result<Vec<RealizationResult>, ReportError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut merged: BTreeMap<(usize, Strategy, usize), RealizationResult> = BTreeMap::new();
    for (i, row) in reader.deserialize::<ResultRow>().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let num = |s: &str, name: &str| {
            s.parse::<f64>().map_err(|_| ReportError::Results { line, msg: format!("bad {name} '{s}'") })
        };
        let test_set: TestSet = row.test_set.parse().map_err(|msg| ReportError::Results { line, msg })?;
        let metrics = TestMetrics {
            q90_initial_m: num(&row.q90_initial_m, "q90_initial_m")?,
            q90_after_m: num(&row.q90_after_m, "q90_after_m")?,
            gain: num(&row.gain, "gain")?,
        };
        let status = match row.status.as_str() {
            "ok" => RunStatus::Valid,
            other => RunStatus::Invalid(other.strip_prefix("invalid: ").unwrap_or(other).to_string()),
        };
        let entry = merged.entry((row.bs_count, row.strategy, row.realization)).or_insert_with(|| RealizationResult {
            realization: row.realization,
            seed: row.seed,
            bs_count: row.bs_count,
            strategy: row.strategy,
            k_selected: row.k_selected,
            selected: Vec::new(),
            test1: metrics,
            test2: metrics,
            test1_fallback: false,
            status,
            d1_digest: String::new(),
            candidates_digest: String::new(),
            nn1a_digest: String::new(),
        });
        match test_set {
            TestSet::Test1 => entry.test1 = metrics,
            TestSet::Test2 => entry.test2 = metrics,
        }
    }
    Ok(merged.into_values().collect())
}

fn put(dir: &Path, name: &str, bytes: &[u8], digests: &mut Vec<FileDigest>) -> Result<(), ReportError> {
    write_atomic(&dir.join(name), bytes)?;
    digests.push(FileDigest { path: name.to_string(), sha256: sha256_hex(bytes) });
    Ok(())
}

/// Writes results (when given), summary tables and the plot into `dir`.
/// Returns the digests of the written files.
pub fn write_results(
    results: Option<&[RealizationResult]>,
    summary: &SummaryTable,
    dir: &Path,
) -> Result<Vec<FileDigest>, ReportError> {
    std::fs::create_dir_all(dir)?;
    let mut digests = Vec::new();
    if let Some(results) = results {
        put(dir, RESULTS_FILE, &results_csv(results)?, &mut digests)?;
    }
    put(dir, SUMMARY_FILE, &summary_csv(summary)?, &mut digests)?;
    put(dir, SUMMARY_TEXT_FILE, summary_text(summary).as_bytes(), &mut digests)?;
    put(dir, PLOT_FILE, emit_plot(summary)?.as_bytes(), &mut digests)?;
    Ok(digests)
}

/// Summary recomputed from a results CSV.
pub fn summarize_file(path: &Path) -> Result<SummaryTable, ReportError> {
    Ok(summarize(&read_results(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(r: usize, strategy: Strategy, g1: f64, g2: f64) -> RealizationResult {
        let m = |g: f64| TestMetrics { q90_initial_m: 7.0, q90_after_m: 7.0 * (1.0 - g), gain: g };
        RealizationResult {
            realization: r,
            seed: 40 + r as u64,
            bs_count: 18,
            strategy,
            k_selected: 170,
            selected: Vec::new(),
            test1: m(g1),
            test2: m(g2),
            test1_fallback: false,
            status: RunStatus::Valid,
            d1_digest: String::new(),
            candidates_digest: String::new(),
            nn1a_digest: String::new(),
        }
    }

    #[test]
    fn results_round_trip_through_csv() {
        let mut results = vec![
            result(1, Strategy::Genie, 0.3, 1.0 / 3.0),
            result(0, Strategy::Genie, 0.1 + 0.2, 0.25),
            result(0, Strategy::Random, 0.06, 0.05),
        ];
        results[2].status = RunStatus::Invalid("fine-tuning: diverged, epoch 3".into());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RESULTS_FILE);
        std::fs::write(&path, results_csv(&results).unwrap()).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "realization,seed,bs_count,strategy,test_set,q90_initial_m,q90_after_m,gain,k_selected,status"
        );
        assert!(lines[1].starts_with("0,40,18,random,test1,"));
        assert!(lines[3].starts_with("0,40,18,genie,test1,"));
        assert!(lines[4].starts_with("1,41,18,genie,test1,"));
        assert!(lines[5].starts_with("0,40,18,genie,test2,"));

        let back = read_results(&path).unwrap();
        assert_eq!(back.len(), 3);
        for b in &back {
            let orig = results.iter().find(|r| (r.strategy, r.realization) == (b.strategy, b.realization)).unwrap();
            assert_eq!(orig.test1, b.test1);
            assert_eq!(orig.test2, b.test2);
            assert_eq!(orig.status, b.status);
        }
        let csv_of = |r: &[RealizationResult]| summary_csv(&summarize(r).unwrap()).unwrap();
        assert_eq!(csv_of(&back), csv_of(&results));
    }

    #[test]
    fn number_formats() {
        assert_eq!(machine(0.1), "1.0000000000000001e-1");
        assert_eq!(machine(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(human(5.6789, 3), "5.68");
        assert_eq!(human(12.345, 3), "12.3");
        assert_eq!(human(0.012345, 3), "0.0123");
        assert_eq!(human(12345.0, 3), "12300");
    }

    #[test]
    fn writes_are_complete_and_digested() {
        let results = vec![result(0, Strategy::Random, 0.06, 0.05), result(0, Strategy::Genie, 0.3, 0.2)];
        let summary = summarize(&results).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let digests = write_results(Some(&results), &summary, dir.path()).unwrap();
        assert_eq!(digests.len(), 4);
        for d in &digests {
            let bytes = std::fs::read(dir.path().join(&d.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), d.sha256);
        }
        let leftovers = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "tmp"))
            .count();
        assert_eq!(leftovers, 0);
        let summary_text = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert!(summary_text.starts_with("bs_count,strategy,test_set,mean_gain_pct,mean_q90_initial_m,mean_q90_after_m,n_valid\n"));
    }
}

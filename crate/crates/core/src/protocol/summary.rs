use std::collections::BTreeMap;
use std::fmt::Write;

use super::{ProtocolError, RealizationResult, Strategy, TestSet};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub bs_count: usize,
    pub strategy: Strategy,
    pub test_set: TestSet,
    /// Mean of the per-realization gains (fraction, not percent).
    pub mean_gain: f64,
    pub mean_q90_initial_m: f64,
    pub mean_q90_after_m: f64,
    pub n_valid: usize,
    pub n_invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    /// Sorted by (bs_count, strategy, test_set).
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn get(&self, bs_count: usize, strategy: Strategy, test_set: TestSet) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.bs_count == bs_count && r.strategy == strategy && r.test_set == test_set)
    }

    pub fn bs_counts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.bs_count).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Mean gains in percent, one table per BS count: a column per strategy,
    /// a row per test set, and the D1-only reference pinned at 0.
    pub fn gain_table(&self) -> String {
        let mut out = String::new();
        let strategies: Vec<Strategy> = {
            let mut s: Vec<Strategy> = self.rows.iter().map(|r| r.strategy).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        for bs in self.bs_counts() {
            let _ = writeln!(out, "Mean gain G (%), {bs} BS");
            let _ = write!(out, "{:<8}{:>9}", "", "D1 only");
            for s in &strategies {
                let _ = write!(out, "{:>11}", s.name());
            }
            out.push('\n');
            for t in TestSet::BOTH {
                let _ = write!(out, "{:<8}{:>9.1}", t.name(), 0.0);
                for &s in &strategies {
                    match self.get(bs, s, t) {
                        Some(r) if r.n_valid > 0 => {
                            let _ = write!(out, "{:>11.1}", 100.0 * r.mean_gain);
                        }
                        _ => {
                            let _ = write!(out, "{:>11}", "-");
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Per-(bs_count, strategy, test set) means over valid realizations. Values
/// are accumulated in realization order, so the result does not depend on the
/// order of `results`.
pub fn summarize(results: &[RealizationResult]) -> Result<SummaryTable, ProtocolError> {
    if results.is_empty() {
        return Err(ProtocolError::EmptyInput);
    }
    let mut groups: BTreeMap<(usize, Strategy), Vec<&RealizationResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.bs_count, r.strategy)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((bs_count, strategy), mut group) in groups {
        group.sort_by_key(|r| r.realization);
        let valid: Vec<_> = group.iter().filter(|r| r.status.is_valid()).collect();
        let n_valid = valid.len();
        for test_set in TestSet::BOTH {
            let mean = |f: &dyn Fn(&RealizationResult) -> f64| {
                if n_valid == 0 {
                    f64::NAN
                } else {
                    valid.iter().map(|r| f(r)).sum::<f64>() / n_valid as f64
                }
            };
            rows.push(SummaryRow {
                bs_count,
                strategy,
                test_set,
                mean_gain: mean(&|r| r.metrics(test_set).gain),
                mean_q90_initial_m: mean(&|r| r.metrics(test_set).q90_initial_m),
                mean_q90_after_m: mean(&|r| r.metrics(test_set).q90_after_m),
                n_valid,
                n_invalid: group.len() - n_valid,
            });
        }
    }
    Ok(SummaryTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{RunStatus, TestMetrics};
    use crate::seed;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn result(realization: usize, strategy: Strategy, g: f64) -> RealizationResult {
        let m = TestMetrics { q90_initial_m: 10.0, q90_after_m: 10.0 * (1.0 - g), gain: g };
        RealizationResult {
            realization,
            seed: 0,
            bs_count: 18,
            strategy,
            k_selected: 1,
            selected: vec![0],
            test1: m,
            test2: m,
            test1_fallback: false,
            status: RunStatus::Valid,
            d1_digest: String::new(),
            candidates_digest: String::new(),
            nn1a_digest: String::new(),
        }
    }

    #[test]
    fn means() {
        let t = summarize(&[result(0, Strategy::Random, 0.05), result(1, Strategy::Random, 0.07)]).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!((t.get(18, Strategy::Random, TestSet::Test1).unwrap().mean_gain - 0.06).abs() < 1e-15);
        let t = summarize(&[result(0, Strategy::Genie, 0.3)]).unwrap();
        assert_eq!(t.rows[0].mean_gain, 0.3);
        assert!(matches!(summarize(&[]), Err(ProtocolError::EmptyInput)));
    }

    #[test]
    fn invalid_results_are_excluded() {
        let mut bad = result(1, Strategy::Random, 0.9);
        bad.status = RunStatus::Invalid("diverged".into());
        let t = summarize(&[result(0, Strategy::Random, 0.1), bad]).unwrap();
        let row = t.get(18, Strategy::Random, TestSet::Test2).unwrap();
        assert_eq!((row.n_valid, row.n_invalid), (1, 1));
        assert_eq!(row.mean_gain, 0.1);
    }

    #[test]
    fn mean_matches_accumulation_oracle_and_is_order_free() {
        let mut rng = seed::rng(5);
        let gains: Vec<f64> = (0..100).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut results: Vec<_> = gains.iter().enumerate().map(|(i, &g)| result(i, Strategy::Genie, g)).collect();
        // Kahan-compensated oracle
        let (mut sum, mut c) = (0.0f64, 0.0f64);
        for &g in &gains {
            let y = g - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        let oracle = sum / 100.0;
        let t = summarize(&results).unwrap();
        let m = t.rows[0].mean_gain;
        assert!((m - oracle).abs() <= 1e-12 * oracle.abs().max(1e-3));
        results.shuffle(&mut rng);
        assert_eq!(summarize(&results).unwrap(), t);
    }

    #[test]
    fn gain_table_layout() {
        let t = summarize(&[result(0, Strategy::Random, 0.06), result(0, Strategy::Genie, 0.32)]).unwrap();
        let s = t.gain_table();
        assert!(s.contains("D1 only"));
        assert!(s.contains("6.0"));
        assert!(s.contains("32.0"));
    }
}

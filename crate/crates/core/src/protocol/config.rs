use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::neural::{NeuralError, TrainConfig};
use crate::scene::SceneConfig;
use crate::selection::SelectionMethod;

/// A selection strategy plus the fixed-fraction random baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Genie,
    Practical,
    /// Random selection of 60% of the candidates.
    Rand60,
    /// All candidates.
    Rand100,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Random, Strategy::Genie, Strategy::Practical, Strategy::Rand60, Strategy::Rand100];

    pub fn method(self) -> SelectionMethod {
        match self {
            Strategy::Genie => SelectionMethod::Genie,
            Strategy::Practical => SelectionMethod::Practical,
            Strategy::Random | Strategy::Rand60 | Strategy::Rand100 => SelectionMethod::Random,
        }
    }

    /// Percentage of candidates this strategy adds.
    pub fn x_percent(self, configured: f64) -> f64 {
        match self {
            Strategy::Rand60 => 60.0,
            Strategy::Rand100 => 100.0,
            _ => configured,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Genie => "genie",
            Strategy::Practical => "practical",
            Strategy::Rand60 => "rand60",
            Strategy::Rand100 => "rand100",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy '{s}' (expected one of random, genie, practical, rand60, rand100)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestSet {
    /// Candidates that were not selected.
    Test1,
    /// Whole pool minus D2.
    Test2,
}

impl TestSet {
    pub const BOTH: [TestSet; 2] = [TestSet::Test1, TestSet::Test2];

    pub fn name(self) -> &'static str {
        match self {
            TestSet::Test1 => "test1",
            TestSet::Test2 => "test2",
        }
    }
}

impl fmt::Display for TestSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "test1" => Ok(TestSet::Test1),
            "test2" => Ok(TestSet::Test2),
            other => Err(format!("unknown test set '{other}'")),
        }
    }
}

/// The `[experiment]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    /// Size of D1 and of the candidate set.
    pub n: usize,
    pub x_percent: f64,
    pub pool_size: usize,
    pub bs_counts: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub n_realizations: usize,
    pub base_seed: u64,
    /// Worker threads for realizations; 0 uses the global pool.
    pub workers: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            n: 1700,
            x_percent: 10.0,
            pool_size: 80_000,
            bs_counts: vec![18, 12, 8, 4],
            strategies: Strategy::ALL.to_vec(),
            n_realizations: 25,
            base_seed: 1,
            workers: 0,
        }
    }
}

/// Full experiment configuration, one field per config-file section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentSettings,
}

fn invalid(key: &str, constraint: impl Into<String>) -> ProtocolError {
    ProtocolError::InvalidConfig { key: key.to_string(), constraint: constraint.into() }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let e = &self.experiment;
        if !(0.0..=100.0).contains(&e.x_percent) {
            return Err(invalid("experiment.x_percent", format!("must lie in [0, 100], got {}", e.x_percent)));
        }
        if e.n == 0 {
            return Err(invalid("experiment.n", "must be >= 1"));
        }
        if e.n.checked_mul(2).is_none_or(|m| m > e.pool_size) {
            return Err(invalid("experiment.pool_size", format!("must be >= 2·n = {}", 2 * e.n)));
        }
        if e.bs_counts.is_empty() {
            return Err(invalid("experiment.bs_counts", "must not be empty"));
        }
        if e.strategies.is_empty() {
            return Err(invalid("experiment.strategies", "must not be empty"));
        }
        if e.n_realizations == 0 {
            return Err(invalid("experiment.n_realizations", "must be >= 1"));
        }
        self.scene.validate().map_err(|err| match err {
            crate::scene::SceneError::InvalidConfig { field, reason } => invalid(&format!("scene.{field}"), reason),
            other => invalid("scene", other.to_string()),
        })?;
        let n_bs = crate::scene::build_scene(self.scene.clone())?.n_bs();
        for &c in &e.bs_counts {
            if c == 0 || c > n_bs {
                return Err(invalid("experiment.bs_counts", format!("each count must lie in [1, {n_bs}], got {c}")));
            }
        }
        self.train.validate().map_err(|err| match err {
            NeuralError::InvalidConfig(msg) => {
                let field = msg.split_whitespace().next().unwrap_or_default();
                invalid(&format!("train.{field}"), msg.clone())
            }
            other => invalid("train", other.to_string()),
        })?;
        Ok(())
    }
}

/// Base stations kept when down-sampling the 18-BS layout to `count`
/// columns. Counts 12, 8 and 4 use fixed spread-out picks from the 3×6 grid
/// (index `row · 6 + col`); other counts take evenly strided indices.
pub fn bs_subset(count: usize, n_bs: usize) -> Vec<usize> {
    if n_bs == 18 {
        match count {
            18 => return (0..18).collect(),
            // columns 0, 2, 3, 5 of every row
            12 => return vec![0, 2, 3, 5, 6, 8, 9, 11, 12, 14, 15, 17],
            // staggered over the three rows
            8 => return vec![0, 2, 5, 7, 10, 12, 15, 17],
            // corners
            4 => return vec![0, 5, 12, 17],
            _ => {}
        }
    }
    let count = count.clamp(1, n_bs);
    let mut ids: Vec<usize> = (0..count).map(|i| i * n_bs / count).collect();
    ids.dedup();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment.n, 1700);
        assert_eq!(cfg.experiment.pool_size, 80_000);
    }

    #[test]
    fn validation_names_the_key() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.x_percent = 150.0;
        match cfg.validate() {
            Err(ProtocolError::InvalidConfig { key, .. }) => assert_eq!(key, "experiment.x_percent"),
            other => panic!("{other:?}"),
        }
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.bs_counts = vec![19];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.pool_size = 3000;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn subsets_are_sorted_and_sized() {
        for c in 1..=18 {
            let s = bs_subset(c, 18);
            assert_eq!(s.len(), c);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&i| i < 18));
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("nope".parse::<Strategy>().is_err());
    }
}

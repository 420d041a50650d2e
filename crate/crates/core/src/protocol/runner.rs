//! Realization runner.
//!
//! One realization at a given BS count: draw the pool, split it into D1,
//! candidates and the rest, train the locator (and, for practical selection,
//! the signal model) on D1, then for each strategy select `k` candidates,
//! fine-tune a copy of the locator on D2 and measure Q(0.9) on test1
//! (unselected candidates) and test2 (pool minus D2). All strategies of a
//! realization share the pool, the split and the initial locator.
//!
//! Gains are relative to the D1-only protocol: the initial Q(0.9) of test1 is
//! the locator's error over all candidates, that of test2 over the pool minus
//! D1. Every strategy of a realization is thus compared to the same baseline.

use std::collections::HashSet;
use std::sync::OnceLock;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{bs_subset, gain, q_quantile, ExperimentConfig, ProtocolError, Strategy, SummaryTable, TestSet};
use crate::exec::{self, Execution};
use crate::neural::{
    fit_normalizer, init_model, train, Locator, ModelArch, NeuralError, Phase, SignalModel, TrainConfig,
};
use crate::scene::{build_scene, generate_pool_with, partition_indices, subsample_bs, Dataset, Partition, Scene};
use crate::seed;
use crate::selection::{select_genie, select_practical, select_random, selection_count, SelectionResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestMetrics {
    pub q90_initial_m: f64,
    pub q90_after_m: f64,
    pub gain: f64,
}

impl TestMetrics {
    const INVALID: TestMetrics = TestMetrics { q90_initial_m: f64::NAN, q90_after_m: f64::NAN, gain: f64::NAN };
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Valid,
    Invalid(String),
}

impl RunStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, RunStatus::Valid)
    }

    pub fn label(&self) -> String {
        match self {
            RunStatus::Valid => "ok".to_string(),
            RunStatus::Invalid(why) => format!("invalid: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub realization: usize,
    pub seed: u64,
    pub bs_count: usize,
    pub strategy: Strategy,
    pub k_selected: usize,
    /// Selected candidate indices (positions within the candidate set).
    pub selected: Vec<usize>,
    pub test1: TestMetrics,
    pub test2: TestMetrics,
    /// True when test1 was empty (every candidate selected) and test2 was used.
    pub test1_fallback: bool,
    pub status: RunStatus,
    pub d1_digest: String,
    pub candidates_digest: String,
    pub nn1a_digest: String,
}

impl RealizationResult {
    pub fn metrics(&self, t: TestSet) -> &TestMetrics {
        match t {
            TestSet::Test1 => &self.test1,
            TestSet::Test2 => &self.test2,
        }
    }
}

/// Pool indices of every set involved in one strategy run.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSets {
    pub d1: Vec<usize>,
    pub candidates: Vec<usize>,
    pub selected: Vec<usize>,
    pub d2: Vec<usize>,
    pub test1: Vec<usize>,
    pub test2: Vec<usize>,
    pub pool_len: usize,
}

impl IndexSets {
    /// Checks the partition identities of the protocol.
    pub fn verify(&self, k: usize) -> Result<(), ProtocolError> {
        let set = |v: &[usize]| v.iter().copied().collect::<HashSet<_>>();
        let fail = |m: &str| Err(ProtocolError::Bookkeeping(m.to_string()));
        let (d1, cand, sel, d2, t1, t2) =
            (set(&self.d1), set(&self.candidates), set(&self.selected), set(&self.d2), set(&self.test1), set(&self.test2));
        if self.d2.len() != self.d1.len() + k || d2.len() != self.d2.len() {
            return fail("|D2| != |D1| + k");
        }
        if sel.len() != k || !sel.is_subset(&cand) {
            return fail("selected is not a k-subset of the candidates");
        }
        if !t1.is_disjoint(&sel) || t1.union(&sel).count() != cand.len() || !t1.is_subset(&cand) {
            return fail("test1 and selected do not partition the candidates");
        }
        if !d1.is_disjoint(&cand) || !d2.is_disjoint(&t2) || !t1.is_disjoint(&d1) || !t2.is_disjoint(&sel) {
            return fail("sets overlap");
        }
        if d2 != d1.union(&sel).copied().collect() {
            return fail("D2 != D1 ∪ selected");
        }
        if d2.len() + t2.len() != self.pool_len || t2.iter().chain(&d2).any(|&i| i >= self.pool_len) {
            return fail("test2 ∪ D2 != pool");
        }
        Ok(())
    }
}

fn digest_indices(v: &[usize]) -> String {
    let mut h = Sha256::new();
    for i in v {
        h.update((*i as u64).to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn digest_params(p: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in p {
        h.update(v.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn train_with_seed(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.clone() }
}

/// Shared state of one (realization, BS count) pair.
pub struct RealizationContext<'a> {
    cfg: &'a ExperimentConfig,
    scene: Scene,
    exec: Execution,
    pub realization: usize,
    pub bs_count: usize,
    pub seed: u64,
    pub pool: Dataset,
    pub partition: Partition,
    d1: Dataset,
    candidates: Dataset,
    /// Initial locator (NN1A) or the training error.
    nn1a: Result<Locator, NeuralError>,
    nn1b: OnceLock<Result<SignalModel, NeuralError>>,
    /// Initial Q(0.9) on the D1-only test1 and test2 sets.
    baseline_q90: Option<(f64, f64)>,
    d1_digest: String,
    candidates_digest: String,
    nn1a_digest: String,
}

impl<'a> RealizationContext<'a> {
    /// Draws the data and trains the initial locator.
    pub fn prepare(
        cfg: &'a ExperimentConfig,
        bs_count: usize,
        realization: usize,
        exec: Execution,
    ) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let e = &cfg.experiment;
        let scene = build_scene(cfg.scene.clone())?;
        let seed = seed::derive(e.base_seed, "realization", &[realization as u64]);
        let full = generate_pool_with(&scene, e.pool_size, seed::derive(seed, "pool", &[]), exec);
        let pool = subsample_bs(&full, &bs_subset(bs_count, scene.n_bs()))?;
        drop(full);
        let partition = partition_indices(pool.len(), e.n, seed::derive(seed, "split", &[]))?;
        let d1 = pool.select(&partition.d1);
        let candidates = pool.select(&partition.candidates);

        let bs = bs_count as u64;
        let train_seed = seed::derive(seed, "nn1a-train", &[bs, cfg.train.seed]);
        let nn1a = fit_normalizer(&d1, &scene).and_then(|normalizer| {
            let model = init_model(ModelArch::locator(bs_count), seed::derive(seed, "nn1a-init", &[bs]))?;
            let x = normalizer.apply_features(&d1.feature_matrix())?;
            let y = normalizer.apply_positions(&d1.position_matrix());
            let (model, _) = train(model, &x, &y, &train_with_seed(&cfg.train, train_seed), Phase::Initial)?;
            Ok(Locator { model, normalizer })
        });
        let (baseline_q90, nn1a_digest) = match &nn1a {
            Ok(loc) => {
                let errors = pool_errors(loc, &pool, exec)?;
                let on = |idx: &[usize]| q_quantile(&idx.iter().map(|&i| errors[i]).collect::<Vec<_>>(), 0.9);
                let mut not_d1: Vec<usize> = partition.candidates.iter().chain(&partition.rest).copied().collect();
                not_d1.sort_unstable();
                (Some((on(&partition.candidates)?, on(&not_d1)?)), digest_params(&loc.model.flat_params()))
            }
            Err(_) => (None, "diverged".to_string()),
        };
        Ok(Self {
            cfg,
            exec,
            realization,
            bs_count,
            seed,
            d1_digest: digest_indices(&partition.d1),
            candidates_digest: digest_indices(&partition.candidates),
            nn1a_digest,
            scene,
            pool,
            partition,
            d1,
            candidates,
            nn1a,
            nn1b: OnceLock::new(),
            baseline_q90,
        })
    }

    pub fn locator(&self) -> Result<&Locator, &NeuralError> {
        self.nn1a.as_ref()
    }

    /// Signal model (NN1B) trained on D1 with input and label swapped.
    pub fn signal_model(&self) -> Result<&SignalModel, &NeuralError> {
        self.nn1b
            .get_or_init(|| {
                let bs = self.bs_count as u64;
                let normalizer = fit_normalizer(&self.d1, &self.scene)?;
                let model = init_model(ModelArch::signal_model(self.bs_count), seed::derive(self.seed, "nn1b-init", &[bs]))?;
                let x = normalizer.apply_positions(&self.d1.position_matrix());
                let y = normalizer.apply_features(&self.d1.feature_matrix())?;
                let cfg = train_with_seed(&self.cfg.train, seed::derive(self.seed, "nn1b-train", &[bs, self.cfg.train.seed]));
                let (model, _) = train(model, &x, &y, &cfg, Phase::Initial)?;
                Ok(SignalModel { model, normalizer })
            })
            .as_ref()
    }

    fn select(&self, strategy: Strategy, locator: &Locator, k: usize) -> Result<SelectionResult, ProtocolError> {
        let n = self.candidates.len();
        Ok(match strategy {
            Strategy::Random | Strategy::Rand60 | Strategy::Rand100 => {
                let tag = strategy as u64;
                select_random(n, k, seed::derive(self.seed, "select", &[self.bs_count as u64, tag]))?
            }
            Strategy::Genie => select_genie(locator, &self.candidates, k, self.exec)?,
            Strategy::Practical => {
                let nn1b = self.signal_model().map_err(|e| ProtocolError::ModelUnavailable(format!("signal model: {e}")))?;
                select_practical(locator, nn1b, &self.candidates.positions(), k, self.exec)?
            }
        })
    }

    fn invalid(&self, strategy: Strategy, k: usize, why: String) -> RealizationResult {
        RealizationResult {
            realization: self.realization,
            seed: self.seed,
            bs_count: self.bs_count,
            strategy,
            k_selected: k,
            selected: Vec::new(),
            test1: TestMetrics::INVALID,
            test2: TestMetrics::INVALID,
            test1_fallback: false,
            status: RunStatus::Invalid(why),
            d1_digest: self.d1_digest.clone(),
            candidates_digest: self.candidates_digest.clone(),
            nn1a_digest: self.nn1a_digest.clone(),
        }
    }

    /// Runs one strategy; model failures yield an invalid result, bookkeeping
    /// violations are errors.
    pub fn run_strategy_detailed(&self, strategy: Strategy) -> Result<(RealizationResult, IndexSets), ProtocolError> {
        let e = &self.cfg.experiment;
        let k = selection_count(strategy.x_percent(e.x_percent), self.candidates.len());
        let locator = match &self.nn1a {
            Ok(l) => l,
            Err(err) => return Ok((self.invalid(strategy, k, format!("initial training: {err}")), self.sets(&[]))),
        };
        let selection = match self.select(strategy, locator, k) {
            Ok(s) => s,
            Err(ProtocolError::ModelUnavailable(m)) => return Ok((self.invalid(strategy, k, m), self.sets(&[]))),
            Err(other) => return Err(other),
        };
        let sets = self.sets(&selection.selected_indices);
        sets.verify(k)?;

        let d2 = self.pool.select(&sets.d2);
        let bs = self.bs_count as u64;
        let ft_seed = seed::derive(self.seed, "finetune", &[bs, self.cfg.train.seed]);
        let fine_tuned = (|| {
            let x = locator.normalizer.apply_features(&d2.feature_matrix())?;
            let y = locator.normalizer.apply_positions(&d2.position_matrix());
            let (model, _) =
                train(locator.model.clone(), &x, &y, &train_with_seed(&self.cfg.train, ft_seed), Phase::FineTune)?;
            Ok::<_, NeuralError>(Locator { model, normalizer: locator.normalizer.clone() })
        })();
        let nn2a = match fine_tuned {
            Ok(m) => m,
            Err(err) => {
                let mut r = self.invalid(strategy, k, format!("fine-tuning: {err}"));
                r.selected = selection.selected_indices;
                return Ok((r, sets));
            }
        };
        let after_errors = pool_errors(&nn2a, &self.pool, self.exec)?;
        let (base1, base2) = self.baseline_q90.ok_or_else(|| ProtocolError::ModelUnavailable("initial locator".into()))?;
        // With every candidate selected test1 is empty; it is then scored as test2.
        let test1_fallback = sets.test1.is_empty();
        let (test1_idx, base1) = if test1_fallback { (&sets.test2, base2) } else { (&sets.test1, base1) };
        let measure = |idx: &[usize], q90_initial_m: f64| -> Result<TestMetrics, ProtocolError> {
            let after: Vec<f64> = idx.iter().map(|&i| after_errors[i]).collect();
            let q90_after_m = q_quantile(&after, 0.9)?;
            Ok(TestMetrics { q90_initial_m, q90_after_m, gain: gain(q90_initial_m, q90_after_m)? })
        };
        let (test1, test2) = match (measure(test1_idx, base1), measure(&sets.test2, base2)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(err), _) | (_, Err(err)) => {
                let mut r = self.invalid(strategy, k, format!("metrics: {err}"));
                r.selected = selection.selected_indices;
                return Ok((r, sets));
            }
        };
        let result = RealizationResult {
            realization: self.realization,
            seed: self.seed,
            bs_count: self.bs_count,
            strategy,
            k_selected: k,
            selected: selection.selected_indices,
            test1,
            test2,
            test1_fallback,
            status: RunStatus::Valid,
            d1_digest: self.d1_digest.clone(),
            candidates_digest: self.candidates_digest.clone(),
            nn1a_digest: self.nn1a_digest.clone(),
        };
        Ok((result, sets))
    }

    pub fn run_strategy(&self, strategy: Strategy) -> Result<RealizationResult, ProtocolError> {
        Ok(self.run_strategy_detailed(strategy)?.0)
    }

    /// Pool-index sets for a selection given as candidate indices.
    fn sets(&self, selected_candidates: &[usize]) -> IndexSets {
        let p = &self.partition;
        let selected: Vec<usize> = selected_candidates.iter().map(|&c| p.candidates[c]).collect();
        let sel: HashSet<usize> = selected.iter().copied().collect();
        let test1: Vec<usize> = p.candidates.iter().copied().filter(|i| !sel.contains(i)).collect();
        let mut d2: Vec<usize> = p.d1.iter().chain(&selected).copied().collect();
        d2.sort_unstable();
        let mut test2: Vec<usize> = p.rest.iter().chain(&test1).copied().collect();
        test2.sort_unstable();
        IndexSets {
            d1: p.d1.clone(),
            candidates: p.candidates.clone(),
            selected,
            d2,
            test1,
            test2,
            pool_len: self.pool.len(),
        }
    }
}

fn pool_errors(locator: &Locator, pool: &Dataset, exec: Execution) -> Result<Vec<f64>, ProtocolError> {
    let pred = locator.predict_positions(&pool.feature_matrix(), exec)?;
    let truth: Array2<f64> = pool.position_matrix();
    Ok(pred.rows().into_iter().zip(truth.rows()).map(|(p, t)| (p[0] - t[0]).hypot(p[1] - t[1])).collect())
}

/// Runs a single strategy for one realization from scratch.
pub fn run_realization(
    cfg: &ExperimentConfig,
    bs_count: usize,
    strategy: Strategy,
    realization: usize,
) -> Result<RealizationResult, ProtocolError> {
    RealizationContext::prepare(cfg, bs_count, realization, Execution::Parallel)?.run_strategy(strategy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    /// Sorted by (bs_count, strategy, realization).
    pub results: Vec<RealizationResult>,
    pub summary: SummaryTable,
}

/// Sweeps BS counts × realizations × strategies. (BS count, realization)
/// jobs run on the worker pool; strategies of one job share its context.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ProtocolError> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let jobs: Vec<(usize, usize)> =
        e.bs_counts.iter().flat_map(|&b| (0..e.n_realizations).map(move |r| (b, r))).collect();
    let run_job = |&(bs_count, r): &(usize, usize)| -> Result<Vec<RealizationResult>, ProtocolError> {
        let ctx = RealizationContext::prepare(cfg, bs_count, r, Execution::Parallel)?;
        Execution::Parallel.map_slice(&e.strategies, |&s| ctx.run_strategy(s)).into_iter().collect()
    };
    let per_job = exec::with_workers(e.workers, || Execution::Parallel.map_slice(&jobs, run_job));
    let mut results = Vec::new();
    for job in per_job {
        results.extend(job?);
    }
    results.sort_by_key(|r| (r.bs_count, r.strategy, r.realization));
    let summary = super::summarize(&results)?;
    Ok(ExperimentOutcome { results, summary })
}

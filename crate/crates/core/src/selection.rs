//! Choosing which candidate positions to label.
//!
//! - Random: uniform draw without replacement.
//! - Genie: rank candidates by the locator's error on their true signals.
//! - Practical: rank by the locator's error on signals estimated from the
//!   candidate position alone by a signal model.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use thiserror::Error;

use crate::exec::Execution;
use crate::neural::{Locator, NeuralError, SignalModel};
use crate::scene::Dataset;
use crate::seed;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("cannot select {k} of {n} candidates")]
    KOutOfRange { k: usize, n: usize },
    #[error(transparent)]
    Model(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionMethod {
    Random,
    Genie,
    Practical,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMethod::Random => "random",
            SelectionMethod::Genie => "genie",
            SelectionMethod::Practical => "practical",
        })
    }
}

impl FromStr for SelectionMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(SelectionMethod::Random),
            "genie" => Ok(SelectionMethod::Genie),
            "practical" => Ok(SelectionMethod::Practical),
            other => Err(format!("unknown selection method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    /// Chosen candidate indices, ascending.
    pub selected_indices: Vec<usize>,
    /// Ranking score per candidate in meters; `None` for random selection.
    pub scores: Option<Vec<f64>>,
}

impl SelectionResult {
    /// Delimited text: `candidate_index,score,selected`, one row per candidate.
    pub fn to_csv(&self, n_candidates: usize) -> String {
        let mut flags = vec![false; n_candidates];
        for &i in &self.selected_indices {
            flags[i] = true;
        }
        let mut out = String::from("candidate_index,score,selected\n");
        for (i, sel) in flags.iter().enumerate() {
            let score = match &self.scores {
                Some(s) => format!("{:.16e}", s[i]),
                None => String::new(),
            };
            out.push_str(&format!("{i},{score},{}\n", u8::from(*sel)));
        }
        out
    }
}

/// `round(x_percent / 100 · n)`, halves rounded up.
pub fn selection_count(x_percent: f64, n: usize) -> usize {
    (x_percent * n as f64 / 100.0 + 0.5).floor() as usize
}

/// Source of path-gain fingerprints for candidate positions.
pub trait SignalEstimator {
    fn estimate(&self, positions: &Array2<f64>, exec: Execution) -> Result<Array2<f64>, NeuralError>;
}

impl SignalEstimator for SignalModel {
    fn estimate(&self, positions: &Array2<f64>, exec: Execution) -> Result<Array2<f64>, NeuralError> {
        self.predict_signals(positions, exec)
    }
}

/// Euclidean error of the locator on each sample, in input order.
pub fn positioning_errors(locator: &Locator, samples: &Dataset, exec: Execution) -> Result<Vec<f64>, NeuralError> {
    errors_for(locator, &samples.feature_matrix(), &samples.position_matrix(), exec)
}

fn errors_for(
    locator: &Locator,
    features: &Array2<f64>,
    positions: &Array2<f64>,
    exec: Execution,
) -> Result<Vec<f64>, NeuralError> {
    let pred = locator.predict_positions(features, exec)?;
    Ok(pred
        .rows()
        .into_iter()
        .zip(positions.rows())
        .map(|(p, t)| (p[0] - t[0]).hypot(p[1] - t[1]))
        .collect())
}

/// Indices of the `k` largest scores, ties going to the lower index; the
/// result is sorted ascending.
pub fn top_k_indices(scores: &[f64], k: usize) -> Result<Vec<usize>, SelectionError> {
    if k > scores.len() {
        return Err(SelectionError::KOutOfRange { k, n: scores.len() });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let by_rank = |&a: &usize, &b: &usize| scores[b].total_cmp(&scores[a]).then(a.cmp(&b));
    if k > 0 && k < idx.len() {
        idx.select_nth_unstable_by(k - 1, by_rank);
    }
    let mut top = idx[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

pub fn select_random(n_candidates: usize, k: usize, seed: u64) -> Result<SelectionResult, SelectionError> {
    if k > n_candidates {
        return Err(SelectionError::KOutOfRange { k, n: n_candidates });
    }
    let mut rng = seed::rng(seed::derive(seed, "select-random", &[]));
    let mut selected_indices = rand::seq::index::sample(&mut rng, n_candidates, k).into_vec();
    selected_indices.sort_unstable();
    Ok(SelectionResult { method: SelectionMethod::Random, selected_indices, scores: None })
}

/// Scores candidates with their true fingerprints.
pub fn select_genie(
    locator: &Locator,
    candidates: &Dataset,
    k: usize,
    exec: Execution,
) -> Result<SelectionResult, SelectionError> {
    if k > candidates.len() {
        return Err(SelectionError::KOutOfRange { k, n: candidates.len() });
    }
    let scores = positioning_errors(locator, candidates, exec)?;
    let selected_indices = top_k_indices(&scores, k)?;
    Ok(SelectionResult { method: SelectionMethod::Genie, selected_indices, scores: Some(scores) })
}

/// Scores candidates by `‖locator(estimator(p)) − p‖`. Neither model changes.
pub fn select_practical<E: SignalEstimator + ?Sized>(
    locator: &Locator,
    estimator: &E,
    candidate_positions: &[[f64; 2]],
    k: usize,
    exec: Execution,
) -> Result<SelectionResult, SelectionError> {
    let n = candidate_positions.len();
    if k > n {
        return Err(SelectionError::KOutOfRange { k, n });
    }
    let positions = Array2::from_shape_fn((n, 2), |(i, j)| candidate_positions[i][j]);
    let signals = estimator.estimate(&positions, exec)?;
    if signals.ncols() != locator.model.arch.input_dim {
        return Err(NeuralError::DimensionMismatch { expected: locator.model.arch.input_dim, got: signals.ncols() }.into());
    }
    let scores = errors_for(locator, &signals, &positions, exec)?;
    let selected_indices = top_k_indices(&scores, k)?;
    Ok(SelectionResult { method: SelectionMethod::Practical, selected_indices, scores: Some(scores) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{fit_normalizer, init_model, Model, ModelArch};
    use crate::scene::{build_scene, generate_pool, SceneConfig};
    use proptest::prelude::*;

    /// Looks up the true fingerprint of each candidate.
    struct TrueSignals<'a>(&'a Dataset);

    impl SignalEstimator for TrueSignals<'_> {
        fn estimate(&self, positions: &Array2<f64>, _: Execution) -> Result<Array2<f64>, NeuralError> {
            let n = self.0.n_features();
            let mut out = Array2::zeros((positions.nrows(), n));
            for (i, p) in positions.rows().into_iter().enumerate() {
                let s = self.0.samples.iter().find(|s| s.position == [p[0], p[1]]).expect("known position");
                for j in 0..n {
                    out[[i, j]] = s.features[j];
                }
            }
            Ok(out)
        }
    }

    fn center_locator(n_bs: usize) -> (Locator, Dataset) {
        let scene = build_scene(SceneConfig::default()).unwrap();
        let pool = generate_pool(&scene, 300, 4);
        let normalizer = fit_normalizer(&pool, &scene).unwrap();
        let model = Model::zeros(ModelArch::locator(n_bs)).unwrap();
        (Locator { model, normalizer }, pool)
    }

    #[test]
    fn center_predictor_errors() {
        let (loc, mut pool) = center_locator(18);
        pool.samples[0].position = [30.0, 60.0];
        pool.samples[1].position = [0.0, 0.0];
        let e = positioning_errors(&loc, &pool, Execution::Sequential).unwrap();
        assert_eq!(e[0], 0.0);
        assert!((e[1] - 67.08).abs() < 0.01);
        let mut rev = pool.clone();
        rev.samples.reverse();
        let mut er = positioning_errors(&loc, &rev, Execution::Sequential).unwrap();
        er.reverse();
        assert_eq!(e, er);
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k_indices(&[5.0, 1.0, 3.0, 2.0], 2).unwrap(), vec![0, 2]);
        assert_eq!(top_k_indices(&[2.0, 2.0, 1.0], 1).unwrap(), vec![0]);
        assert!(top_k_indices(&[2.0, 2.0, 1.0], 0).unwrap().is_empty());
        assert!(matches!(top_k_indices(&[1.0], 2), Err(SelectionError::KOutOfRange { .. })));
    }

    fn full_sort_oracle(scores: &[f64], k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let mut top = idx[..k].to_vec();
        top.sort_unstable();
        top
    }

    proptest! {
        #[test]
        fn top_k_matches_full_sort(scores in proptest::collection::vec(0u8..20, 0..300), frac in 0.0f64..=1.0) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let k = (scores.len() as f64 * frac) as usize;
            prop_assert_eq!(top_k_indices(&scores, k).unwrap(), full_sort_oracle(&scores, k));
        }

        #[test]
        fn random_selection_is_k_distinct(n in 0usize..2000, frac in 0.0f64..=1.0, seed: u64) {
            let k = (n as f64 * frac) as usize;
            let r = select_random(n, k, seed).unwrap();
            prop_assert_eq!(r.selected_indices.len(), k);
            prop_assert!(r.selected_indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(r.selected_indices.iter().all(|&i| i < n));
            prop_assert_eq!(r, select_random(n, k, seed).unwrap());
        }
    }

    #[test]
    fn counts() {
        assert_eq!(selection_count(10.0, 1700), 170);
        assert_eq!(selection_count(60.0, 1700), 1020);
        assert_eq!(selection_count(100.0, 1700), 1700);
        assert_eq!(selection_count(10.0, 5), 1); // 0.5 rounds up
        assert_eq!(selection_count(0.0, 1700), 0);
        assert_eq!(select_random(1700, 1700, 3).unwrap().selected_indices, (0..1700).collect::<Vec<_>>());
        assert!(select_random(10, 11, 3).is_err());
    }

    #[test]
    fn genie_with_center_model_picks_farthest() {
        let (loc, pool) = center_locator(18);
        let k = 30;
        let r = select_genie(&loc, &pool, k, Execution::Parallel).unwrap();
        let dist: Vec<f64> = pool.samples.iter().map(|s| (s.position[0] - 30.0).hypot(s.position[1] - 60.0)).collect();
        assert_eq!(r.selected_indices, full_sort_oracle(&dist, k));
        let all = select_genie(&loc, &pool, pool.len(), Execution::Parallel).unwrap();
        assert_eq!(all.selected_indices, (0..pool.len()).collect::<Vec<_>>());
    }

    #[test]
    fn practical_with_true_signals_equals_genie() {
        let scene = build_scene(SceneConfig::default()).unwrap();
        let pool = generate_pool(&scene, 400, 12);
        let normalizer = fit_normalizer(&pool, &scene).unwrap();
        let locator = Locator { model: init_model(ModelArch::locator(18), 2).unwrap(), normalizer };
        let genie = select_genie(&locator, &pool, 40, Execution::Parallel).unwrap();
        let practical =
            select_practical(&locator, &TrueSignals(&pool), &pool.positions(), 40, Execution::Parallel).unwrap();
        assert_eq!(genie.selected_indices, practical.selected_indices);
        assert_eq!(genie.scores, practical.scores);
        let scores = genie.scores.as_ref().unwrap();
        let min_sel = genie.selected_indices.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
        let max_rest = (0..pool.len())
            .filter(|i| !genie.selected_indices.contains(i))
            .map(|i| scores[i])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_sel >= max_rest);
        let none = select_practical(&locator, &TrueSignals(&pool), &pool.positions(), 0, Execution::Parallel).unwrap();
        assert!(none.selected_indices.is_empty());
    }

    #[test]
    fn practical_with_signal_model_is_pure() {
        let scene = build_scene(SceneConfig::default()).unwrap();
        let pool = generate_pool(&scene, 200, 13);
        let normalizer = fit_normalizer(&pool, &scene).unwrap();
        let locator = Locator { model: init_model(ModelArch::locator(18), 2).unwrap(), normalizer: normalizer.clone() };
        let nn1b = SignalModel { model: init_model(ModelArch::signal_model(18), 3).unwrap(), normalizer };
        let (l0, b0) = (locator.clone(), nn1b.clone());
        let a = select_practical(&locator, &nn1b, &pool.positions(), 20, Execution::Parallel).unwrap();
        let b = select_practical(&locator, &nn1b, &pool.positions(), 20, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!((l0, b0), (locator.clone(), nn1b));
        let wrong = SignalModel { model: init_model(ModelArch::signal_model(4), 3).unwrap(), normalizer: fit_normalizer(&crate::scene::subsample_bs(&pool, &[0, 1, 2, 3]).unwrap(), &scene).unwrap() };
        assert!(select_practical(&locator, &wrong, &pool.positions(), 5, Execution::Parallel).is_err());
    }

    #[test]
    fn csv_rows() {
        let r = SelectionResult { method: SelectionMethod::Genie, selected_indices: vec![1], scores: Some(vec![0.5, 2.0]) };
        let csv = r.to_csv(2);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("1,2.0000000000000000e0,1"));
        let r = select_random(3, 1, 0).unwrap();
        assert!(r.to_csv(3).lines().nth(1).unwrap().contains(",,"));
    }
}

//! Fingerprint samples, pools, BS down-sampling, splits and the text file format.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::field::{generate_fields, path_gain_vector};
use super::{Scene, SceneConfig, SceneError};
use crate::exec::Execution;
use crate::seed;

/// One fingerprint: path gains at the retained base stations plus the label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub position: [f64; 2],
    pub features: Vec<f64>,
    /// Diagnostic only; never used as a model input.
    pub los_flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub bs_ids: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.bs_ids.len()
    }

    /// Samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            bs_ids: self.bs_ids.clone(),
        }
    }

    pub fn feature_matrix(&self) -> Array2<f64> {
        let d = self.n_features();
        Array2::from_shape_fn((self.len(), d), |(i, j)| self.samples[i].features[j])
    }

    pub fn position_matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), 2), |(i, j)| self.samples[i].position[j])
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| s.position).collect()
    }
}

/// Draws `n_points` uniform positions and their path gains under a single
/// channel realization derived from `seed`.
pub fn generate_pool(scene: &Scene, n_points: usize, seed: u64) -> Dataset {
    generate_pool_with(scene, n_points, seed, Execution::Parallel)
}

pub fn generate_pool_with(scene: &Scene, n_points: usize, seed: u64, exec: Execution) -> Dataset {
    let fields = generate_fields(scene, seed::derive(seed, "pool-fields", &[]));
    let mut rng = seed::rng(seed::derive(seed, "pool-positions", &[]));
    let (w, l) = (scene.config.width_m, scene.config.length_m);
    let positions: Vec<[f64; 2]> = (0..n_points)
        .map(|_| [rng.random_range(0.0..=w), rng.random_range(0.0..=l)])
        .collect();
    let samples = exec.map_slice(&positions, |&p| {
        let pg = path_gain_vector(scene, &fields, p).expect("uniform draw lies inside the scene");
        Sample { position: p, features: pg.pg_db, los_flags: pg.los }
    });
    Dataset { samples, bs_ids: (0..scene.n_bs()).collect() }
}

/// Keeps only the columns of the base stations listed in `keep`.
pub fn subsample_bs(dataset: &Dataset, keep: &[usize]) -> Result<Dataset, SceneError> {
    if keep.is_empty() {
        return Err(SceneError::UnknownBsIndex(usize::MAX));
    }
    let mut cols = Vec::with_capacity(keep.len());
    for (i, &k) in keep.iter().enumerate() {
        if i > 0 && keep[i - 1] >= k {
            return Err(SceneError::UnknownBsIndex(k));
        }
        let col = dataset.bs_ids.iter().position(|&b| b == k).ok_or(SceneError::UnknownBsIndex(k))?;
        cols.push(col);
    }
    let samples = dataset
        .samples
        .iter()
        .map(|s| Sample {
            position: s.position,
            features: cols.iter().map(|&c| s.features[c]).collect(),
            los_flags: cols.iter().map(|&c| s.los_flags[c]).collect(),
        })
        .collect();
    Ok(Dataset { samples, bs_ids: keep.to_vec() })
}

/// Index sets of a pool split: two disjoint draws of `n` plus the remainder.
/// Each set is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub d1: Vec<usize>,
    pub candidates: Vec<usize>,
    pub rest: Vec<usize>,
}

pub fn partition_indices(pool_len: usize, n: usize, seed: u64) -> Result<Partition, SceneError> {
    if n.checked_mul(2).is_none_or(|m| m > pool_len) {
        return Err(SceneError::PoolTooSmall { pool: pool_len, n });
    }
    let mut idx: Vec<usize> = (0..pool_len).collect();
    idx.shuffle(&mut seed::rng(seed::derive(seed, "partition", &[])));
    let mut d1 = idx[..n].to_vec();
    let mut candidates = idx[n..2 * n].to_vec();
    let mut rest = idx[2 * n..].to_vec();
    d1.sort_unstable();
    candidates.sort_unstable();
    rest.sort_unstable();
    Ok(Partition { d1, candidates, rest })
}

pub fn partition_pool(
    pool: &Dataset,
    n: usize,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), SceneError> {
    let p = partition_indices(pool.len(), n, seed)?;
    Ok((pool.select(&p.d1), pool.select(&p.candidates), pool.select(&p.rest)))
}

const MAGIC_LINE: &str = "# activepos-dataset v1";

/// Writes the dataset as delimited text: `#` header lines (format tag, seed,
/// scene config echo, bs_ids), a column header, then one record per sample:
/// `x, y, pg[..], los[..]`.
pub fn write_dataset<W: Write>(
    mut out: W,
    dataset: &Dataset,
    scene: &SceneConfig,
    seed: u64,
) -> Result<(), SceneError> {
    writeln!(out, "{MAGIC_LINE}")?;
    writeln!(out, "# seed={seed}")?;
    let scene_toml = toml::to_string(scene).expect("scene config serializes");
    for line in scene_toml.lines().filter(|l| !l.trim().is_empty()) {
        writeln!(out, "# scene.{}", line.replace(' ', ""))?;
    }
    let ids: Vec<String> = dataset.bs_ids.iter().map(|b| b.to_string()).collect();
    writeln!(out, "# bs_ids={}", ids.join(","))?;
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend(dataset.bs_ids.iter().map(|b| format!("pg{b}")));
    header.extend(dataset.bs_ids.iter().map(|b| format!("los{b}")));
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for s in &dataset.samples {
        line.clear();
        line.push_str(&format!("{},{}", s.position[0], s.position[1]));
        for v in &s.features {
            line.push_str(&format!(",{v}"));
        }
        for &l in &s.los_flags {
            line.push_str(if l { ",1" } else { ",0" });
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a file produced by [`write_dataset`]; returns the dataset, the
/// echoed scene config and the seed.
pub fn read_dataset<R: BufRead>(input: R) -> Result<(Dataset, SceneConfig, u64), SceneError> {
    let fmt = |line: usize, msg: &str| SceneError::Format { line, msg: msg.to_string() };
    let mut lines = input.lines().enumerate();
    let mut seed = None;
    let mut scene_toml = String::new();
    let mut bs_ids: Option<Vec<usize>> = None;
    let (_, first) = lines.next().ok_or_else(|| fmt(1, "empty file"))?;
    if first? != MAGIC_LINE {
        return Err(fmt(1, "missing format tag"));
    }
    let mut samples = Vec::new();
    let mut seen_header = false;
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if let Some(meta) = line.strip_prefix("# ") {
            if let Some(v) = meta.strip_prefix("seed=") {
                seed = Some(v.parse().map_err(|_| fmt(lineno, "bad seed"))?);
            } else if let Some(v) = meta.strip_prefix("scene.") {
                scene_toml.push_str(&v.replacen('=', " = ", 1));
                scene_toml.push('\n');
            } else if let Some(v) = meta.strip_prefix("bs_ids=") {
                let ids = v
                    .split(',')
                    .map(|t| t.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| fmt(lineno, "bad bs_ids"))?;
                bs_ids = Some(ids);
            }
            continue;
        }
        let n = bs_ids.as_ref().ok_or_else(|| fmt(lineno, "bs_ids header missing"))?.len();
        if !seen_header {
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + 2 * n {
            return Err(fmt(lineno, &format!("expected {} columns, got {}", 2 + 2 * n, fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| fmt(lineno, &format!("bad number '{s}'")));
        let position = [num(fields[0])?, num(fields[1])?];
        let features = fields[2..2 + n].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
        let los_flags = fields[2 + n..]
            .iter()
            .map(|s| match *s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(fmt(lineno, "bad LOS flag")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        samples.push(Sample { position, features, los_flags });
    }
    let scene: SceneConfig = toml::from_str(&scene_toml).map_err(|e| fmt(0, &e.to_string()))?;
    let bs_ids = bs_ids.ok_or_else(|| fmt(0, "bs_ids header missing"))?;
    let seed = seed.ok_or_else(|| fmt(0, "seed header missing"))?;
    let dataset = Dataset { samples, bs_ids };
    if !check_dataset(&dataset, &super::build_scene(scene.clone())?) {
        return Err(fmt(0, "duplicate BS ids or positions outside the scene"));
    }
    Ok((dataset, scene, seed))
}

/// Checks the structural dataset invariants.
pub(crate) fn check_dataset(dataset: &Dataset, scene: &Scene) -> bool {
    let ids: HashSet<_> = dataset.bs_ids.iter().collect();
    ids.len() == dataset.bs_ids.len()
        && dataset.samples.iter().all(|s| {
            s.features.len() == dataset.bs_ids.len()
                && s.los_flags.len() == dataset.bs_ids.len()
                && scene.contains(s.position[0], s.position[1])
        })
}

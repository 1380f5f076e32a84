//! SMOTE-NC oversampling of the minority class.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::rng::{stream_rng, Stream};
use crate::preprocess::steps::median;
use crate::preprocess::EncodedMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalStrategy {
    /// Most frequent value among the seed and its k neighbours; ties go to the seed.
    MajorityVote,
    CopySeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
    pub categorical_strategy: CategoricalStrategy,
    /// Distance charged per mismatched categorical. `None` uses the median of
    /// the minority rows' continuous standard deviations.
    pub categorical_penalty: Option<f64>,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            seed: 0,
            categorical_strategy: CategoricalStrategy::MajorityVote,
            categorical_penalty: None,
        }
    }
}

/// Where a synthetic row came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticOrigin {
    pub seed_row: usize,
    pub neighbor_row: usize,
    /// The seed's k nearest minority neighbours, nearest first.
    pub neighborhood: Vec<usize>,
}

/// `(label, rows)` of the smaller class; `None` when the classes are balanced.
fn minority_rows(matrix: &EncodedMatrix) -> Result<Option<(u8, Vec<usize>)>> {
    let (neg, pos) = matrix.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::invalid("oversampling needs both classes present"));
    }
    if neg == pos {
        return Ok(None);
    }
    let label = u8::from(pos < neg);
    let rows = (0..matrix.n_rows()).filter(|&r| matrix.target[r] == label).collect();
    Ok(Some((label, rows)))
}

/// Median of the per-column population standard deviations over `rows`; 1 when
/// there are no continuous columns.
pub fn categorical_penalty(matrix: &EncodedMatrix, rows: &[usize]) -> f64 {
    let k = matrix.n_cont();
    if k == 0 || rows.is_empty() {
        return 1.0;
    }
    let n = rows.len() as f64;
    let mut stds: Vec<f64> = (0..k)
        .map(|j| {
            let mean = rows.iter().map(|&r| matrix.cont[r * k + j]).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|&r| (matrix.cont[r * k + j] - mean).powi(2))
                .sum::<f64>()
                / n;
            var.sqrt()
        })
        .collect();
    median(&mut stds).unwrap_or(1.0)
}

/// Squared mixed distance: squared Euclidean over continuous features plus
/// `delta²` per categorical mismatch.
pub fn mixed_distance_sq(matrix: &EncodedMatrix, a: usize, b: usize, delta: f64) -> f64 {
    let cont: f64 = matrix
        .cont_row(a)
        .iter()
        .zip(matrix.cont_row(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let mismatches = matrix
        .cat_row(a)
        .iter()
        .zip(matrix.cat_row(b))
        .filter(|(x, y)| x != y)
        .count();
    cont + mismatches as f64 * delta * delta
}

fn knn_among(matrix: &EncodedMatrix, row: usize, pool: &[usize], k: usize, delta: f64) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&r| r != row)
        .map(|&r| (mixed_distance_sq(matrix, row, r, delta), r))
        .collect();
    let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if scored.len() > k {
        scored.select_nth_unstable_by(k, by);
        scored.truncate(k);
    }
    scored.sort_by(by);
    scored.into_iter().map(|(_, r)| r).collect()
}

/// The `k` nearest rows of the same (minority) class as `row`, nearest first,
/// ties broken by lower row index.
pub fn nearest_minority_neighbors(
    matrix: &EncodedMatrix,
    row: usize,
    k: usize,
    config: &SmoteConfig,
) -> Result<Vec<usize>> {
    if row >= matrix.n_rows() {
        return Err(Error::invalid(format!("row {row} out of range")));
    }
    let Some((label, pool)) = minority_rows(matrix)? else {
        return Err(Error::invalid("classes are balanced; there is no minority class"));
    };
    if matrix.target[row] != label {
        return Err(Error::invalid(format!("row {row} is not in the minority class")));
    }
    if k >= pool.len() {
        return Err(Error::invalid(format!(
            "k = {k} needs more than {} minority rows",
            pool.len()
        )));
    }
    let delta = config
        .categorical_penalty
        .unwrap_or_else(|| categorical_penalty(matrix, &pool));
    Ok(knn_among(matrix, row, &pool, k, delta))
}

pub fn oversample(matrix: &EncodedMatrix, config: &SmoteConfig) -> Result<EncodedMatrix> {
    oversample_with_origins(matrix, config).map(|(m, _)| m)
}

/// Oversamples and also reports, for each synthetic row, its seed, chosen
/// neighbour and neighbourhood.
pub fn oversample_with_origins(
    matrix: &EncodedMatrix,
    config: &SmoteConfig,
) -> Result<(EncodedMatrix, Vec<SyntheticOrigin>)> {
    if config.k_neighbors == 0 {
        return Err(Error::invalid("smote k_neighbors must be at least 1"));
    }
    let Some((label, pool)) = minority_rows(matrix)? else {
        return Ok((matrix.clone(), Vec::new()));
    };
    let k = config.k_neighbors;
    if pool.len() <= k {
        return Err(Error::invalid(format!(
            "minority class has {} rows, need more than k_neighbors = {k}; use a smaller --smote-k",
            pool.len()
        )));
    }
    if let Some(p) = config.categorical_penalty {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::invalid(format!(
                "categorical penalty must be finite and >= 0, got {p}"
            )));
        }
    }
    let delta = config
        .categorical_penalty
        .unwrap_or_else(|| categorical_penalty(matrix, &pool));
    let deficit = matrix.n_rows() - 2 * pool.len();

    // Seed choices first, so neighbour lists are only computed for used seeds.
    struct Draw {
        seed_pos: usize,
        neighbor_pos: usize,
        lambda: f64,
    }
    let draws: Vec<Draw> = (0..deficit)
        .map(|i| {
            let mut rng = stream_rng(config.seed, Stream::Smote, i as u64);
            Draw {
                seed_pos: rng.random_range(0..pool.len()),
                neighbor_pos: rng.random_range(0..k),
                lambda: rng.random::<f64>(),
            }
        })
        .collect();
    let mut used = vec![false; pool.len()];
    for d in &draws {
        used[d.seed_pos] = true;
    }
    let neighborhoods: Vec<Option<Vec<usize>>> = (0..pool.len())
        .into_par_iter()
        .map(|p| used[p].then(|| knn_among(matrix, pool[p], &pool, k, delta)))
        .collect();

    let mut out = matrix.clone();
    let mut origins = Vec::with_capacity(deficit);
    let n_cont = matrix.n_cont();
    let mut cont = vec![0.0; n_cont];
    let mut cat = vec![0u32; matrix.n_cat()];
    let missing = vec![false; n_cont];
    for d in draws {
        let s = pool[d.seed_pos];
        let hood = neighborhoods[d.seed_pos].as_ref().expect("computed for used seeds");
        let z = hood[d.neighbor_pos];
        for (j, c) in cont.iter_mut().enumerate() {
            let (a, b) = (matrix.cont_row(s)[j], matrix.cont_row(z)[j]);
            *c = (a + d.lambda * (b - a)).clamp(a.min(b), a.max(b));
        }
        for (j, c) in cat.iter_mut().enumerate() {
            let seed_value = matrix.cat_row(s)[j];
            *c = match config.categorical_strategy {
                CategoricalStrategy::CopySeed => seed_value,
                CategoricalStrategy::MajorityVote => majority(seed_value, hood.iter().map(|&r| matrix.cat_row(r)[j])),
            };
        }
        out.push_row(&cat, &cont, &missing, label);
        origins.push(SyntheticOrigin {
            seed_row: s,
            neighbor_row: z,
            neighborhood: hood.clone(),
        });
    }
    Ok((out, origins))
}

fn majority(seed_value: u32, others: impl Iterator<Item = u32>) -> u32 {
    let mut counts: Vec<(u32, usize)> = vec![(seed_value, 1)];
    for v in others {
        match counts.iter_mut().find(|(c, _)| *c == v) {
            Some((_, n)) => *n += 1,
            None => counts.push((v, 1)),
        }
    }
    // The seed's entry is first, so a strict comparison keeps it on ties.
    let mut best = counts[0];
    for &(v, n) in &counts[1..] {
        if n > best.1 {
            best = (v, n);
        }
    }
    best.0
}

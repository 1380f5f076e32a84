use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::rng::{stream_rng, Stream};

/// Deterministic k-fold partition of row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Unstratified plan over `n_rows` rows.
    pub fn new(n_rows: usize, k: usize, seed: u64) -> Result<FoldPlan> {
        Self::stratified(&vec![0; n_rows], k, seed)
    }

    /// Shuffles each class separately, lays the classes end to end and deals
    /// rows round-robin. Fold sizes then differ by at most one overall and per class.
    pub fn stratified(targets: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
        let n = targets.len();
        if k < 2 {
            return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
        }
        if k > n {
            return Err(Error::invalid(format!("k = {k} exceeds the {n} available rows")));
        }
        let mut rng = stream_rng(seed, Stream::Folds, 0);
        let mut order = Vec::with_capacity(n);
        for class in [1u8, 0] {
            let mut idx: Vec<usize> = (0..n).filter(|&i| targets[i] == class).collect();
            idx.shuffle(&mut rng);
            order.extend(idx);
        }
        let mut assignments = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            assignments[row] = pos % k;
        }
        Ok(FoldPlan { k, seed, assignments })
    }

    pub fn n_rows(&self) -> usize {
        self.assignments.len()
    }

    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

//! Evaluation: AUROC, ROC curve, confusion matrix, k-fold aggregation and
//! permutation importance.

mod cv;
mod importance;
pub mod plot;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, CvOutcome, CvSummary, FoldResult, SmoteOptions, SmoteScope};
pub use importance::{permutation_importance, FeatureImportance, ImportanceReport};

use crate::error::{Error, Result};
use crate::model::{Batch, EmbNet};
use crate::nncore::softmax;
use crate::preprocess::EncodedMatrix;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score is NaN".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("label {l} is not 0 or 1")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid(format!(
            "AUROC needs both classes ({neg} negative, {pos} positive)"
        )));
    }
    Ok((neg, pos))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, computed from midranks.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (neg, pos) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of doubled midranks, kept integral until the final division.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share midrank (i + j + 2) / 2
        let mid2 = (i + j + 2) as u128;
        let positives = order[i..=j].iter().filter(|&&r| labels[r] == 1).count() as u128;
        rank_sum2 += mid2 * positives;
        i = j + 1;
    }
    let (pos, neg) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// One point per distinct score, thresholds descending, preceded by `(0, 0)`
/// at threshold `max + 1`. A score `s` is called positive at threshold `t` iff `s ≥ t`.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (neg, pos) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let max = scores[order[0]];
    let mut points = vec![RocPoint {
        threshold: max + 1.0,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC polyline.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tp += other.tp;
    }
}

/// Predicts 1 iff the score is at least `threshold`.
pub fn confusion_and_accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<(Confusion, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (l == 1, s >= threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok((c, c.accuracy()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_rows: usize,
    pub accuracy: f64,
    pub auroc: f64,
    pub confusion: Confusion,
    pub threshold: f64,
    pub roc_points: Vec<RocPoint>,
}

pub fn eval_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport> {
    let (confusion, accuracy) = confusion_and_accuracy(scores, labels, threshold)?;
    Ok(EvalReport {
        n_rows: scores.len(),
        accuracy,
        auroc: auroc(scores, labels)?,
        confusion,
        threshold,
        roc_points: roc_curve(scores, labels)?,
    })
}

const INFER_CHUNK: usize = 1024;

/// Positive-class probabilities for every row of a prepared matrix.
pub fn predict_proba(net: &EmbNet<f32>, data: &EncodedMatrix) -> Result<Vec<f64>> {
    net.layout.check(data)?;
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let chunks: Vec<Vec<f64>> = rows
        .par_chunks(INFER_CHUNK)
        .map(|chunk| {
            let logits = net.infer(&Batch::gather(data, chunk))?;
            let p = softmax(&logits);
            Ok((0..chunk.len()).map(|r| f64::from(p.get(r, 1))).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

pub fn evaluate(net: &EmbNet<f32>, data: &EncodedMatrix, threshold: f64) -> Result<EvalReport> {
    let scores = predict_proba(net, data)?;
    eval_scores(&scores, &data.target, threshold)
}

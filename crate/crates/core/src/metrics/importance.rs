use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::cv::mean_std;
use crate::metrics::{auroc, predict_proba};
use crate::model::EmbNet;
use crate::nncore::rng::{stream_rng, Stream};
use crate::preprocess::EncodedMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub baseline_auroc: f64,
    /// Mean of `baseline − permuted` AUROC over the repeats.
    pub mean_drop: f64,
    pub std_drop: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub seed: u64,
    /// Sorted by `mean_drop`, largest first; ties keep column order.
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

/// Shuffles one column at a time across rows and records the AUROC lost.
pub fn permutation_importance(
    net: &EmbNet<f32>,
    data: &EncodedMatrix,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::invalid("importance needs at least one repeat"));
    }
    let baseline = auroc(&predict_proba(net, data)?, &data.target)?;
    let (kc, kn) = (data.n_cat(), data.n_cont());
    let names = data.feature_names();
    let mut features = Vec::with_capacity(names.len());
    let mut work = data.clone();
    for (j, name) in names.into_iter().enumerate() {
        let mut drops = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let mut perm: Vec<usize> = (0..data.n_rows()).collect();
            perm.shuffle(&mut stream_rng(seed, Stream::Importance, ((j as u64) << 32) | r as u64));
            for (dst, &src) in perm.iter().enumerate() {
                if j < kc {
                    work.cat[dst * kc + j] = data.cat[src * kc + j];
                } else {
                    let c = j - kc;
                    work.cont[dst * kn + c] = data.cont[src * kn + c];
                }
            }
            drops.push(baseline - auroc(&predict_proba(net, &work)?, &work.target)?);
        }
        for dst in 0..data.n_rows() {
            if j < kc {
                work.cat[dst * kc + j] = data.cat[dst * kc + j];
            } else {
                let c = j - kc;
                work.cont[dst * kn + c] = data.cont[dst * kn + c];
            }
        }
        let (mean_drop, std_drop) = mean_std(&drops);
        features.push(FeatureImportance {
            name,
            baseline_auroc: baseline,
            mean_drop,
            std_drop,
            repeats,
        });
    }
    features.sort_by(|a, b| b.mean_drop.total_cmp(&a.mean_drop));
    Ok(ImportanceReport { seed, features })
}

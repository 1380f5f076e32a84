//! The categorical-embedding classifier: sizing, assembly, training and persistence.

mod io;
mod net;
mod train;

use serde::{Deserialize, Serialize};

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, ModelBundle};
pub use net::{Batch, EmbNet};
pub use train::{train, EpochProgress, TrainReport};

use crate::error::{Error, Result};
use crate::preprocess::{CatSpec, ContSpec, EncodedMatrix};

/// Embedding width for a column with `n` categories: `1.6·n^0.56`, rounded
/// half away from zero, at least 1.
pub fn embedding_dim(n: usize) -> usize {
    let x = 1.6 * (n as f64).powf(0.56);
    (x.round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden_sizes: Vec<usize>,
    pub emb_dropout: f64,
    pub hidden_dropout: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![512, 512],
            emb_dropout: 0.05,
            hidden_dropout: 0.15,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            epochs: 70,
            batch_size: 256,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden_sizes must be non-empty and positive"));
        }
        for (name, p) in [
            ("emb_dropout", self.emb_dropout),
            ("hidden_dropout", self.hidden_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1)")));
            }
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!(
                "learning rate {} must be finite and >= 0",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Column layout a network was built for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub cat: Vec<CatSpec>,
    pub cont: Vec<ContSpec>,
}

impl ModelLayout {
    pub fn of(matrix: &EncodedMatrix) -> Self {
        Self {
            cat: matrix.cat_specs.clone(),
            cont: matrix.cont_specs.clone(),
        }
    }

    pub fn embedding_dims(&self) -> Vec<usize> {
        self.cat.iter().map(|c| embedding_dim(c.cardinality)).collect()
    }

    pub fn input_width(&self) -> usize {
        self.embedding_dims().iter().sum::<usize>() + self.cont.len()
    }

    pub fn check(&self, matrix: &EncodedMatrix) -> Result<()> {
        let other = ModelLayout::of(matrix);
        if *self == other {
            return Ok(());
        }
        let describe = |l: &ModelLayout| {
            let cats: Vec<String> = l.cat.iter().map(|c| format!("{}({})", c.name, c.cardinality)).collect();
            let conts: Vec<&str> = l.cont.iter().map(|c| c.name.as_str()).collect();
            format!("categorical [{}], continuous [{}]", cats.join(", "), conts.join(", "))
        };
        Err(Error::LayoutMismatch(format!(
            "model expects {}; data has {}",
            describe(self),
            describe(&other)
        )))
    }
}

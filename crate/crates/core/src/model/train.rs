use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Batch, EmbNet, ModelConfig};
use crate::nncore::rng::{stream_rng, Stream};
use crate::nncore::{softmax_cross_entropy, Adam, Mode, Real};
use crate::preprocess::EncodedMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochProgress {
    pub epoch: usize,
    pub epochs: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean mini-batch loss per epoch.
    pub losses: Vec<f64>,
    pub steps: u64,
}

/// Mini-batch Adam on softmax cross-entropy. Leaves the model in eval mode.
///
/// A trailing batch of a single row is skipped, since batch normalization
/// needs two rows in train mode.
pub fn train<T: Real>(
    net: &mut EmbNet<T>,
    data: &EncodedMatrix,
    config: &ModelConfig,
    mut progress: impl FnMut(EpochProgress),
) -> Result<TrainReport> {
    config.validate()?;
    net.layout.check(data)?;
    let n = data.n_rows();
    let (neg, pos) = data.class_counts();
    if n < 2 || neg == 0 || pos == 0 {
        return Err(Error::invalid(format!(
            "training needs both classes and at least 2 rows ({neg} negative, {pos} positive)"
        )));
    }
    let mut adam = Adam::<T>::new(config.lr);
    let mut losses = Vec::with_capacity(config.epochs);
    net.set_mode(Mode::Train);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(config.seed, Stream::Shuffle, epoch as u64));
        let mut dropout_rng = stream_rng(config.seed, Stream::Dropout, epoch as u64);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            if rows.len() < 2 {
                continue;
            }
            let batch = Batch::<T>::gather(data, rows);
            net.zero_grad();
            let logits = net.forward(&batch, &mut dropout_rng)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &batch.target)?;
            let loss = loss.to_f64_lossless();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {} batch {b}", epoch + 1)));
            }
            net.backward(&dlogits)?;
            adam.step(&mut net.params_mut()).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("{m} at epoch {} batch {b}", epoch + 1)),
                other => other,
            })?;
            total += loss;
            batches += 1;
        }
        let mean_loss = total / batches.max(1) as f64;
        losses.push(mean_loss);
        progress(EpochProgress {
            epoch: epoch + 1,
            epochs: config.epochs,
            mean_loss,
        });
    }
    net.set_mode(Mode::Eval);
    Ok(TrainReport {
        losses,
        steps: adam.steps(),
    })
}

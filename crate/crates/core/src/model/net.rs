use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelLayout};
use crate::nncore::rng::{stream_rng, Stream};
use crate::nncore::{BatchNorm1d, Dropout, Embedding, Linear, Mode, Param, Real, Relu, Tensor2};
use crate::preprocess::EncodedMatrix;

/// Rows gathered from an encoded matrix, laid out for the network.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    /// One index vector per categorical column.
    pub cat: Vec<Vec<u32>>,
    pub cont: Tensor2<T>,
    pub target: Vec<u8>,
}

impl<T: Real> Batch<T> {
    pub fn gather(matrix: &EncodedMatrix, rows: &[usize]) -> Self {
        let cat = (0..matrix.n_cat())
            .map(|j| rows.iter().map(|&r| matrix.cat_row(r)[j]).collect())
            .collect();
        let cont = Tensor2::from_fn(rows.len(), matrix.n_cont(), |b, j| T::of(matrix.cont_row(rows[b])[j]));
        let target = rows.iter().map(|&r| matrix.target[r]).collect();
        Self { cat, cont, target }
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Block<T> {
    linear: Linear<T>,
    relu: Relu,
    bn: BatchNorm1d<T>,
    dropout: Dropout,
}

/// Embeddings for categoricals and batch-normed continuous columns, concatenated
/// and fed through `[Linear → ReLU → BatchNorm → Dropout]` blocks to a 2-logit head.
#[derive(Debug, Clone)]
pub struct EmbNet<T = f32> {
    pub layout: ModelLayout,
    pub config: ModelConfig,
    embeddings: Vec<Embedding<T>>,
    emb_dropout: Dropout,
    bn_cont: Option<BatchNorm1d<T>>,
    blocks: Vec<Block<T>>,
    head: Linear<T>,
    mode: Mode,
}

fn glorot<T: Real>(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Result<Linear<T>> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-a, a).map_err(|e| Error::invalid(e.to_string()))?;
    let w = Tensor2::from_fn(fan_in, fan_out, |_, _| T::of(dist.sample(rng)));
    Linear::new(w, vec![T::zero(); fan_out])
}

impl<T: Real> EmbNet<T> {
    pub fn new(layout: ModelLayout, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let width = layout.input_width();
        if width == 0 {
            return Err(Error::invalid("model needs at least one input column"));
        }
        let mut rng = stream_rng(config.seed, Stream::Init, 0);
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let embeddings = layout
            .cat
            .iter()
            .zip(layout.embedding_dims())
            .map(|(c, d)| {
                let table = Tensor2::from_fn(c.cardinality, d, |_, _| T::of(normal.sample(&mut rng)));
                Embedding::new(c.name.clone(), table)
            })
            .collect();
        let bn_cont = if layout.cont.is_empty() {
            None
        } else {
            Some(BatchNorm1d::new(layout.cont.len(), config.bn_momentum, config.bn_eps)?)
        };
        let mut blocks = Vec::new();
        let mut fan_in = width;
        for &h in &config.hidden_sizes {
            blocks.push(Block {
                linear: glorot(&mut rng, fan_in, h)?,
                relu: Relu::default(),
                bn: BatchNorm1d::new(h, config.bn_momentum, config.bn_eps)?,
                dropout: Dropout::new(config.hidden_dropout)?,
            });
            fan_in = h;
        }
        let head = glorot(&mut rng, fan_in, 2)?;
        Ok(Self {
            layout,
            config: config.clone(),
            embeddings,
            emb_dropout: Dropout::new(config.emb_dropout)?,
            bn_cont,
            blocks,
            head,
            mode: Mode::Train,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn input_width(&self) -> usize {
        self.blocks[0].linear.in_features()
    }

    fn check_batch(&self, batch: &Batch<T>) -> Result<()> {
        let n = batch.len();
        if batch.cat.len() != self.embeddings.len()
            || batch.cont.cols() != self.layout.cont.len()
            || batch.cat.iter().any(|c| c.len() != n)
            || batch.cont.rows() != n
        {
            return Err(Error::LayoutMismatch(format!(
                "batch has {} categorical and {} continuous columns; model expects {} and {}",
                batch.cat.len(),
                batch.cont.cols(),
                self.embeddings.len(),
                self.layout.cont.len()
            )));
        }
        Ok(())
    }

    /// Eval-mode logits. Does not touch any state.
    pub fn infer(&self, batch: &Batch<T>) -> Result<Tensor2<T>> {
        self.check_batch(batch)?;
        let mut parts = Vec::new();
        for (e, idx) in self.embeddings.iter().zip(&batch.cat) {
            parts.push(e.infer(idx)?);
        }
        if let Some(bn) = &self.bn_cont {
            parts.push(bn.infer(&batch.cont)?);
        }
        let refs: Vec<&Tensor2<T>> = parts.iter().collect();
        let mut x = Tensor2::hconcat(&refs)?;
        for b in &self.blocks {
            x = b.bn.infer(&Relu::infer(&b.linear.infer(&x)?))?;
        }
        self.head.infer(&x)
    }

    /// Forward pass in the current mode, caching what `backward` needs.
    pub fn forward(&mut self, batch: &Batch<T>, rng: &mut impl Rng) -> Result<Tensor2<T>> {
        self.check_batch(batch)?;
        let mode = self.mode;
        let mut embs = Vec::with_capacity(self.embeddings.len());
        for (e, idx) in self.embeddings.iter_mut().zip(&batch.cat) {
            embs.push(e.forward(idx)?);
        }
        let mut parts = Vec::with_capacity(2);
        if !embs.is_empty() {
            let refs: Vec<&Tensor2<T>> = embs.iter().collect();
            parts.push(self.emb_dropout.forward(&Tensor2::hconcat(&refs)?, mode, rng));
        }
        if let Some(bn) = &mut self.bn_cont {
            parts.push(bn.forward(&batch.cont, mode)?);
        }
        let refs: Vec<&Tensor2<T>> = parts.iter().collect();
        let mut x = Tensor2::hconcat(&refs)?;
        for b in &mut self.blocks {
            let h = b.relu.forward(&b.linear.forward(&x)?);
            let h = b.bn.forward(&h, mode)?;
            x = b.dropout.forward(&h, mode, rng);
        }
        self.head.forward(&x)
    }

    /// Accumulates parameter gradients for the last `forward`.
    pub fn backward(&mut self, dlogits: &Tensor2<T>) -> Result<()> {
        let mut dx = self.head.backward(dlogits)?;
        for b in self.blocks.iter_mut().rev() {
            let d = b.dropout.backward(&dx)?;
            let d = b.bn.backward(&d)?;
            let d = b.relu.backward(&d)?;
            dx = b.linear.backward(&d)?;
        }
        let emb_width: usize = self.embeddings.iter().map(|e| e.dim()).sum();
        let cont_width = self.layout.cont.len();
        let mut widths = Vec::new();
        if emb_width > 0 {
            widths.push(emb_width);
        }
        if cont_width > 0 {
            widths.push(cont_width);
        }
        let mut pieces = dx.hsplit(&widths)?.into_iter();
        if emb_width > 0 {
            let d = self.emb_dropout.backward(&pieces.next().expect("embedding slice"))?;
            let dims: Vec<usize> = self.embeddings.iter().map(|e| e.dim()).collect();
            for (e, de) in self.embeddings.iter_mut().zip(d.hsplit(&dims)?) {
                e.backward(&de)?;
            }
        }
        if let Some(bn) = &mut self.bn_cont {
            bn.backward(&pieces.next().expect("continuous slice"))?;
        }
        Ok(())
    }

    /// Trainable parameters in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out: Vec<&mut Param<T>> = Vec::new();
        for e in &mut self.embeddings {
            out.push(&mut e.table);
        }
        if let Some(bn) = &mut self.bn_cont {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        for b in &mut self.blocks {
            out.push(&mut b.linear.weight);
            out.push(&mut b.linear.bias);
            out.push(&mut b.bn.gamma);
            out.push(&mut b.bn.beta);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Embedding rows×dim, linear in×out + out, and gamma/beta of every batch norm.
    pub fn count_parameters(&self) -> usize {
        let emb: usize = self.embeddings.iter().map(|e| e.rows() * e.dim()).sum();
        let lin = |l: &Linear<T>| l.in_features() * l.out_features() + l.out_features();
        let bn = |b: &BatchNorm1d<T>| 2 * b.features();
        emb + self.bn_cont.as_ref().map_or(0, bn)
            + self.blocks.iter().map(|b| lin(&b.linear) + bn(&b.bn)).sum::<usize>()
            + lin(&self.head)
    }

    /// Every stored tensor (parameters and running statistics) with a stable name.
    pub fn state(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        for e in &self.embeddings {
            out.push((format!("embedding.{}", e.name), e.table.value.data()));
        }
        fn push_bn<'a, T: Real>(out: &mut Vec<(String, &'a [T])>, p: &str, bn: &'a BatchNorm1d<T>) {
            out.push((format!("{p}.gamma"), bn.gamma.value.data()));
            out.push((format!("{p}.beta"), bn.beta.value.data()));
            out.push((format!("{p}.running_mean"), &bn.running_mean[..]));
            out.push((format!("{p}.running_var"), &bn.running_var[..]));
        }
        if let Some(bn) = &self.bn_cont {
            push_bn(&mut out, "bn_cont", bn);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.linear.weight"), b.linear.weight.value.data()));
            out.push((format!("block{i}.linear.bias"), b.linear.bias.value.data()));
            push_bn(&mut out, &format!("block{i}.bn"), &b.bn);
        }
        out.push(("head.weight".into(), self.head.weight.value.data()));
        out.push(("head.bias".into(), self.head.bias.value.data()));
        out
    }

    /// Mutable view over the same tensors, in the same order as [`EmbNet::state`].
    pub fn state_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for e in &mut self.embeddings {
            out.push(e.table.value.data_mut());
        }
        fn push_bn<'a, T: Real>(out: &mut Vec<&'a mut [T]>, bn: &'a mut BatchNorm1d<T>) {
            out.push(bn.gamma.value.data_mut());
            out.push(bn.beta.value.data_mut());
            out.push(&mut bn.running_mean[..]);
            out.push(&mut bn.running_var[..]);
        }
        if let Some(bn) = &mut self.bn_cont {
            push_bn(&mut out, bn);
        }
        for b in &mut self.blocks {
            out.push(b.linear.weight.value.data_mut());
            out.push(b.linear.bias.value.data_mut());
            push_bn(&mut out, &mut b.bn);
        }
        out.push(self.head.weight.value.data_mut());
        out.push(self.head.bias.value.data_mut());
        out
    }

    pub fn cast<U: Real>(&self) -> EmbNet<U> {
        EmbNet {
            layout: self.layout.clone(),
            config: self.config.clone(),
            embeddings: self.embeddings.iter().map(|e| e.cast()).collect(),
            emb_dropout: self.emb_dropout.clone(),
            bn_cont: self.bn_cont.as_ref().map(|b| b.cast()),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    linear: b.linear.cast(),
                    relu: Relu::default(),
                    bn: b.bn.cast(),
                    dropout: b.dropout.clone(),
                })
                .collect(),
            head: self.head.cast(),
            mode: self.mode,
        }
    }
}

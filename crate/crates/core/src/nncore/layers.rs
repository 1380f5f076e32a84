use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{Param, Real, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Lookup table mapping category indices to dense rows.
#[derive(Debug, Clone)]
pub struct Embedding<T> {
    pub name: String,
    pub table: Param<T>,
    cache: Vec<u32>,
}

impl<T: Real> Embedding<T> {
    pub fn new(name: impl Into<String>, table: Tensor2<T>) -> Self {
        Self {
            name: name.into(),
            table: Param::new(table),
            cache: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.table.value.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    fn check(&self, indices: &[u32]) -> Result<()> {
        let rows = self.rows();
        match indices.iter().find(|&&i| i as usize >= rows) {
            Some(&index) => Err(Error::IndexOutOfRange {
                table: self.name.clone(),
                index,
                rows,
            }),
            None => Ok(()),
        }
    }

    pub fn infer(&self, indices: &[u32]) -> Result<Tensor2<T>> {
        self.check(indices)?;
        let d = self.dim();
        let mut out = Tensor2::zeros(indices.len(), d);
        for (b, &i) in indices.iter().enumerate() {
            out.row_mut(b).copy_from_slice(self.table.value.row(i as usize));
        }
        Ok(out)
    }

    pub fn forward(&mut self, indices: &[u32]) -> Result<Tensor2<T>> {
        let out = self.infer(indices)?;
        self.cache = indices.to_vec();
        Ok(out)
    }

    /// Scatters `dy` back into the rows that were looked up; repeated indices accumulate.
    pub fn backward(&mut self, dy: &Tensor2<T>) -> Result<()> {
        if dy.rows() != self.cache.len() || dy.cols() != self.dim() {
            return Err(Error::Shape {
                op: "embedding backward",
                left: (self.cache.len(), self.dim()),
                right: dy.shape(),
            });
        }
        for (b, &i) in self.cache.iter().enumerate() {
            let g = self.table.grad.row_mut(i as usize);
            for (acc, &v) in g.iter_mut().zip(dy.row(b)) {
                *acc = *acc + v;
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Embedding<U> {
        Embedding {
            name: self.name.clone(),
            table: self.table.cast(),
            cache: Vec::new(),
        }
    }
}

/// `y = x·W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    cache: Option<Tensor2<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new(weight: Tensor2<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::Shape {
                op: "linear bias",
                left: weight.shape(),
                right: (1, bias.len()),
            });
        }
        let out = weight.cols();
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(Tensor2::from_vec(1, out, bias)?),
            cache: None,
        })
    }

    pub fn in_features(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_features(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn infer(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        if x.cols() != self.in_features() {
            return Err(Error::Shape {
                op: "linear",
                left: x.shape(),
                right: self.weight.value.shape(),
            });
        }
        let mut y = x.matmul(&self.weight.value)?;
        let b = self.bias.value.row(0);
        for r in 0..y.rows() {
            for (v, &bb) in y.row_mut(r).iter_mut().zip(b) {
                *v = *v + bb;
            }
        }
        Ok(y)
    }

    pub fn forward(&mut self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Accumulates `dW = xᵀ·dy`, `db = Σ_rows dy` and returns `dx = dy·Wᵀ`.
    pub fn backward(&mut self, dy: &Tensor2<T>) -> Result<Tensor2<T>> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::invalid("linear backward before forward"))?;
        if dy.rows() != x.rows() || dy.cols() != self.out_features() {
            return Err(Error::Shape {
                op: "linear backward",
                left: (x.rows(), self.out_features()),
                right: dy.shape(),
            });
        }
        let dw = x.matmul_tn(dy)?;
        for (g, &d) in self.weight.grad.data_mut().iter_mut().zip(dw.data()) {
            *g = *g + d;
        }
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(dy.column_sums()) {
            *g = *g + d;
        }
        dy.matmul_nt(&self.weight.value)
    }

    pub fn cast<U: Real>(&self) -> Linear<U> {
        Linear {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            cache: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn infer<T: Real>(x: &Tensor2<T>) -> Tensor2<T> {
        x.map(|v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor2<T>) -> Tensor2<T> {
        self.mask = x.data().iter().map(|&v| v > T::zero()).collect();
        Self::infer(x)
    }

    /// Passes gradient where the input was strictly positive; zero at the kink.
    pub fn backward<T: Real>(&self, dy: &Tensor2<T>) -> Result<Tensor2<T>> {
        if dy.data().len() != self.mask.len() {
            return Err(Error::Shape {
                op: "relu backward",
                left: (self.mask.len(), 1),
                right: dy.shape(),
            });
        }
        let data = dy
            .data()
            .iter()
            .zip(&self.mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Tensor2::from_vec(dy.rows(), dy.cols(), data)
    }
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Tensor2<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

/// Per-feature batch normalization over the rows of a batch.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache<T>>,
}

impl<T: Real> BatchNorm1d<T> {
    pub fn new(features: usize, momentum: f64, eps: f64) -> Result<Self> {
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::invalid(format!("batch-norm momentum {momentum} outside (0, 1)")));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("batch-norm eps {eps} must be positive")));
        }
        Ok(Self {
            gamma: Param::new(Tensor2::from_vec(1, features, vec![T::one(); features])?),
            beta: Param::new(Tensor2::zeros(1, features)),
            running_mean: vec![T::zero(); features],
            running_var: vec![T::one(); features],
            momentum,
            eps,
            cache: None,
        })
    }

    pub fn features(&self) -> usize {
        self.running_mean.len()
    }

    fn check_width(&self, x: &Tensor2<T>) -> Result<()> {
        if x.cols() != self.features() {
            return Err(Error::Shape {
                op: "batchnorm",
                left: x.shape(),
                right: (1, self.features()),
            });
        }
        Ok(())
    }

    fn normalize(&self, x: &Tensor2<T>, mean: &[T], inv_std: &[T]) -> (Tensor2<T>, Tensor2<T>) {
        let g = self.gamma.value.row(0);
        let b = self.beta.value.row(0);
        let xhat = Tensor2::from_fn(x.rows(), x.cols(), |r, c| (x.get(r, c) - mean[c]) * inv_std[c]);
        let y = Tensor2::from_fn(x.rows(), x.cols(), |r, c| g[c] * xhat.get(r, c) + b[c]);
        (xhat, y)
    }

    fn running_inv_std(&self) -> Vec<T> {
        let eps = T::of(self.eps);
        self.running_var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect()
    }

    pub fn infer(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        self.check_width(x)?;
        let inv = self.running_inv_std();
        Ok(self.normalize(x, &self.running_mean, &inv).1)
    }

    /// Train mode normalizes with the batch's population mean and variance and
    /// folds them into the running statistics; eval mode uses the running statistics.
    pub fn forward(&mut self, x: &Tensor2<T>, mode: Mode) -> Result<Tensor2<T>> {
        self.check_width(x)?;
        let (mean, inv_std) = match mode {
            Mode::Eval => (self.running_mean.clone(), self.running_inv_std()),
            Mode::Train => {
                let n = x.rows();
                if n < 2 {
                    return Err(Error::invalid(format!(
                        "batch normalization in train mode needs at least 2 rows, got {n}"
                    )));
                }
                let nt = T::of(n as f64);
                let mean: Vec<T> = x.column_sums().into_iter().map(|s| s / nt).collect();
                let mut var = vec![T::zero(); x.cols()];
                for r in 0..n {
                    for (c, v) in var.iter_mut().enumerate() {
                        let d = x.get(r, c) - mean[c];
                        *v = *v + d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v = *v / nt);
                let m = T::of(self.momentum);
                for c in 0..x.cols() {
                    self.running_mean[c] = (T::one() - m) * self.running_mean[c] + m * mean[c];
                    self.running_var[c] = (T::one() - m) * self.running_var[c] + m * var[c];
                }
                let eps = T::of(self.eps);
                let inv = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
                (mean, inv)
            }
        };
        let (xhat, y) = self.normalize(x, &mean, &inv_std);
        self.cache = Some(BnCache { xhat, inv_std, mode });
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor2<T>) -> Result<Tensor2<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::invalid("batch-norm backward before forward"))?;
        let (n, f) = cache.xhat.shape();
        if dy.shape() != (n, f) {
            return Err(Error::Shape {
                op: "batchnorm backward",
                left: (n, f),
                right: dy.shape(),
            });
        }
        let gamma = self.gamma.value.row(0).to_vec();
        let mut sum_dy = vec![T::zero(); f];
        let mut sum_dy_xhat = vec![T::zero(); f];
        for r in 0..n {
            for c in 0..f {
                let g = dy.get(r, c);
                sum_dy[c] = sum_dy[c] + g;
                sum_dy_xhat[c] = sum_dy_xhat[c] + g * cache.xhat.get(r, c);
            }
        }
        for c in 0..f {
            let gg = self.gamma.grad.row_mut(0);
            gg[c] = gg[c] + sum_dy_xhat[c];
            let bg = self.beta.grad.row_mut(0);
            bg[c] = bg[c] + sum_dy[c];
        }
        let dx = match cache.mode {
            Mode::Eval => Tensor2::from_fn(n, f, |r, c| dy.get(r, c) * gamma[c] * cache.inv_std[c]),
            Mode::Train => {
                // dx = γ·inv_std/N · (N·dy − Σdy − x̂·Σ(dy·x̂))
                let nt = T::of(n as f64);
                Tensor2::from_fn(n, f, |r, c| {
                    let scale = gamma[c] * cache.inv_std[c] / nt;
                    scale * (nt * dy.get(r, c) - sum_dy[c] - cache.xhat.get(r, c) * sum_dy_xhat[c])
                })
            }
        };
        Ok(dx)
    }

    pub fn cast<U: Real>(&self) -> BatchNorm1d<U> {
        BatchNorm1d {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self.running_mean.iter().map(|&v| U::of(v.to_f64_lossless())).collect(),
            running_var: self.running_var.iter().map(|&v| U::of(v.to_f64_lossless())).collect(),
            momentum: self.momentum,
            eps: self.eps,
            cache: None,
        }
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 − p)` so eval mode is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub p: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout probability {p} outside [0, 1)")));
        }
        Ok(Self { p, mask: None })
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor2<T>, mode: Mode, rng: &mut impl Rng) -> Tensor2<T> {
        if mode == Mode::Eval || self.p == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 / (1.0 - self.p);
        let mask: Vec<f64> = (0..x.data().len())
            .map(|_| if rng.random::<f64>() < self.p { 0.0 } else { keep })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * T::of(m)).collect();
        self.mask = Some(mask);
        Tensor2::from_vec(x.rows(), x.cols(), data).expect("same shape")
    }

    pub fn backward<T: Real>(&self, dy: &Tensor2<T>) -> Result<Tensor2<T>> {
        match &self.mask {
            None => Ok(dy.clone()),
            Some(mask) => {
                if mask.len() != dy.data().len() {
                    return Err(Error::Shape {
                        op: "dropout backward",
                        left: (mask.len(), 1),
                        right: dy.shape(),
                    });
                }
                let data = dy.data().iter().zip(mask).map(|(&g, &m)| g * T::of(m)).collect();
                Tensor2::from_vec(dy.rows(), dy.cols(), data)
            }
        }
    }
}

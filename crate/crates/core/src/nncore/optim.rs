use crate::error::{Error, Result};
use crate::nncore::{Param, Real};

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> AdamMoments<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

/// One bias-corrected Adam update of `params` in place; `t` is 1-based.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    moments: &mut AdamMoments<T>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::invalid("adam step count starts at 1"));
    }
    if params.len() != grads.len() || moments.m.len() != params.len() {
        return Err(Error::Shape {
            op: "adam_step",
            left: (params.len(), 1),
            right: (grads.len(), 1),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient element {i} at step {t}")));
    }
    let (b1, b2) = (T::of(beta1), T::of(beta2));
    let c1 = T::of(1.0 - beta1.powf(t as f64));
    let c2 = T::of(1.0 - beta2.powf(t as f64));
    let (lr, eps) = (T::of(lr), T::of(eps));
    for i in 0..params.len() {
        let g = grads[i];
        moments.m[i] = b1 * moments.m[i] + (T::one() - b1) * g;
        moments.v[i] = b2 * moments.v[i] + (T::one() - b2) * g * g;
        let m_hat = moments.m[i] / c1;
        let v_hat = moments.v[i] / c2;
        params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over an ordered list of parameters; moments are allocated on the first step.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    moments: Vec<AdamMoments<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params.iter().map(|p| AdamMoments::zeros(p.len())).collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::invalid("parameter list changed between Adam steps"));
        }
        self.t += 1;
        for (p, m) in params.iter_mut().zip(self.moments.iter_mut()) {
            let Param { value, grad } = &mut **p;
            adam_step(
                value.data_mut(),
                grad.data(),
                m,
                self.t,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
            )?;
        }
        Ok(())
    }
}

use crate::error::{Error, Result};
use crate::nncore::{Real, Tensor2};

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Real>(logits: &Tensor2<T>) -> Tensor2<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        row.iter_mut().for_each(|v| *v = *v / sum);
    }
    out
}

/// Mean negative log-likelihood of the target class and its gradient
/// `(softmax − onehot) / batch`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor2<T>, targets: &[u8]) -> Result<(T, Tensor2<T>)> {
    let (n, classes) = logits.shape();
    if targets.len() != n || n == 0 {
        return Err(Error::Shape {
            op: "softmax_cross_entropy",
            left: logits.shape(),
            right: (targets.len(), 1),
        });
    }
    if let Some(&t) = targets.iter().find(|&&t| t as usize >= classes) {
        return Err(Error::invalid(format!("target {t} outside {classes} classes")));
    }
    let nt = T::of(n as f64);
    let mut loss = T::zero();
    let mut grad = Tensor2::zeros(n, classes);
    for r in 0..n {
        let row = logits.row(r);
        let top = (0..classes).fold(0, |b, c| if row[c] > row[b] { c } else { b });
        let max = row[top];
        // ln Σ exp(v − max) = ln(1 + rest); ln_1p keeps confident rows accurate
        let rest: T = (0..classes).filter(|&c| c != top).map(|c| (row[c] - max).exp()).sum();
        let log_z = max + rest.ln_1p();
        let t = targets[r] as usize;
        loss = loss + ((max - row[t]) + rest.ln_1p());
        let g = grad.row_mut(r);
        for c in 0..classes {
            let p = (row[c] - log_z).exp();
            let onehot = if c == t { T::one() } else { T::zero() };
            g[c] = (p - onehot) / nt;
        }
    }
    Ok((loss / nt, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln2() {
        let z = Tensor2::<f64>::zeros(3, 2);
        let (loss, g) = softmax_cross_entropy(&z, &[0, 1, 1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g.get(0, 0) + 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let z = Tensor2::from_vec(1, 2, vec![100.0f32, -100.0]).unwrap();
        let (loss, g) = softmax_cross_entropy(&z, &[0]).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-6);
        assert!(g.is_finite());
        let p = softmax(&z);
        assert!((p.get(0, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = Tensor2::from_fn(5, 2, |i, j| (i as f32 - 2.0) * (j as f32 + 0.3) * 7.0);
        let p = softmax(&z);
        for r in 0..5 {
            assert!((p.row(r).iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bad_targets() {
        let z = Tensor2::<f32>::zeros(2, 2);
        assert!(softmax_cross_entropy(&z, &[0]).is_err());
        assert!(softmax_cross_entropy(&z, &[0, 2]).is_err());
    }
}

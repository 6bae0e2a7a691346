use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Clamp used before BCE logs so exact 0/1 probabilities stay finite.
pub const BCE_EPS: f64 = 1e-7;

/// Binary cross-entropy of probability `p` against target `y`:
/// `-(y ln p + (1-y) ln(1-p))`, with `p` clamped to `[1e-7, 1-1e-7]`.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// d bce / d p at clamped `p`.
pub fn bce_dp(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -y / p + (1.0 - y) / (1.0 - p)
}

/// Batch-mean BCE of per-sample probabilities against per-sample targets;
/// returns the loss and the gradient w.r.t. each probability.
pub fn bce_batch<T: Scalar>(probs: &[T], targets: &[f64]) -> (f64, Vec<T>) {
    debug_assert_eq!(probs.len(), targets.len());
    let n = probs.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (p, y) in probs.iter().zip(targets.iter()) {
        loss += bce(p.as_f64(), *y);
        grad.push(T::c(bce_dp(p.as_f64(), *y) / n));
    }
    (loss / n, grad)
}

/// Softmax cross-entropy over logits `[N, K]`; returns batch-mean loss and
/// gradient w.r.t. the logits.
pub fn softmax_ce<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> (f64, Tensor<T>) {
    let n = logits.shape()[0];
    let k = logits.shape()[1];
    debug_assert_eq!(labels.len(), n);
    let mut grad = Tensor::zeros(logits.shape());
    let mut loss = 0.0;
    for i in 0..n {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
        let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let label = labels[i];
        loss += -(exps[label] / sum).ln();
        for j in 0..k {
            let softmax = exps[j] / sum;
            let delta = if j == label { 1.0 } else { 0.0 };
            grad.data_mut()[i * k + j] = T::c((softmax - delta) / n as f64);
        }
    }
    (loss / n as f64, grad)
}

/// Batch-mean squared error and gradient w.r.t. predictions.
pub fn mse<T: Scalar>(pred: &[T], target: &[f64]) -> (f64, Vec<T>) {
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, y) in pred.iter().zip(target.iter()) {
        let d = p.as_f64() - y;
        loss += d * d;
        grad.push(T::c(2.0 * d / n));
    }
    (loss / n, grad)
}

/// Mean absolute difference over all elements, plus gradient w.r.t. `a`.
pub fn l1_mean<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> (f64, Tensor<T>) {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.numel().max(1) as f64;
    let mut grad = Tensor::zeros(a.shape());
    let mut loss = 0.0;
    for i in 0..a.numel() {
        let d = a.data()[i].as_f64() - b.data()[i].as_f64();
        loss += d.abs();
        grad.data_mut()[i] = T::c(d.signum() / n);
    }
    (loss / n, grad)
}

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `W x + b` with shape checking.
pub fn affine(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<Tensor> {
    if w.shape().len() != 2 || x.shape().len() != 1 || w.cols() != x.len() {
        return Err(Error::Shape {
            op: "affine",
            left: w.shape().to_vec(),
            right: x.shape().to_vec(),
        });
    }
    if b.shape().len() != 1 || b.len() != w.rows() {
        return Err(Error::Shape {
            op: "affine",
            left: w.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(Tensor::vector(w.matvec_bias(x.data(), b.data())))
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Multiplies `grad` by the ReLU derivative evaluated at pre-activation `pre`.
pub fn relu_backward(pre: &[f64], grad: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(grad)
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax over entries that each appear `counts[k]` times; returns the total
/// mass of every distinct entry, `counts[k]·exp(v_k) / Σ counts·exp(v)`.
pub fn softmax_with_counts(v: &[f64], counts: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = v.iter().zip(counts).map(|(&x, &c)| c * (x - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    v.iter().map(|&x| x - lse).collect()
}

/// Backward of `p = softmax(v)` (also valid for the count-weighted variant,
/// whose Jacobian has the same form in terms of the output masses).
pub fn softmax_backward(p: &[f64], grad_p: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(grad_p).map(|(a, b)| a * b).sum();
    p.iter().zip(grad_p).map(|(&pi, &gi)| pi * (gi - inner)).collect()
}

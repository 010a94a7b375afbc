use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Probabilities are clamped to this floor inside the log so that a
/// confidently wrong prediction yields a large finite loss, never inf.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Categorical cross-entropy over a probability vector. Pairs with a
    /// softmax output layer; the gradient at the softmax input is p - y.
    CrossEntropy,
    /// Mean absolute error. Pairs with a linear output layer; the
    /// subgradient at equality is 0.
    MeanAbsErr,
}

pub fn cross_entropy<S: Scalar>(probs: &[S], target: &[S]) -> S {
    let floor = S::from_f64_c(PROB_FLOOR);
    let mut loss = S::zero();
    for (p, y) in probs.iter().zip(target) {
        if *y != S::zero() {
            loss = loss - *y * p.max(floor).ln();
        }
    }
    loss
}

/// Gradient of cross-entropy at the softmax *input* (logits): p - y.
pub fn cross_entropy_grad_z<S: Scalar>(probs: &[S], target: &[S], out: &mut [S]) {
    for ((o, p), y) in out.iter_mut().zip(probs).zip(target) {
        *o = *p - *y;
    }
}

pub fn mean_abs<S: Scalar>(pred: &[S], target: &[S]) -> S {
    let n = S::from_f64_c(pred.len() as f64);
    let mut loss = S::zero();
    for (p, y) in pred.iter().zip(target) {
        loss = loss + (*p - *y).abs();
    }
    loss / n
}

/// Subgradient of MAE at the prediction: sign(p - y) / n, with 0 at
/// equality.
pub fn mean_abs_grad<S: Scalar>(pred: &[S], target: &[S], out: &mut [S]) {
    let inv_n = S::one() / S::from_f64_c(pred.len() as f64);
    for ((o, p), y) in out.iter_mut().zip(pred).zip(target) {
        *o = if *p > *y {
            inv_n
        } else if *p < *y {
            -inv_n
        } else {
            S::zero()
        };
    }
}

//! Classification head arithmetic: softmax, cross-entropy, accuracy.

use crate::scalar::{cast, Scalar};

use super::GnnError;

/// Probabilities are clamped below at this floor inside the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Max-shifted softmax of one logits row.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean negative log-likelihood of the target class over the batch;
/// `pred` holds probability rows of width `num_classes`.
pub fn cross_entropy<S: Scalar>(
    pred: &[S],
    num_classes: usize,
    targets: &[u8],
) -> Result<S, GnnError> {
    if targets.is_empty() {
        return Err(GnnError::EmptyBatch);
    }
    debug_assert_eq!(pred.len(), targets.len() * num_classes);
    let floor = cast::<S>(PROB_FLOOR);
    let mut total = S::zero();
    for (i, &t) in targets.iter().enumerate() {
        if t as usize >= num_classes {
            return Err(GnnError::InvalidClass { class: t });
        }
        // NaN-propagating clamp: max() would swallow a poisoned probability
        let p = pred[i * num_classes + t as usize];
        let p = if p < floor { floor } else { p };
        total += -p.ln();
    }
    Ok(total / cast(targets.len() as f64))
}

/// Index of the row maximum, ties broken toward the smallest index.
pub fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax matches the target class.
pub fn accuracy<S: Scalar>(
    logits: &[S],
    num_classes: usize,
    targets: &[u8],
) -> Result<f64, GnnError> {
    if targets.is_empty() {
        return Err(GnnError::EmptyBatch);
    }
    debug_assert_eq!(logits.len(), targets.len() * num_classes);
    let mut hits = 0usize;
    for (i, &t) in targets.iter().enumerate() {
        if argmax(&logits[i * num_classes..(i + 1) * num_classes]) == t as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / targets.len() as f64)
}

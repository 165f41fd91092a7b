//! Mini-batch Adam training and evaluation.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::graph::SuperpixelGraph;
use crate::scalar::{cast, Scalar};
use crate::spectral::LaplacianMode;

use super::model::{backward, forward, Model, ModelGrads};
use super::ops::{accuracy, argmax, cross_entropy, softmax};
use super::{Batch, GnnError};

/// Graphs per parallel gradient chunk. Fixed so the reduction order (and
/// therefore every last bit of the result) is independent of thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone)]
pub struct TrainConfig<S> {
    pub learning_rate: S,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: S,
    pub beta2: S,
    pub adam_eps: S,
    /// Verify a parameter subset against finite differences on the first
    /// batch before training starts.
    pub grad_check: bool,
    /// Laplacian used by Chebyshev layers.
    pub mode: LaplacianMode,
}

impl<S: Scalar> Default for TrainConfig<S> {
    fn default() -> Self {
        Self {
            learning_rate: cast(1e-3),
            epochs: 30,
            batch_size: 32,
            seed: 0,
            beta1: cast(0.9),
            beta2: cast(0.999),
            adam_eps: cast(1e-8),
            grad_check: false,
            mode: LaplacianMode::Normalized,
        }
    }
}

impl<S: Scalar> TrainConfig<S> {
    fn validate(&self) -> Result<(), GnnError> {
        if !(self.learning_rate >= S::zero()) || !self.learning_rate.is_finite() {
            return Err(GnnError::InvalidConfig("learning rate must be finite and nonnegative"));
        }
        if self.batch_size < 1 {
            return Err(GnnError::InvalidConfig("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochMetrics>,
}

/// Evaluation record for one model on one graph set.
#[derive(Debug, Clone)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub per_class_accuracy: Vec<f64>,
    pub num_samples: usize,
    pub wall_time_secs: f64,
}

struct Adam<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
    lr: S,
    beta1: S,
    beta2: S,
    eps: S,
}

impl<S: Scalar> Adam<S> {
    fn new(n: usize, config: &TrainConfig<S>) -> Self {
        Self {
            m: vec![S::zero(); n],
            v: vec![S::zero(); n],
            t: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
        }
    }

    fn step(&mut self, params: &mut [S], grads: &[S]) {
        self.t += 1;
        let bc1 = S::one() - self.beta1.powi(self.t);
        let bc2 = S::one() - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (S::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (S::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Mean cross-entropy of a batch under the current parameters.
pub fn batch_loss<S: Scalar>(model: &Model<S>, batch: &Batch<S>) -> Result<S, GnnError> {
    let logits = forward(model, batch)?;
    let c = model.num_classes();
    let probs: Vec<S> = logits.chunks(c).flat_map(|row| softmax(row)).collect();
    cross_entropy(&probs, c, &batch.targets()?)
}

/// Central-difference gradient of the batch loss w.r.t. the flat parameters
/// at the given indices. The independent oracle for [`backward`].
pub fn finite_difference_grads<S: Scalar>(
    model: &Model<S>,
    batch: &Batch<S>,
    indices: &[usize],
    step: S,
) -> Result<Vec<S>, GnnError> {
    let mut probe = model.clone();
    let base = model.flat_params();
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let mut plus = base.clone();
        plus[i] += step;
        probe.set_flat_params(&plus);
        let lp = batch_loss(&probe, batch)?;
        let mut minus = base.clone();
        minus[i] -= step;
        probe.set_flat_params(&minus);
        let lm = batch_loss(&probe, batch)?;
        out.push((lp - lm) / (cast::<S>(2.0) * step));
    }
    Ok(out)
}

fn grad_check_first_batch<S: Scalar>(
    model: &Model<S>,
    batch: &Batch<S>,
) -> Result<(), GnnError> {
    let n = model.num_params();
    let probes = 32.min(n);
    let indices: Vec<usize> = (0..probes).map(|i| i * n / probes).collect();
    let fd = finite_difference_grads(model, batch, &indices, cast(1e-4))?;
    let (_, grads, _) = backward(model, batch)?;
    let flat = grads.flat();
    for (j, &i) in indices.iter().enumerate() {
        let (a, b) = (flat[i].to_f64_lossy(), fd[j].to_f64_lossy());
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
        if rel > 1e-3 {
            return Err(GnnError::GradientCheck { param: i, relative_error: rel });
        }
    }
    Ok(())
}

/// Gradient of the batch-mean loss over `graphs`, assembled from fixed-size
/// chunks evaluated in parallel and reduced in chunk order.
fn chunked_backward<S: Scalar>(
    model: &Model<S>,
    graphs: &[&SuperpixelGraph<S>],
    mode: LaplacianMode,
) -> Result<(S, ModelGrads<S>, usize), GnnError> {
    let chunks: Vec<&[&SuperpixelGraph<S>]> = graphs.chunks(GRAD_CHUNK).collect();
    let results: Vec<Result<(S, ModelGrads<S>, usize), GnnError>> = chunks
        .par_iter()
        .map(|chunk| {
            let batch = Batch::from_graphs(chunk, mode)?;
            let (loss, grads, logits) = backward(model, &batch)?;
            let targets = batch.targets()?;
            let hits = logits
                .chunks(model.num_classes())
                .zip(&targets)
                .filter(|(row, &t)| argmax(row) == t as usize)
                .count();
            Ok((loss, grads, hits))
        })
        .collect();

    let total = graphs.len();
    let mut acc_grads: Option<ModelGrads<S>> = None;
    let mut loss_sum = S::zero();
    let mut hit_sum = 0usize;
    for (chunk, res) in chunks.iter().zip(results) {
        let (loss, mut grads, hits) = res?;
        let weight = cast::<S>(chunk.len() as f64 / total as f64);
        grads.scale(weight);
        loss_sum += loss * weight;
        hit_sum += hits;
        match &mut acc_grads {
            None => acc_grads = Some(grads),
            Some(acc) => acc.accumulate(&grads),
        }
    }
    Ok((loss_sum, acc_grads.expect("nonempty batch"), hit_sum))
}

/// Mini-batch Adam training. Deterministic under a fixed seed: the shuffle
/// sequence, chunking and reduction order are all fixed.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    train_set: &[SuperpixelGraph<S>],
    val_set: Option<&[SuperpixelGraph<S>]>,
    config: &TrainConfig<S>,
) -> Result<TrainHistory, GnnError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(GnnError::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.num_params(), config);
    let mut history = TrainHistory::default();
    let mut checked = !config.grad_check;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_weighted = 0.0f64;
        let mut hits = 0usize;
        for batch_idx in order.chunks(config.batch_size) {
            let graphs: Vec<&SuperpixelGraph<S>> =
                batch_idx.iter().map(|&i| &train_set[i]).collect();
            if !checked {
                let batch = Batch::from_graphs(&graphs, config.mode)?;
                grad_check_first_batch(model, &batch)?;
                checked = true;
            }
            let (loss, grads, batch_hits) = chunked_backward(model, &graphs, config.mode)?;
            if !loss.is_finite() {
                return Err(GnnError::Divergence { epoch });
            }
            loss_weighted += loss.to_f64_lossy() * batch_idx.len() as f64;
            hits += batch_hits;
            let mut flat = model.flat_params();
            adam.step(&mut flat, &grads.flat());
            model.set_flat_params(&flat);
        }

        let train_loss = loss_weighted / train_set.len() as f64;
        let train_accuracy = hits as f64 / train_set.len() as f64;
        let (val_loss, val_accuracy) = match val_set {
            Some(val) if !val.is_empty() => {
                let metrics = evaluate(model, val, config.mode)?;
                (Some(metrics.mean_loss), Some(metrics.accuracy))
            }
            _ => (None, None),
        };
        history.epochs.push(EpochMetrics {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
    }
    Ok(history)
}

const EVAL_BATCH: usize = 64;

/// Test accuracy, mean loss, per-class accuracy and wall-clock time.
pub fn evaluate<S: Scalar>(
    model: &Model<S>,
    graphs: &[SuperpixelGraph<S>],
    mode: LaplacianMode,
) -> Result<EvalMetrics, GnnError> {
    if graphs.is_empty() {
        return Err(GnnError::EmptyBatch);
    }
    let start = Instant::now();
    let c = model.num_classes();
    let mut loss_weighted = 0.0f64;
    let mut hits = 0usize;
    let mut class_total = vec![0usize; c];
    let mut class_hits = vec![0usize; c];
    let refs: Vec<&SuperpixelGraph<S>> = graphs.iter().collect();
    for chunk in refs.chunks(EVAL_BATCH) {
        let batch = Batch::from_graphs(chunk, mode)?;
        let targets = batch.targets()?;
        let logits = forward(model, &batch)?;
        let probs: Vec<S> = logits.chunks(c).flat_map(|row| softmax(row)).collect();
        let loss = cross_entropy(&probs, c, &targets)?;
        loss_weighted += loss.to_f64_lossy() * chunk.len() as f64;
        hits += (accuracy(&logits, c, &targets)? * chunk.len() as f64).round() as usize;
        for (row, &t) in logits.chunks(c).zip(&targets) {
            class_total[t as usize] += 1;
            if argmax(row) == t as usize {
                class_hits[t as usize] += 1;
            }
        }
    }
    let per_class_accuracy = class_hits
        .iter()
        .zip(&class_total)
        .map(|(&h, &n)| if n == 0 { f64::NAN } else { h as f64 / n as f64 })
        .collect();
    Ok(EvalMetrics {
        accuracy: hits as f64 / graphs.len() as f64,
        mean_loss: loss_weighted / graphs.len() as f64,
        per_class_accuracy,
        num_samples: graphs.len(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

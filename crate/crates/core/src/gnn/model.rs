//! The layered model: graph convolutions, sum readout, MLP head, manual
//! reverse-mode gradients, and the text checkpoint format.

use std::io::{BufRead, Write};

use rand::distributions::Uniform;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::scalar::{cast, Scalar};

use super::layers::{ChebLayer, LayerParams, LayerTrace, SpatialLayer};
use super::linalg::{column_sums, matmul, matmul_a_bt, matmul_at_b, relu, relu_backward};
use super::{Batch, GnnError};

pub const NUM_CLASSES: usize = 10;

/// Which graph-convolution kind a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Chebyshev polynomial filters of the given order K.
    Cheb { order: usize },
    /// Neighbor-mean message passing.
    Spatial,
}

/// Architecture description; `Model::init` turns it into parameters.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub kind: LayerKind,
    pub input_dim: usize,
    /// Hidden width per graph-conv layer.
    pub hidden_dims: Vec<usize>,
    /// Hidden width of the readout MLP.
    pub mlp_hidden: usize,
    pub num_classes: usize,
}

impl ModelConfig {
    /// Two conv layers (32, 64) into a 64-wide MLP over 10 classes.
    pub fn default_for(kind: LayerKind, input_dim: usize) -> Self {
        Self { kind, input_dim, hidden_dims: vec![32, 64], mlp_hidden: 64, num_classes: NUM_CLASSES }
    }
}

/// Sum-readout followed by a one-hidden-layer MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout<S> {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub w_hidden: Vec<S>,
    pub b_hidden: Vec<S>,
    pub w_out: Vec<S>,
    pub b_out: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub layers: Vec<LayerParams<S>>,
    pub readout: Readout<S>,
}

/// Gradients in the same shapes as the model parameters.
#[derive(Debug, Clone)]
pub struct ModelGrads<S> {
    pub layers: Vec<LayerParams<S>>,
    pub readout: Readout<S>,
}

fn glorot<S: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<S> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    (0..len).map(|_| cast(rng.sample(dist))).collect()
}

impl<S: Scalar> Model<S> {
    /// Glorot-uniform initialization, deterministic under `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut in_dim = config.input_dim;
        for &out_dim in &config.hidden_dims {
            let layer = match config.kind {
                LayerKind::Cheb { order } => LayerParams::Cheb(ChebLayer {
                    order,
                    in_dim,
                    out_dim,
                    theta: glorot(&mut rng, in_dim * order, out_dim, order * in_dim * out_dim),
                    bias: vec![S::zero(); out_dim],
                }),
                LayerKind::Spatial => LayerParams::Spatial(SpatialLayer {
                    in_dim,
                    out_dim,
                    w_self: glorot(&mut rng, in_dim, out_dim, in_dim * out_dim),
                    w_neigh: glorot(&mut rng, in_dim, out_dim, in_dim * out_dim),
                    bias: vec![S::zero(); out_dim],
                }),
            };
            layers.push(layer);
            in_dim = out_dim;
        }
        let readout = Readout {
            in_dim,
            hidden_dim: config.mlp_hidden,
            num_classes: config.num_classes,
            w_hidden: glorot(&mut rng, in_dim, config.mlp_hidden, in_dim * config.mlp_hidden),
            b_hidden: vec![S::zero(); config.mlp_hidden],
            w_out: glorot(
                &mut rng,
                config.mlp_hidden,
                config.num_classes,
                config.mlp_hidden * config.num_classes,
            ),
            b_out: vec![S::zero(); config.num_classes],
        };
        Model { layers, readout }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim()).unwrap_or(self.readout.in_dim)
    }

    pub fn num_classes(&self) -> usize {
        self.readout.num_classes
    }

    pub fn zeros_like(&self) -> ModelGrads<S> {
        ModelGrads {
            layers: self.layers.iter().map(|l| l.zeros_like()).collect(),
            readout: Readout {
                in_dim: self.readout.in_dim,
                hidden_dim: self.readout.hidden_dim,
                num_classes: self.readout.num_classes,
                w_hidden: vec![S::zero(); self.readout.w_hidden.len()],
                b_hidden: vec![S::zero(); self.readout.b_hidden.len()],
                w_out: vec![S::zero(); self.readout.w_out.len()],
                b_out: vec![S::zero(); self.readout.b_out.len()],
            },
        }
    }

    fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerParams::Cheb(l) => {
                    out.push(&l.theta);
                    out.push(&l.bias);
                }
                LayerParams::Spatial(l) => {
                    out.push(&l.w_self);
                    out.push(&l.w_neigh);
                    out.push(&l.bias);
                }
            }
        }
        out.push(&self.readout.w_hidden);
        out.push(&self.readout.b_hidden);
        out.push(&self.readout.w_out);
        out.push(&self.readout.b_out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut out: Vec<&mut Vec<S>> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                LayerParams::Cheb(l) => {
                    out.push(&mut l.theta);
                    out.push(&mut l.bias);
                }
                LayerParams::Spatial(l) => {
                    out.push(&mut l.w_self);
                    out.push(&mut l.w_neigh);
                    out.push(&mut l.bias);
                }
            }
        }
        out.push(&mut self.readout.w_hidden);
        out.push(&mut self.readout.b_hidden);
        out.push(&mut self.readout.w_out);
        out.push(&mut self.readout.b_out);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// All parameters concatenated in canonical order.
    pub fn flat_params(&self) -> Vec<S> {
        self.tensors().into_iter().flatten().copied().collect()
    }

    pub fn set_flat_params(&mut self, flat: &[S]) {
        let mut off = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        assert_eq!(off, flat.len(), "flat parameter length mismatch");
    }
}

impl<S: Scalar> ModelGrads<S> {
    pub fn flat(&self) -> Vec<S> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerParams::Cheb(l) => {
                    out.extend_from_slice(&l.theta);
                    out.extend_from_slice(&l.bias);
                }
                LayerParams::Spatial(l) => {
                    out.extend_from_slice(&l.w_self);
                    out.extend_from_slice(&l.w_neigh);
                    out.extend_from_slice(&l.bias);
                }
            }
        }
        out.extend_from_slice(&self.readout.w_hidden);
        out.extend_from_slice(&self.readout.b_hidden);
        out.extend_from_slice(&self.readout.w_out);
        out.extend_from_slice(&self.readout.b_out);
        out
    }

    /// self += other, tensor by tensor.
    pub fn accumulate(&mut self, other: &ModelGrads<S>) {
        fn add<S: Scalar>(a: &mut [S], b: &[S]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            match (l, o) {
                (LayerParams::Cheb(a), LayerParams::Cheb(b)) => {
                    add(&mut a.theta, &b.theta);
                    add(&mut a.bias, &b.bias);
                }
                (LayerParams::Spatial(a), LayerParams::Spatial(b)) => {
                    add(&mut a.w_self, &b.w_self);
                    add(&mut a.w_neigh, &b.w_neigh);
                    add(&mut a.bias, &b.bias);
                }
                _ => panic!("layer kind mismatch in gradient accumulation"),
            }
        }
        add(&mut self.readout.w_hidden, &other.readout.w_hidden);
        add(&mut self.readout.b_hidden, &other.readout.b_hidden);
        add(&mut self.readout.w_out, &other.readout.w_out);
        add(&mut self.readout.b_out, &other.readout.b_out);
    }

    pub fn scale(&mut self, factor: S) {
        for layer in &mut self.layers {
            match layer {
                LayerParams::Cheb(l) => {
                    l.theta.iter_mut().for_each(|v| *v *= factor);
                    l.bias.iter_mut().for_each(|v| *v *= factor);
                }
                LayerParams::Spatial(l) => {
                    l.w_self.iter_mut().for_each(|v| *v *= factor);
                    l.w_neigh.iter_mut().for_each(|v| *v *= factor);
                    l.bias.iter_mut().for_each(|v| *v *= factor);
                }
            }
        }
        self.readout.w_hidden.iter_mut().for_each(|v| *v *= factor);
        self.readout.b_hidden.iter_mut().for_each(|v| *v *= factor);
        self.readout.w_out.iter_mut().for_each(|v| *v *= factor);
        self.readout.b_out.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Everything the backward pass needs from a forward pass.
pub(crate) struct ForwardTrace<S> {
    pub layer_traces: Vec<LayerTrace<S>>,
    pub readout_sum: Vec<S>,
    pub readout_pre: Vec<S>,
    pub readout_hidden: Vec<S>,
    pub logits: Vec<S>,
}

pub(crate) fn forward_trace<S: Scalar>(
    model: &Model<S>,
    batch: &Batch<S>,
) -> Result<ForwardTrace<S>, GnnError> {
    if batch.feature_dim() != model.input_dim() {
        return Err(GnnError::ShapeMismatch {
            what: "input feature dimension",
            expected: model.input_dim(),
            got: batch.feature_dim(),
        });
    }
    let lambda_max = batch.laplacian().lambda_max_for_scaling()?;
    let mut layer_traces = Vec::with_capacity(model.layers.len());
    let mut layer_outputs: Vec<Vec<S>> = Vec::with_capacity(model.layers.len());
    let mut x: &[S] = batch.features();
    for layer in &model.layers {
        let (out, trace) = match layer {
            LayerParams::Cheb(l) => l.forward(x, batch, lambda_max),
            LayerParams::Spatial(l) => l.forward(x, batch),
        };
        layer_traces.push(trace);
        layer_outputs.push(out);
        x = layer_outputs.last().unwrap();
    }
    let hidden_dim = model.readout.in_dim;
    let readout_sum = batch.segment_sum(x, hidden_dim);
    let g = batch.num_graphs();
    let mut readout_pre = matmul(&readout_sum, g, hidden_dim, &model.readout.w_hidden, model.readout.hidden_dim);
    super::linalg::add_bias_rows(&mut readout_pre, &model.readout.b_hidden);
    let readout_hidden = relu(&readout_pre);
    let mut logits = matmul(
        &readout_hidden,
        g,
        model.readout.hidden_dim,
        &model.readout.w_out,
        model.readout.num_classes,
    );
    super::linalg::add_bias_rows(&mut logits, &model.readout.b_out);
    Ok(ForwardTrace { layer_traces, readout_sum, readout_pre, readout_hidden, logits })
}

/// Per-graph class logits, one row of `num_classes` per graph.
pub fn forward<S: Scalar>(model: &Model<S>, batch: &Batch<S>) -> Result<Vec<S>, GnnError> {
    Ok(forward_trace(model, batch)?.logits)
}

/// Gradients of the mean cross-entropy over the batch w.r.t. every model
/// parameter. Returns (loss, gradients, logits).
pub fn backward<S: Scalar>(
    model: &Model<S>,
    batch: &Batch<S>,
) -> Result<(S, ModelGrads<S>, Vec<S>), GnnError> {
    let targets = batch.targets()?;
    let trace = forward_trace(model, batch)?;
    let g = batch.num_graphs();
    let c = model.readout.num_classes;

    // softmax + mean cross-entropy and its gradient d logits
    let mut loss = S::zero();
    let mut d_logits = vec![S::zero(); g * c];
    for i in 0..g {
        let row = &trace.logits[i * c..(i + 1) * c];
        let probs = super::ops::softmax(row);
        let target = targets[i] as usize;
        if target >= c {
            return Err(GnnError::InvalidClass { class: targets[i] });
        }
        let floor = cast::<S>(super::ops::PROB_FLOOR);
        let p = probs[target];
        let p = if p < floor { floor } else { p };
        loss += -p.ln();
        let inv_g = cast::<S>(g as f64).recip();
        for j in 0..c {
            let y = if j == target { S::one() } else { S::zero() };
            d_logits[i * c + j] = (probs[j] - y) * inv_g;
        }
    }
    loss /= cast(g as f64);

    let mut grads = model.zeros_like();
    // readout backward
    let d_w_out = matmul_at_b(&trace.readout_hidden, g, model.readout.hidden_dim, &d_logits, c);
    let d_b_out = column_sums(&d_logits, c);
    let d_hidden = matmul_a_bt(&d_logits, g, c, &model.readout.w_out, model.readout.hidden_dim);
    let d_pre = relu_backward(&trace.readout_pre, &d_hidden);
    let d_w_hidden = matmul_at_b(&trace.readout_sum, g, model.readout.in_dim, &d_pre, model.readout.hidden_dim);
    let d_b_hidden = column_sums(&d_pre, model.readout.hidden_dim);
    let d_sum = matmul_a_bt(&d_pre, g, model.readout.hidden_dim, &model.readout.w_hidden, model.readout.in_dim);
    grads.readout.w_out = d_w_out;
    grads.readout.b_out = d_b_out;
    grads.readout.w_hidden = d_w_hidden;
    grads.readout.b_hidden = d_b_hidden;

    // back through the sum readout onto nodes
    let mut d_nodes = batch.segment_broadcast(&d_sum, model.readout.in_dim);

    let lambda_max = batch.laplacian().lambda_max_for_scaling()?;
    for (li, layer) in model.layers.iter().enumerate().rev() {
        let (d_input, grad_layer) = match layer {
            LayerParams::Cheb(l) => {
                let (d_in, gl) = l.backward(&trace.layer_traces[li], &d_nodes, batch, lambda_max);
                (d_in, LayerParams::Cheb(gl))
            }
            LayerParams::Spatial(l) => {
                let (d_in, gl) = l.backward(&trace.layer_traces[li], &d_nodes, batch);
                (d_in, LayerParams::Spatial(gl))
            }
        };
        grads.layers[li] = grad_layer;
        d_nodes = d_input;
    }
    Ok((loss, grads, trace.logits))
}

const CHECKPOINT_MAGIC: &str = "ragnet-model";
const CHECKPOINT_VERSION: u32 = 1;

fn write_values<S: Scalar, W: Write>(out: &mut W, values: &[S]) -> std::io::Result<()> {
    let strings: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    writeln!(out, "{}", strings.join(" "))
}

impl<S: Scalar> Model<S> {
    /// Versioned text checkpoint. Values round-trip exactly: the shortest
    /// decimal representation of a float re-parses to the same bits.
    pub fn save<W: Write>(&self, out: &mut W) -> Result<(), GnnError> {
        writeln!(out, "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}")?;
        writeln!(out, "layers {}", self.layers.len())?;
        for layer in &self.layers {
            match layer {
                LayerParams::Cheb(l) => {
                    writeln!(out, "cheb {} {} {}", l.order, l.in_dim, l.out_dim)?;
                    write_values(out, &l.theta)?;
                    write_values(out, &l.bias)?;
                }
                LayerParams::Spatial(l) => {
                    writeln!(out, "spatial {} {}", l.in_dim, l.out_dim)?;
                    write_values(out, &l.w_self)?;
                    write_values(out, &l.w_neigh)?;
                    write_values(out, &l.bias)?;
                }
            }
        }
        writeln!(
            out,
            "readout {} {} {}",
            self.readout.in_dim, self.readout.hidden_dim, self.readout.num_classes
        )?;
        write_values(out, &self.readout.w_hidden)?;
        write_values(out, &self.readout.b_hidden)?;
        write_values(out, &self.readout.w_out)?;
        write_values(out, &self.readout.b_out)?;
        Ok(())
    }

    pub fn load<R: BufRead>(input: &mut R) -> Result<Self, GnnError> {
        let mut lines = input.lines();
        let mut next_line = || -> Result<String, GnnError> {
            lines
                .next()
                .ok_or_else(|| GnnError::Checkpoint("unexpected end of file".into()))?
                .map_err(GnnError::Io)
        };
        let header = next_line()?;
        let expected = format!("{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}");
        if header.trim() != expected {
            return Err(GnnError::Checkpoint(format!(
                "bad header {header:?}, expected {expected:?}"
            )));
        }
        let layers_line = next_line()?;
        let num_layers: usize = layers_line
            .strip_prefix("layers ")
            .ok_or_else(|| GnnError::Checkpoint("missing layer count".into()))?
            .trim()
            .parse()
            .map_err(|e| GnnError::Checkpoint(format!("layer count: {e}")))?;

        let parse_values = |line: &str, want: usize| -> Result<Vec<S>, GnnError> {
            let vals: Result<Vec<f64>, _> =
                line.split_ascii_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| GnnError::Checkpoint(format!("value: {e}")))?;
            if vals.len() != want {
                return Err(GnnError::Checkpoint(format!(
                    "expected {want} values, found {}",
                    vals.len()
                )));
            }
            Ok(vals.into_iter().map(cast::<S>).collect())
        };

        let mut layers = Vec::with_capacity(num_layers);
        for _ in 0..num_layers {
            let spec = next_line()?;
            let parts: Vec<&str> = spec.split_ascii_whitespace().collect();
            match parts.as_slice() {
                ["cheb", order, in_dim, out_dim] => {
                    let order: usize =
                        order.parse().map_err(|e| GnnError::Checkpoint(format!("order: {e}")))?;
                    let in_dim: usize =
                        in_dim.parse().map_err(|e| GnnError::Checkpoint(format!("dims: {e}")))?;
                    let out_dim: usize =
                        out_dim.parse().map_err(|e| GnnError::Checkpoint(format!("dims: {e}")))?;
                    let theta = parse_values(&next_line()?, order * in_dim * out_dim)?;
                    let bias = parse_values(&next_line()?, out_dim)?;
                    layers.push(LayerParams::Cheb(ChebLayer { order, in_dim, out_dim, theta, bias }));
                }
                ["spatial", in_dim, out_dim] => {
                    let in_dim: usize =
                        in_dim.parse().map_err(|e| GnnError::Checkpoint(format!("dims: {e}")))?;
                    let out_dim: usize =
                        out_dim.parse().map_err(|e| GnnError::Checkpoint(format!("dims: {e}")))?;
                    let w_self = parse_values(&next_line()?, in_dim * out_dim)?;
                    let w_neigh = parse_values(&next_line()?, in_dim * out_dim)?;
                    let bias = parse_values(&next_line()?, out_dim)?;
                    layers.push(LayerParams::Spatial(SpatialLayer {
                        in_dim,
                        out_dim,
                        w_self,
                        w_neigh,
                        bias,
                    }));
                }
                _ => return Err(GnnError::Checkpoint(format!("bad layer spec {spec:?}"))),
            }
        }
        let spec = next_line()?;
        let parts: Vec<&str> = spec.split_ascii_whitespace().collect();
        let ["readout", in_dim, hidden_dim, num_classes] = parts.as_slice() else {
            return Err(GnnError::Checkpoint(format!("bad readout spec {spec:?}")));
        };
        let in_dim: usize =
            in_dim.parse().map_err(|e| GnnError::Checkpoint(format!("dims: {e}")))?;
        let hidden_dim: usize =
            hidden_dim.parse().map_err(|e| GnnError::Checkpoint(format!("dims: {e}")))?;
        let num_classes: usize =
            num_classes.parse().map_err(|e| GnnError::Checkpoint(format!("dims: {e}")))?;
        let w_hidden = parse_values(&next_line()?, in_dim * hidden_dim)?;
        let b_hidden = parse_values(&next_line()?, hidden_dim)?;
        let w_out = parse_values(&next_line()?, hidden_dim * num_classes)?;
        let b_out = parse_values(&next_line()?, num_classes)?;
        Ok(Model {
            layers,
            readout: Readout { in_dim, hidden_dim, num_classes, w_hidden, b_hidden, w_out, b_out },
        })
    }
}

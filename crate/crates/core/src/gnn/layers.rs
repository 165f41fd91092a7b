//! Graph convolution layers and their hand-written reverse-mode gradients.
//!
//! Both layer kinds follow the message-passing template: neighbors send
//! transformed states (MESSAGE), the batch operators reduce them
//! (AGGREGATE: polynomial filtering or neighbor mean), and a linear map plus
//! ReLU produces the next node state (UPDATE).

use crate::scalar::{cast, Scalar};
use crate::spectral::Laplacian;

use super::linalg::{add_bias_rows, column_sums, matmul, matmul_a_bt, matmul_at_b, relu, relu_backward};
use super::Batch;

/// Chebyshev spectral convolution: a K-term polynomial in the scaled
/// Laplacian per input/output channel pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebLayer<S> {
    pub order: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    /// K matrices of in_dim x out_dim, concatenated by k.
    pub theta: Vec<S>,
    pub bias: Vec<S>,
}

/// Spatial message-passing convolution: self transform plus a transformed
/// neighbor mean, h' = relu(W_self h + W_neigh mean_{w in N(v)} h_w + b).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialLayer<S> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w_self: Vec<S>,
    pub w_neigh: Vec<S>,
    pub bias: Vec<S>,
}

/// Parameters of one graph-convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<S> {
    Cheb(ChebLayer<S>),
    Spatial(SpatialLayer<S>),
}

impl<S: Scalar> LayerParams<S> {
    pub fn in_dim(&self) -> usize {
        match self {
            LayerParams::Cheb(l) => l.in_dim,
            LayerParams::Spatial(l) => l.in_dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LayerParams::Cheb(l) => l.out_dim,
            LayerParams::Spatial(l) => l.out_dim,
        }
    }

    pub(crate) fn zeros_like(&self) -> LayerParams<S> {
        match self {
            LayerParams::Cheb(l) => LayerParams::Cheb(ChebLayer {
                order: l.order,
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                theta: vec![S::zero(); l.theta.len()],
                bias: vec![S::zero(); l.bias.len()],
            }),
            LayerParams::Spatial(l) => LayerParams::Spatial(SpatialLayer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                w_self: vec![S::zero(); l.w_self.len()],
                w_neigh: vec![S::zero(); l.w_neigh.len()],
                bias: vec![S::zero(); l.bias.len()],
            }),
        }
    }
}

/// Values cached by a layer's forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LayerTrace<S> {
    /// Pre-activation H (nodes x out_dim).
    pub pre: Vec<S>,
    /// Cheb: the K propagated feature blocks T_k(L_scaled) X.
    pub cheb_tx: Vec<Vec<S>>,
    /// Spatial: the neighbor mean A X.
    pub neigh_x: Vec<S>,
}

/// out = (2 / lambda_max) L X - X, the scaled-operator action on a feature
/// block, computed column-blocked through the CSR matrix.
fn apply_scaled<S: Scalar>(lap: &Laplacian<S>, lambda_max: S, x: &[S], ncols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); x.len()];
    lap.matrix().matmat(x, ncols, &mut out);
    let two_over = cast::<S>(2.0) / lambda_max;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = two_over * *o - v;
    }
    out
}

impl<S: Scalar> ChebLayer<S> {
    fn theta_k(&self, k: usize) -> &[S] {
        let sz = self.in_dim * self.out_dim;
        &self.theta[k * sz..(k + 1) * sz]
    }

    pub(crate) fn forward(
        &self,
        x: &[S],
        batch: &Batch<S>,
        lambda_max: S,
    ) -> (Vec<S>, LayerTrace<S>) {
        let nodes = batch.num_nodes();
        debug_assert_eq!(x.len(), nodes * self.in_dim);
        let mut tx: Vec<Vec<S>> = Vec::with_capacity(self.order);
        tx.push(x.to_vec());
        if self.order > 1 {
            tx.push(apply_scaled(batch.laplacian(), lambda_max, x, self.in_dim));
        }
        for k in 2..self.order {
            let mut next = apply_scaled(batch.laplacian(), lambda_max, &tx[k - 1], self.in_dim);
            for (n, &p) in next.iter_mut().zip(&tx[k - 2]) {
                *n = cast::<S>(2.0) * *n - p;
            }
            tx.push(next);
        }
        let mut pre = vec![S::zero(); nodes * self.out_dim];
        for k in 0..self.order {
            let term = matmul(&tx[k], nodes, self.in_dim, self.theta_k(k), self.out_dim);
            for (p, t) in pre.iter_mut().zip(term) {
                *p += t;
            }
        }
        add_bias_rows(&mut pre, &self.bias);
        let out = relu(&pre);
        (out, LayerTrace { pre, cheb_tx: tx, neigh_x: Vec::new() })
    }

    /// Returns (d_input, gradient layer). `d_out` is the loss gradient at
    /// this layer's output.
    pub(crate) fn backward(
        &self,
        trace: &LayerTrace<S>,
        d_out: &[S],
        batch: &Batch<S>,
        lambda_max: S,
    ) -> (Vec<S>, ChebLayer<S>) {
        let nodes = batch.num_nodes();
        let d_pre = relu_backward(&trace.pre, d_out);
        let d_bias = column_sums(&d_pre, self.out_dim);
        let sz = self.in_dim * self.out_dim;
        let mut d_theta = vec![S::zero(); self.order * sz];
        for k in 0..self.order {
            let g = matmul_at_b(&trace.cheb_tx[k], nodes, self.in_dim, &d_pre, self.out_dim);
            d_theta[k * sz..(k + 1) * sz].copy_from_slice(&g);
        }
        // d_input = sum_k T_k(L_scaled) (d_pre Theta_k^T), by the symmetry of
        // the scaled operator; evaluated with the Clenshaw recurrence.
        let c: Vec<Vec<S>> = (0..self.order)
            .map(|k| matmul_a_bt(&d_pre, nodes, self.out_dim, self.theta_k(k), self.in_dim))
            .collect();
        let d_input = if self.order == 1 {
            c[0].clone()
        } else {
            let mut b_next: Vec<S> = Vec::new(); // b_{k+1}
            let mut b_after: Vec<S> = Vec::new(); // b_{k+2}
            for k in (1..self.order).rev() {
                let mut b_k = c[k].clone();
                if !b_next.is_empty() {
                    let lb = apply_scaled(batch.laplacian(), lambda_max, &b_next, self.in_dim);
                    for i in 0..b_k.len() {
                        b_k[i] += cast::<S>(2.0) * lb[i];
                        if !b_after.is_empty() {
                            b_k[i] -= b_after[i];
                        }
                    }
                }
                b_after = std::mem::take(&mut b_next);
                b_next = b_k;
            }
            let mut result = c[0].clone();
            let lb = apply_scaled(batch.laplacian(), lambda_max, &b_next, self.in_dim);
            for i in 0..result.len() {
                result[i] += lb[i];
                if !b_after.is_empty() {
                    result[i] -= b_after[i];
                }
            }
            result
        };
        let grad = ChebLayer {
            order: self.order,
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            theta: d_theta,
            bias: d_bias,
        };
        (d_input, grad)
    }
}

impl<S: Scalar> SpatialLayer<S> {
    pub(crate) fn forward(&self, x: &[S], batch: &Batch<S>) -> (Vec<S>, LayerTrace<S>) {
        let nodes = batch.num_nodes();
        debug_assert_eq!(x.len(), nodes * self.in_dim);
        let mut neigh_x = vec![S::zero(); x.len()];
        batch.neighbor_mean().matmat(x, self.in_dim, &mut neigh_x);
        let mut pre = matmul(x, nodes, self.in_dim, &self.w_self, self.out_dim);
        let neigh_term = matmul(&neigh_x, nodes, self.in_dim, &self.w_neigh, self.out_dim);
        for (p, t) in pre.iter_mut().zip(neigh_term) {
            *p += t;
        }
        add_bias_rows(&mut pre, &self.bias);
        let out = relu(&pre);
        (out, LayerTrace { pre, cheb_tx: vec![x.to_vec()], neigh_x })
    }

    pub(crate) fn backward(
        &self,
        trace: &LayerTrace<S>,
        d_out: &[S],
        batch: &Batch<S>,
    ) -> (Vec<S>, SpatialLayer<S>) {
        let nodes = batch.num_nodes();
        let x = &trace.cheb_tx[0];
        let d_pre = relu_backward(&trace.pre, d_out);
        let d_bias = column_sums(&d_pre, self.out_dim);
        let d_w_self = matmul_at_b(x, nodes, self.in_dim, &d_pre, self.out_dim);
        let d_w_neigh = matmul_at_b(&trace.neigh_x, nodes, self.in_dim, &d_pre, self.out_dim);
        // d_input = d_pre W_self^T + A^T (d_pre W_neigh^T); A is the row-
        // normalized adjacency, not symmetric, so apply its transpose.
        let mut d_input = matmul_a_bt(&d_pre, nodes, self.out_dim, &self.w_self, self.in_dim);
        let via_neigh = matmul_a_bt(&d_pre, nodes, self.out_dim, &self.w_neigh, self.in_dim);
        let mut back = vec![S::zero(); d_input.len()];
        batch.neighbor_mean().matmat_transpose(&via_neigh, self.in_dim, &mut back);
        for (d, b) in d_input.iter_mut().zip(back) {
            *d += b;
        }
        let grad = SpatialLayer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            w_self: d_w_self,
            w_neigh: d_w_neigh,
            bias: d_bias,
        };
        (d_input, grad)
    }
}

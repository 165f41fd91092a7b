//! Block-diagonal batching: several graphs stacked into one disconnected
//! graph so a single pass processes the whole batch.

use crate::graph::SuperpixelGraph;
use crate::scalar::{cast, Scalar};
use crate::sparse::SparseMatrix;
use crate::spectral::{laplacian, Laplacian, LaplacianMode};

use super::GnnError;

/// A batch of graphs: features stacked, edges offset per graph, a graph id
/// per node, and the two block-diagonal operators the layers need.
#[derive(Debug, Clone)]
pub struct Batch<S> {
    features: Vec<S>,
    feature_dim: usize,
    /// node index ranges per graph; length num_graphs + 1
    node_offsets: Vec<usize>,
    graph_of_node: Vec<u32>,
    labels: Vec<Option<u8>>,
    /// Block-diagonal Laplacian for Chebyshev layers.
    laplacian: Laplacian<S>,
    /// Block-diagonal row-normalized adjacency (neighbor mean) for spatial
    /// layers; zero rows for isolated nodes.
    neighbor_mean: SparseMatrix<S>,
}

impl<S: Scalar> Batch<S> {
    /// Stack `graphs` block-diagonally. For [`LaplacianMode::Normalized`]
    /// the largest eigenvalue is pinned to the spectral bound 2.
    pub fn from_graphs(
        graphs: &[&SuperpixelGraph<S>],
        mode: LaplacianMode,
    ) -> Result<Self, GnnError> {
        if graphs.is_empty() {
            return Err(GnnError::EmptyBatch);
        }
        let feature_dim = graphs[0].feature_dim();
        let total_nodes: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let mut features = Vec::with_capacity(total_nodes * feature_dim);
        let mut node_offsets = Vec::with_capacity(graphs.len() + 1);
        let mut graph_of_node = Vec::with_capacity(total_nodes);
        let mut labels = Vec::with_capacity(graphs.len());
        let mut adj_triplets = Vec::new();
        let mut mean_triplets = Vec::new();
        let mut degrees: Vec<S> = Vec::with_capacity(total_nodes);

        let mut offset = 0usize;
        node_offsets.push(0);
        for (gi, g) in graphs.iter().enumerate() {
            if g.feature_dim() != feature_dim {
                return Err(GnnError::ShapeMismatch {
                    what: "feature dimension across batch",
                    expected: feature_dim,
                    got: g.feature_dim(),
                });
            }
            features.extend_from_slice(g.features());
            graph_of_node.extend(std::iter::repeat(gi as u32).take(g.num_nodes()));
            labels.push(g.label());
            let deg = g.degrees();
            for &(a, b) in g.edges() {
                let (a, b) = (offset + a as usize, offset + b as usize);
                adj_triplets.push((a, b, S::one()));
                adj_triplets.push((b, a, S::one()));
            }
            for &d in &deg {
                degrees.push(cast(d as f64));
            }
            offset += g.num_nodes();
            node_offsets.push(offset);
        }
        let adjacency = SparseMatrix::from_triplets(total_nodes, adj_triplets)
            .expect("offset edges stay in range");
        // neighbor mean rows: A[v, w] / deg(v)
        for (r, c, v) in adjacency.triplets() {
            let d = degrees[r];
            if d > S::zero() {
                mean_triplets.push((r, c, v / d));
            }
        }
        let neighbor_mean = SparseMatrix::from_triplets(total_nodes, mean_triplets)
            .expect("same sparsity as adjacency");
        let degree = SparseMatrix::from_diagonal(&degrees);
        let mut lap = laplacian(&adjacency, &degree, mode)?;
        if mode == LaplacianMode::Normalized {
            lap = lap.with_lambda_max(cast(2.0));
        }
        Ok(Self {
            features,
            feature_dim,
            node_offsets,
            graph_of_node,
            labels,
            laplacian: lap,
            neighbor_mean,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.node_offsets.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.graph_of_node.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self) -> &[S] {
        &self.features
    }

    pub fn graph_of_node(&self) -> &[u32] {
        &self.graph_of_node
    }

    pub fn node_offsets(&self) -> &[usize] {
        &self.node_offsets
    }

    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    /// Class targets; errors if any graph in the batch is unlabeled.
    pub fn targets(&self) -> Result<Vec<u8>, GnnError> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| l.ok_or(GnnError::MissingLabel { index: i }))
            .collect()
    }

    pub fn laplacian(&self) -> &Laplacian<S> {
        &self.laplacian
    }

    pub fn neighbor_mean(&self) -> &SparseMatrix<S> {
        &self.neighbor_mean
    }

    /// Sum node rows into one row per graph (the readout reduction).
    pub fn segment_sum(&self, x: &[S], ncols: usize) -> Vec<S> {
        debug_assert_eq!(x.len(), self.num_nodes() * ncols);
        let mut out = vec![S::zero(); self.num_graphs() * ncols];
        for (v, &g) in self.graph_of_node.iter().enumerate() {
            let src = &x[v * ncols..(v + 1) * ncols];
            let dst = &mut out[g as usize * ncols..(g as usize + 1) * ncols];
            for j in 0..ncols {
                dst[j] += src[j];
            }
        }
        out
    }

    /// Broadcast one row per graph back onto the nodes (readout adjoint).
    pub fn segment_broadcast(&self, per_graph: &[S], ncols: usize) -> Vec<S> {
        debug_assert_eq!(per_graph.len(), self.num_graphs() * ncols);
        let mut out = vec![S::zero(); self.num_nodes() * ncols];
        for (v, &g) in self.graph_of_node.iter().enumerate() {
            out[v * ncols..(v + 1) * ncols]
                .copy_from_slice(&per_graph[g as usize * ncols..(g as usize + 1) * ncols]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_graph(label: u8) -> SuperpixelGraph<f64> {
        SuperpixelGraph::new(
            3,
            vec![(0, 1), (1, 2)],
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            2,
            Some(label),
        )
    }

    #[test]
    fn block_diagonal_layout() {
        let a = small_graph(1);
        let b = small_graph(2);
        let batch = Batch::from_graphs(&[&a, &b], LaplacianMode::Normalized).unwrap();
        assert_eq!(batch.num_graphs(), 2);
        assert_eq!(batch.num_nodes(), 6);
        assert_eq!(batch.graph_of_node(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(batch.node_offsets(), &[0, 3, 6]);
        // no cross-graph coupling
        assert_eq!(batch.laplacian().matrix().get(2, 3), 0.0);
        assert_eq!(batch.neighbor_mean().get(2, 3), 0.0);
        // graph ids are monotone nondecreasing
        assert!(batch.graph_of_node().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(batch.targets().unwrap(), vec![1, 2]);
    }

    #[test]
    fn neighbor_mean_rows_sum_to_one() {
        let a = small_graph(0);
        let batch = Batch::from_graphs(&[&a], LaplacianMode::Normalized).unwrap();
        for (r, s) in batch.neighbor_mean().row_sums().iter().enumerate() {
            assert!((s - 1.0).abs() < 1e-12, "row {r} sums to {s}");
        }
    }

    #[test]
    fn segment_sum_and_broadcast() {
        let a = small_graph(0);
        let b = small_graph(1);
        let batch = Batch::from_graphs(&[&a, &b], LaplacianMode::Normalized).unwrap();
        let x: Vec<f64> = (0..6).map(|v| v as f64).collect();
        let summed = batch.segment_sum(&x, 1);
        assert_eq!(summed, vec![0.0 + 1.0 + 2.0, 3.0 + 4.0 + 5.0]);
        let back = batch.segment_broadcast(&summed, 1);
        assert_eq!(back, vec![3.0, 3.0, 3.0, 12.0, 12.0, 12.0]);
    }

    #[test]
    fn empty_batch_rejected() {
        let graphs: Vec<&SuperpixelGraph<f64>> = vec![];
        assert!(matches!(
            Batch::from_graphs(&graphs, LaplacianMode::Normalized),
            Err(GnnError::EmptyBatch)
        ));
    }

    #[test]
    fn missing_label_detected() {
        let g: SuperpixelGraph<f64> =
            SuperpixelGraph::new(2, vec![(0, 1)], vec![0.0; 4], 2, None);
        let batch = Batch::from_graphs(&[&g], LaplacianMode::Normalized).unwrap();
        assert!(matches!(batch.targets(), Err(GnnError::MissingLabel { index: 0 })));
    }
}

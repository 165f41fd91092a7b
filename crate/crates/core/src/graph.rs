//! Graph construction from label maps and images: region adjacency graphs,
//! KNN graphs over centroids, and pixel-grid graphs, plus node features and
//! the sparse adjacency/degree operators.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::dataset::Image;
use crate::scalar::{cast, Scalar};
use crate::segmentation::LabelMap;
use crate::sparse::SparseMatrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("K = {k} must be smaller than the node count {nodes}")]
    KnnTooLarge { k: usize, nodes: usize },
    #[error("label map {lh}x{lw} does not match image {ih}x{iw}")]
    ShapeMismatch { lh: usize, lw: usize, ih: usize, iw: usize },
    #[error("malformed graph text: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Undirected graph over superpixels (or pixels) with per-node features and
/// an optional graph-level class label.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelGraph<S> {
    num_nodes: usize,
    /// Unordered node pairs stored as (a, b) with a < b, sorted, no dups.
    edges: Vec<(u32, u32)>,
    feature_dim: usize,
    /// Row-major num_nodes x feature_dim.
    features: Vec<S>,
    label: Option<u8>,
}

impl<S: Scalar> SuperpixelGraph<S> {
    pub fn new(
        num_nodes: usize,
        mut edges: Vec<(u32, u32)>,
        features: Vec<S>,
        feature_dim: usize,
        label: Option<u8>,
    ) -> Self {
        for e in edges.iter_mut() {
            assert_ne!(e.0, e.1, "self loop at node {}", e.0);
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            assert!((e.1 as usize) < num_nodes, "edge endpoint out of range");
        }
        edges.sort_unstable();
        edges.dedup();
        assert_eq!(features.len(), num_nodes * feature_dim, "feature matrix shape");
        Self { num_nodes, edges, feature_dim, features, label }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self) -> &[S] {
        &self.features
    }

    pub fn node_feature(&self, v: usize) -> &[S] {
        &self.features[v * self.feature_dim..(v + 1) * self.feature_dim]
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    /// Replace node features (e.g. pair KNN edges with RAG features).
    pub fn with_features(mut self, features: Vec<S>, feature_dim: usize) -> Self {
        assert_eq!(features.len(), self.num_nodes * feature_dim);
        self.features = features;
        self.feature_dim = feature_dim;
        self
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &(a, b) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a as usize == v || b as usize == v)
            .count()
    }

    /// Neighbor lists in ascending order.
    pub fn adjacency_lists(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.num_nodes == 0 {
            return true;
        }
        let adj = self.adjacency_lists();
        let mut seen = vec![false; self.num_nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &u in &adj[v] {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    stack.push(u as usize);
                }
            }
        }
        count == self.num_nodes
    }
}

/// Per-segment aggregates: mean intensity per channel, centroid normalized
/// by image width/height, and relative size (pixel share).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures<S> {
    num_nodes: usize,
    channels: usize,
    /// Row-major num_nodes x (channels + 3): colors, x/W, y/H, size share.
    data: Vec<S>,
}

impl<S: Scalar> NodeFeatures<S> {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn feature_dim(&self) -> usize {
        self.channels + 3
    }

    pub fn row(&self, v: usize) -> &[S] {
        let f = self.feature_dim();
        &self.data[v * f..(v + 1) * f]
    }

    pub fn mean_color(&self, v: usize) -> &[S] {
        &self.row(v)[..self.channels]
    }

    pub fn centroid(&self, v: usize) -> (S, S) {
        let r = self.row(v);
        (r[self.channels], r[self.channels + 1])
    }

    pub fn relative_size(&self, v: usize) -> S {
        self.row(v)[self.channels + 2]
    }

    /// Normalized 2D centroids, the input to [`build_knn_graph`].
    pub fn centroids(&self) -> Vec<(S, S)> {
        (0..self.num_nodes).map(|v| self.centroid(v)).collect()
    }

    pub fn into_matrix(self) -> (Vec<S>, usize) {
        let f = self.feature_dim();
        (self.data, f)
    }
}

fn check_shapes<S: Scalar>(image: &Image<S>, labels: &LabelMap) -> Result<(), GraphError> {
    if image.height() != labels.height() || image.width() != labels.width() {
        return Err(GraphError::ShapeMismatch {
            lh: labels.height(),
            lw: labels.width(),
            ih: image.height(),
            iw: image.width(),
        });
    }
    Ok(())
}

/// Per-segment mean color, centroid and relative size. Pixel (x, y) enters
/// the centroid with its integer index, normalized by W and H.
pub fn node_features<S: Scalar>(
    image: &Image<S>,
    labels: &LabelMap,
) -> Result<NodeFeatures<S>, GraphError> {
    check_shapes(image, labels)?;
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let m = labels.num_segments();
    let fdim = c + 3;
    let mut sums = vec![S::zero(); m * fdim];
    let mut counts = vec![0usize; m];
    for y in 0..h {
        for x in 0..w {
            let v = labels.label_at(x, y) as usize;
            let row = &mut sums[v * fdim..(v + 1) * fdim];
            for (ch, &val) in image.pixel(x, y).iter().enumerate() {
                row[ch] += val;
            }
            row[c] += cast(x as f64);
            row[c + 1] += cast(y as f64);
            counts[v] += 1;
        }
    }
    let total = cast::<S>((h * w) as f64);
    let (sw, sh) = (cast::<S>(w as f64), cast::<S>(h as f64));
    for v in 0..m {
        let inv = cast::<S>(counts[v] as f64).recip();
        let row = &mut sums[v * fdim..(v + 1) * fdim];
        for ch in 0..c {
            row[ch] *= inv;
        }
        row[c] = row[c] * inv / sw;
        row[c + 1] = row[c + 1] * inv / sh;
        row[c + 2] = cast::<S>(counts[v] as f64) / total;
    }
    Ok(NodeFeatures { num_nodes: m, channels: c, data: sums })
}

/// Region adjacency graph: one node per segment, an edge wherever two
/// segments share a 4-adjacent pixel pair.
pub fn build_rag<S: Scalar>(
    image: &Image<S>,
    labels: &LabelMap,
) -> Result<SuperpixelGraph<S>, GraphError> {
    check_shapes(image, labels)?;
    let (h, w) = (labels.height(), labels.width());
    let mut edge_set = BTreeSet::new();
    let mut add = |a: u32, b: u32| {
        if a != b {
            edge_set.insert((a.min(b), a.max(b)));
        }
    };
    for y in 0..h {
        for x in 0..w {
            let l = labels.label_at(x, y);
            if x + 1 < w {
                add(l, labels.label_at(x + 1, y));
            }
            if y + 1 < h {
                add(l, labels.label_at(x, y + 1));
            }
        }
    }
    let feats = node_features(image, labels)?;
    let m = feats.num_nodes();
    let (features, fdim) = feats.into_matrix();
    Ok(SuperpixelGraph::new(m, edge_set.into_iter().collect(), features, fdim, None))
}

/// Undirected KNN edges over 2D centroids: each node picks its K nearest by
/// Euclidean distance (ties to the smaller node id) and an edge is kept when
/// either endpoint chose the other.
pub fn knn_edges<S: Scalar>(
    centroids: &[(S, S)],
    k: usize,
) -> Result<Vec<(u32, u32)>, GraphError> {
    let n = centroids.len();
    if k >= n {
        return Err(GraphError::KnnTooLarge { k, nodes: n });
    }
    let mut edge_set = BTreeSet::new();
    for v in 0..n {
        let (vx, vy) = centroids[v];
        let mut dists: Vec<(S, usize)> = (0..n)
            .filter(|&u| u != v)
            .map(|u| {
                let (ux, uy) = centroids[u];
                let (dx, dy) = (ux - vx, uy - vy);
                (dx * dx + dy * dy, u)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, u) in dists.iter().take(k) {
            edge_set.insert((v.min(u) as u32, v.max(u) as u32));
        }
    }
    Ok(edge_set.into_iter().collect())
}

/// KNN graph over centroids; node features are the centroids themselves.
/// Combine with [`node_features`] via [`SuperpixelGraph::with_features`] for
/// richer features.
pub fn build_knn_graph<S: Scalar>(
    centroids: &[(S, S)],
    k: usize,
) -> Result<SuperpixelGraph<S>, GraphError> {
    let edges = knn_edges(centroids, k)?;
    let features: Vec<S> = centroids.iter().flat_map(|&(x, y)| [x, y]).collect();
    Ok(SuperpixelGraph::new(centroids.len(), edges, features, 2, None))
}

/// One node per pixel with 4-adjacency edges; features are the channel
/// intensities plus the normalized (x, y) position.
pub fn build_pixel_grid_graph<S: Scalar>(image: &Image<S>) -> SuperpixelGraph<S> {
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let fdim = c + 2;
    let mut features = Vec::with_capacity(h * w * fdim);
    let mut edges = Vec::with_capacity(2 * h * w);
    let (sw, sh) = (w as f64, h as f64);
    for y in 0..h {
        for x in 0..w {
            features.extend_from_slice(image.pixel(x, y));
            features.push(cast(x as f64 / sw));
            features.push(cast(y as f64 / sh));
            let p = (y * w + x) as u32;
            if x + 1 < w {
                edges.push((p, p + 1));
            }
            if y + 1 < h {
                edges.push((p, p + w as u32));
            }
        }
    }
    SuperpixelGraph::new(h * w, edges, features, fdim, None)
}

/// Binary symmetric adjacency M and the diagonal degree matrix D.
pub fn adjacency_and_degree<S: Scalar>(
    graph: &SuperpixelGraph<S>,
) -> (SparseMatrix<S>, SparseMatrix<S>) {
    let mut triplets = Vec::with_capacity(2 * graph.num_edges());
    for &(a, b) in graph.edges() {
        triplets.push((a as usize, b as usize, S::one()));
        triplets.push((b as usize, a as usize, S::one()));
    }
    let adjacency =
        SparseMatrix::from_triplets(graph.num_nodes(), triplets).expect("valid graph edges");
    let degrees: Vec<S> = graph.degrees().iter().map(|&d| cast(d as f64)).collect();
    (adjacency, SparseMatrix::from_diagonal(&degrees))
}

/// Write graphs in the plain-text container format: per graph a header
/// `m n F label` (label -1 when absent), `m` feature rows, `n` edge rows.
pub fn write_graphs<S: Scalar>(
    graphs: &[SuperpixelGraph<S>],
    out: &mut impl Write,
) -> Result<(), GraphError> {
    for g in graphs {
        let label = g.label().map(|l| l as i32).unwrap_or(-1);
        writeln!(out, "{} {} {} {}", g.num_nodes(), g.num_edges(), g.feature_dim(), label)?;
        for v in 0..g.num_nodes() {
            let row: Vec<String> = g.node_feature(v).iter().map(|f| format!("{f}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        for &(a, b) in g.edges() {
            writeln!(out, "{a} {b}")?;
        }
    }
    Ok(())
}

/// Read every graph block from the container format until end of input.
pub fn read_graphs<S: Scalar>(
    input: &mut impl BufRead,
) -> Result<Vec<SuperpixelGraph<S>>, GraphError> {
    let mut lines = input.lines();
    let mut graphs = Vec::new();
    loop {
        let header = match lines.next() {
            None => break,
            Some(line) => line?,
        };
        if header.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = header.split_ascii_whitespace().collect();
        if parts.len() != 4 {
            return Err(GraphError::Parse(format!("bad header: {header:?}")));
        }
        let m: usize = parts[0].parse().map_err(|e| GraphError::Parse(format!("m: {e}")))?;
        let n: usize = parts[1].parse().map_err(|e| GraphError::Parse(format!("n: {e}")))?;
        let f: usize = parts[2].parse().map_err(|e| GraphError::Parse(format!("F: {e}")))?;
        let label: i32 =
            parts[3].parse().map_err(|e| GraphError::Parse(format!("label: {e}")))?;
        let label = if label < 0 {
            None
        } else if label <= 9 {
            Some(label as u8)
        } else {
            return Err(GraphError::Parse(format!("label {label} out of range")));
        };
        let mut features = Vec::with_capacity(m * f);
        for v in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| GraphError::Parse(format!("missing feature row {v}")))??;
            let vals: Result<Vec<f64>, _> =
                line.split_ascii_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| GraphError::Parse(format!("feature row {v}: {e}")))?;
            if vals.len() != f {
                return Err(GraphError::Parse(format!(
                    "feature row {v} has {} values, expected {f}",
                    vals.len()
                )));
            }
            features.extend(vals.into_iter().map(cast::<S>));
        }
        let mut edges = Vec::with_capacity(n);
        for e in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| GraphError::Parse(format!("missing edge row {e}")))??;
            let mut it = line.split_ascii_whitespace();
            let a: u32 = it
                .next()
                .ok_or_else(|| GraphError::Parse(format!("edge row {e}")))?
                .parse()
                .map_err(|err| GraphError::Parse(format!("edge row {e}: {err}")))?;
            let b: u32 = it
                .next()
                .ok_or_else(|| GraphError::Parse(format!("edge row {e}")))?
                .parse()
                .map_err(|err| GraphError::Parse(format!("edge row {e}: {err}")))?;
            if a as usize >= m || b as usize >= m || a == b {
                return Err(GraphError::Parse(format!("edge ({a}, {b}) invalid for {m} nodes")));
            }
            edges.push((a, b));
        }
        graphs.push(SuperpixelGraph::new(m, edges, features, f, label));
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::normalize;

    fn quad_map() -> LabelMap {
        // 2x2 with four distinct labels: 0,1 on top, 2,3 below
        LabelMap::from_raw(2, 2, &[0, 1, 2, 3])
    }

    #[test]
    fn single_segment_rag() {
        let img: Image<f64> = normalize(&[5, 5, 5, 5], 2, 2, 1);
        let map = LabelMap::from_raw(2, 2, &[0, 0, 0, 0]);
        let g = build_rag(&img, &map).unwrap();
        assert_eq!(g.num_nodes(), 1);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn four_label_rag_edges() {
        let img: Image<f64> = normalize(&[0, 60, 120, 200], 2, 2, 1);
        let g = build_rag(&img, &quad_map()).unwrap();
        assert_eq!(g.num_nodes(), 4);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn node_feature_values() {
        // left half one segment on a 4x4 image
        let mut raw = vec![0usize; 16];
        for y in 0..4 {
            raw[y * 4 + 2] = 1;
            raw[y * 4 + 3] = 1;
        }
        let map = LabelMap::from_raw(4, 4, &raw);
        let img: Image<f64> = normalize(&[100; 16], 4, 4, 1);
        let feats = node_features(&img, &map).unwrap();
        // mean of integer x in {0, 1} is 0.5; divided by W = 4
        let (cx, cy) = feats.centroid(0);
        assert!((cx - 0.125).abs() < 1e-12);
        assert!((cy - 0.375).abs() < 1e-12); // mean of y in {0..3} is 1.5, / 4
        assert!((feats.relative_size(0) - 0.5).abs() < 1e-12);
        assert!((feats.mean_color(0)[0] - 100.0 / 255.0).abs() < 1e-12);
        let total: f64 = (0..feats.num_nodes()).map(|v| feats.relative_size(v)).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_image_mean_color() {
        let img: Image<f64> = normalize(&[51; 4], 2, 2, 1);
        let feats = node_features(&img, &quad_map()).unwrap();
        for v in 0..4 {
            assert!((feats.mean_color(v)[0] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_collinear_and_complete() {
        let pts: Vec<(f64, f64)> = vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)];
        assert_eq!(knn_edges(&pts, 0).unwrap(), vec![]);
        assert_eq!(knn_edges(&pts, 1).unwrap(), vec![(0, 1), (1, 2)]);
        assert_eq!(knn_edges(&pts, 2).unwrap(), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(matches!(knn_edges(&pts, 3), Err(GraphError::KnnTooLarge { .. })));
    }

    #[test]
    fn pixel_grid_counts() {
        let img1: Image<f64> = normalize(&[9], 1, 1, 1);
        let g1 = build_pixel_grid_graph(&img1);
        assert_eq!((g1.num_nodes(), g1.num_edges()), (1, 0));

        let img2: Image<f64> = normalize(&[0, 1, 2, 3], 2, 2, 1);
        let g2 = build_pixel_grid_graph(&img2);
        assert_eq!((g2.num_nodes(), g2.num_edges()), (4, 4));

        let img3: Image<f64> = normalize(&[0; 9], 3, 3, 1);
        let g3 = build_pixel_grid_graph(&img3);
        assert_eq!((g3.num_nodes(), g3.num_edges()), (9, 12));
        assert_eq!(g3.feature_dim(), 3);
    }

    #[test]
    fn adjacency_degree_path() {
        let g: SuperpixelGraph<f64> =
            SuperpixelGraph::new(3, vec![(0, 1), (1, 2)], vec![0.0; 3], 1, None);
        let (m, d) = adjacency_and_degree(&g);
        assert_eq!(d.diagonal(), vec![1.0, 2.0, 1.0]);
        assert_eq!(m.row_sums(), d.diagonal());
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn edgeless_adjacency_is_zero() {
        let g: SuperpixelGraph<f64> = SuperpixelGraph::new(3, vec![], vec![0.0; 3], 1, None);
        let (m, d) = adjacency_and_degree(&g);
        assert_eq!(m.nnz(), 0);
        assert_eq!(d.diagonal(), vec![0.0; 3]);
    }

    #[test]
    fn graph_container_round_trip() {
        let img: Image<f64> = normalize(&[0, 60, 120, 200], 2, 2, 1);
        let g = build_rag(&img, &quad_map()).unwrap().with_label(7);
        let g2: SuperpixelGraph<f64> = SuperpixelGraph::new(1, vec![], vec![0.5, 0.5], 2, None);
        let mut buf = Vec::new();
        write_graphs(&[g.clone(), g2.clone()], &mut buf).unwrap();
        let back: Vec<SuperpixelGraph<f64>> =
            read_graphs(&mut std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], g);
        assert_eq!(back[1], g2);
    }

    #[test]
    fn rag_is_connected_for_any_label_map() {
        let bytes: Vec<u8> = (0..36u32).map(|i| (i * 7 % 256) as u8).collect();
        let img: Image<f64> = normalize(&bytes, 6, 6, 1);
        let raw: Vec<usize> = (0..36).map(|i| (i * 13 + i / 7) % 9).collect();
        let map = LabelMap::from_raw(6, 6, &raw);
        let g = build_rag(&img, &map).unwrap();
        assert!(g.is_connected());
    }
}

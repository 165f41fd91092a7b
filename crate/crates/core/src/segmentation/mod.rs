//! Superpixel segmentation: Quickshift, SLIC and Felzenszwalb.
//!
//! All three segmenters take an [`Image`] and produce a [`LabelMap`]: a
//! per-pixel assignment to segment ids forming exactly `[0, num_segments)`.
//! [`segmentation_stats`] aggregates per-dataset node and degree statistics.

mod felzenszwalb;
mod quickshift;
mod slic;

pub use felzenszwalb::felzenszwalb;
pub use quickshift::{quickshift, quickshift_forest, QuickshiftForest, QuickshiftParams};
pub use slic::{slic, SlicParams};

use thiserror::Error;

use crate::graph::SuperpixelGraph;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no label maps supplied")]
    EmptyInput,
    #[error("malformed label map text: {0}")]
    Parse(String),
}

impl SegmentationError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter { name, reason: reason.into() }
    }
}

/// Per-pixel superpixel assignment. Labels are contiguous integers starting
/// at zero, compacted in row-major first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    num_segments: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    /// Wrap raw labels, compacting them to `[0, num_segments)` in row-major
    /// first-occurrence order.
    pub fn from_raw(height: usize, width: usize, raw: &[usize]) -> Self {
        assert_eq!(raw.len(), height * width);
        let mut remap = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let next = remap.len() as u32;
            let id = *remap.entry(r).or_insert(next);
            labels.push(id);
        }
        LabelMap { height, width, num_segments: remap.len(), labels }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per segment.
    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_segments];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Plain-text form: header `H W num_segments`, then `H` rows of `W`
    /// space-separated labels.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.height, self.width, self.num_segments);
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|x| self.label_at(x, y).to_string())
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SegmentationError> {
        let mut tokens = text.split_ascii_whitespace();
        let mut next = |what: &str| -> Result<usize, SegmentationError> {
            tokens
                .next()
                .ok_or_else(|| SegmentationError::Parse(format!("missing {what}")))?
                .parse()
                .map_err(|e| SegmentationError::Parse(format!("bad {what}: {e}")))
        };
        let height = next("height")?;
        let width = next("width")?;
        let num_segments = next("segment count")?;
        let mut labels = Vec::with_capacity(height * width);
        for i in 0..height * width {
            let l = next(&format!("label {i}"))?;
            if l >= num_segments {
                return Err(SegmentationError::Parse(format!(
                    "label {l} out of range for {num_segments} segments"
                )));
            }
            labels.push(l as u32);
        }
        if tokens.next().is_some() {
            return Err(SegmentationError::Parse("trailing tokens".into()));
        }
        let map = LabelMap { height, width, num_segments, labels };
        if map.segment_sizes().iter().any(|&s| s == 0) {
            return Err(SegmentationError::Parse("segment ids are not contiguous".into()));
        }
        Ok(map)
    }
}

/// Dataset-level superpixel statistics. Degree fields are populated only
/// when region adjacency graphs are supplied alongside the label maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationStats {
    pub mean_nodes: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub mean_degree: Option<f64>,
    pub min_degree: Option<usize>,
    pub max_degree: Option<usize>,
}

/// Node statistics over label maps; degree statistics over the RAGs when
/// supplied (degree of a node = neighbor count).
pub fn segmentation_stats<S: Scalar>(
    label_maps: &[LabelMap],
    graphs: Option<&[SuperpixelGraph<S>]>,
) -> Result<SegmentationStats, SegmentationError> {
    if label_maps.is_empty() {
        return Err(SegmentationError::EmptyInput);
    }
    let counts: Vec<usize> = label_maps.iter().map(|m| m.num_segments()).collect();
    let mean_nodes = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    let min_nodes = *counts.iter().min().unwrap();
    let max_nodes = *counts.iter().max().unwrap();

    let (mut mean_degree, mut min_degree, mut max_degree) = (None, None, None);
    if let Some(graphs) = graphs {
        let mut total = 0usize;
        let mut nodes = 0usize;
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        for g in graphs {
            for v in 0..g.num_nodes() {
                let d = g.degree(v);
                total += d;
                lo = lo.min(d);
                hi = hi.max(d);
            }
            nodes += g.num_nodes();
        }
        if nodes > 0 {
            mean_degree = Some(total as f64 / nodes as f64);
            min_degree = Some(lo);
            max_degree = Some(hi);
        }
    }
    Ok(SegmentationStats { mean_nodes, min_nodes, max_nodes, mean_degree, min_degree, max_degree })
}

//! ragnet-core: images to superpixel graphs to graph-network classifiers.
//!
//! The pipeline has three stages:
//!
//! 1. [`segmentation`] turns an image into a superpixel [`LabelMap`]
//!    (Quickshift, SLIC or Felzenszwalb).
//! 2. [`graph`] builds a region adjacency graph (or KNN / pixel-grid graph)
//!    with per-node features.
//! 3. [`gnn`] classifies graphs with spectral (Chebyshev) or spatial
//!    (message-passing) convolution layers; [`spectral`] holds the
//!    underlying filtering machinery.
//!
//! All numeric code is generic over the [`Scalar`] element type (`f32` /
//! `f64`); the aliases below pin the default `f64` pipeline.
//!
//! [`LabelMap`]: segmentation::LabelMap

pub mod dataset;
pub mod gnn;
pub mod graph;
mod hash;
pub mod scalar;
pub mod segmentation;
pub mod sparse;
pub mod spectral;

pub use scalar::Scalar;

/// Default-precision aliases for the common pipeline types.
pub type Image = dataset::Image<f64>;
pub type Image32 = dataset::Image<f32>;
pub type LabeledImageSet = dataset::LabeledImageSet<f64>;
pub type SuperpixelGraph = graph::SuperpixelGraph<f64>;
pub type SuperpixelGraph32 = graph::SuperpixelGraph<f32>;
pub type SparseMatrix = sparse::SparseMatrix<f64>;
pub type Laplacian = spectral::Laplacian<f64>;
pub type Model = gnn::Model<f64>;
pub type Batch = gnn::Batch<f64>;

//! Felzenszwalb graph-based segmentation: greedy merging over 8-connected
//! pixel edges sorted by color distance, with the adaptive threshold
//! `tau(C) = scale / |C|`.

use crate::dataset::Image;
use crate::scalar::Scalar;

use super::{LabelMap, SegmentationError};

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    size: Vec<usize>,
    /// Largest accepted internal edge weight per component.
    int_diff: Vec<f64>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            int_diff: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize, weight: f64) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
        self.size[a] += self.size[b];
        self.int_diff[a] = self.int_diff[a].max(self.int_diff[b]).max(weight);
        a
    }
}

/// Color distance on the 0..=255 intensity scale, the range the classic
/// formulation's `scale` parameter is calibrated for.
fn edge_weight<S: Scalar>(image: &Image<S>, a: (usize, usize), b: (usize, usize)) -> f64 {
    let pa = image.pixel(a.0, a.1);
    let pb = image.pixel(b.0, b.1);
    let mut acc = 0.0;
    for ch in 0..image.channels() {
        let d = (pa[ch] - pb[ch]).to_f64_lossy() * 255.0;
        acc += d * d;
    }
    acc.sqrt()
}

/// Felzenszwalb segmentation. Segments smaller than `min_size` are merged
/// into their nearest neighbor in a post-pass over the same sorted edges.
pub fn felzenszwalb<S: Scalar>(
    image: &Image<S>,
    scale: f64,
    min_size: usize,
) -> Result<LabelMap, SegmentationError> {
    if !(scale > 0.0) {
        return Err(SegmentationError::param("scale", "must be positive"));
    }
    if min_size < 1 {
        return Err(SegmentationError::param("min_size", "must be at least 1"));
    }
    let (h, w) = (image.height(), image.width());
    let n = h * w;

    // 8-connected edges in scan order; stable sort keeps ties deterministic.
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(4 * n);
    for y in 0..h {
        for x in 0..w {
            let p = (y * w + x) as u32;
            let push = |xx: usize, yy: usize, edges: &mut Vec<(f64, u32, u32)>| {
                let q = (yy * w + xx) as u32;
                edges.push((edge_weight(image, (x, y), (xx, yy)), p, q));
            };
            if x + 1 < w {
                push(x + 1, y, &mut edges);
            }
            if y + 1 < h {
                push(x, y + 1, &mut edges);
                if x + 1 < w {
                    push(x + 1, y + 1, &mut edges);
                }
                if x > 0 {
                    push(x - 1, y + 1, &mut edges);
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut ds = DisjointSet::new(n);
    for &(weight, a, b) in &edges {
        let (ra, rb) = (ds.find(a as usize), ds.find(b as usize));
        if ra == rb {
            continue;
        }
        let ta = ds.int_diff[ra] + scale / ds.size[ra] as f64;
        let tb = ds.int_diff[rb] + scale / ds.size[rb] as f64;
        if weight <= ta.min(tb) {
            ds.union(ra, rb, weight);
        }
    }

    // small-segment cleanup
    for &(_, a, b) in &edges {
        let (ra, rb) = (ds.find(a as usize), ds.find(b as usize));
        if ra != rb && (ds.size[ra] < min_size || ds.size[rb] < min_size) {
            ds.union(ra, rb, 0.0);
        }
    }

    let roots: Vec<usize> = (0..n).map(|p| ds.find(p)).collect();
    Ok(LabelMap::from_raw(h, w, &roots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::normalize;

    #[test]
    fn constant_image_is_one_segment() {
        let img: Image<f64> = normalize(&[90; 25], 5, 5, 1);
        let map = felzenszwalb(&img, 1.0, 1).unwrap();
        assert_eq!(map.num_segments(), 1);
    }

    #[test]
    fn single_pixel() {
        let img: Image<f64> = normalize(&[13], 1, 1, 1);
        let map = felzenszwalb(&img, 100.0, 5).unwrap();
        assert_eq!(map.num_segments(), 1);
    }

    /// Replay of the sorted-edge merge sequence: all zero-weight edges merge
    /// the two homogeneous halves internally; every cross edge then compares
    /// against tau = scale/8 per half and stays above it, so exactly two
    /// components survive.
    #[test]
    fn two_halves_with_large_gap_stay_separate() {
        let mut bytes = vec![0u8; 16];
        bytes[8..].fill(255);
        let img: Image<f64> = normalize(&bytes, 4, 4, 1);
        let map = felzenszwalb(&img, 100.0, 1).unwrap();
        assert_eq!(map.num_segments(), 2);
        assert_ne!(map.label_at(0, 1), map.label_at(0, 2));
    }

    #[test]
    fn min_size_merges_specks() {
        // single bright pixel in a flat field
        let mut bytes = vec![10u8; 25];
        bytes[12] = 250;
        let img: Image<f64> = normalize(&bytes, 5, 5, 1);
        let keep = felzenszwalb(&img, 10.0, 1).unwrap();
        assert_eq!(keep.num_segments(), 2);
        let merged = felzenszwalb(&img, 10.0, 2).unwrap();
        assert_eq!(merged.num_segments(), 1);
    }

    #[test]
    fn invalid_params_rejected() {
        let img: Image<f64> = normalize(&[0], 1, 1, 1);
        assert!(felzenszwalb(&img, 0.0, 1).is_err());
        assert!(felzenszwalb(&img, 1.0, 0).is_err());
    }
}

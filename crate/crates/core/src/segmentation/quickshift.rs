//! Quickshift mode-seeking segmentation.
//!
//! Each pixel is lifted into a feature space combining weighted color and
//! image position. A Gaussian kernel density estimate with bandwidth
//! `epsilon` is computed over the window around each pixel; every pixel then
//! links to its nearest in-window neighbor of strictly higher density. Links
//! longer than the window diagonal `S * sqrt(2)` are cut, and the resulting
//! forest roots define the segments.

use crate::dataset::Image;
use crate::scalar::{cast, Scalar};

use super::{LabelMap, SegmentationError};

/// Color intensities are stretched onto a 0..=150 axis before entering the
/// feature space, so that with `alpha = 1` the color term is commensurate
/// with pixel coordinates. Calibrated against published per-dataset
/// superpixel statistics; override via [`QuickshiftParams::color_scale`].
pub const DEFAULT_COLOR_SCALE: f64 = 150.0;

/// Relative amplitude of the deterministic density perturbation that orders
/// plateaus (e.g. constant image regions, where every pixel would otherwise
/// tie and become its own mode).
const DENSITY_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuickshiftParams<S> {
    /// Standard deviation of the Gaussian density kernel.
    pub epsilon: S,
    /// Weight of the color term.
    pub alpha: S,
    /// Window parameter S: search covers pixels within Chebyshev distance S.
    pub window: usize,
    /// Scale applied to normalized intensities before weighting by `alpha`.
    pub color_scale: S,
}

impl<S: Scalar> QuickshiftParams<S> {
    pub fn new(epsilon: S, alpha: S, window: usize) -> Self {
        Self { epsilon, alpha, window, color_scale: cast(DEFAULT_COLOR_SCALE) }
    }

    fn validate(&self) -> Result<(), SegmentationError> {
        if !(self.epsilon > S::zero()) {
            return Err(SegmentationError::param("epsilon", "must be positive"));
        }
        if self.alpha < S::zero() {
            return Err(SegmentationError::param("alpha", "must be nonnegative"));
        }
        if self.window < 1 {
            return Err(SegmentationError::param("window", "must be at least 1"));
        }
        Ok(())
    }
}

/// The mode-seeking forest behind a quickshift segmentation, exposed for
/// diagnostics and invariant checks.
#[derive(Debug, Clone)]
pub struct QuickshiftForest<S> {
    /// Parent pixel index per pixel; `None` for roots.
    pub parents: Vec<Option<usize>>,
    /// Perturbed density per pixel, the quantity that increases along links.
    pub densities: Vec<S>,
    /// Link length in feature space per pixel; unset for roots.
    pub link_dists: Vec<S>,
}

use crate::hash::unit_hash;

fn features<S: Scalar>(image: &Image<S>, params: &QuickshiftParams<S>) -> Vec<S> {
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let fdim = c + 2;
    let mut feat = vec![S::zero(); h * w * fdim];
    let cw = params.alpha * params.color_scale;
    for y in 0..h {
        for x in 0..w {
            let o = (y * w + x) * fdim;
            let px = image.pixel(x, y);
            for (k, &v) in px.iter().enumerate() {
                feat[o + k] = cw * v;
            }
            feat[o + c] = cast(x as f64);
            feat[o + c + 1] = cast(y as f64);
        }
    }
    feat
}

fn feature_dist2<S: Scalar>(feat: &[S], fdim: usize, a: usize, b: usize) -> S {
    let pa = &feat[a * fdim..(a + 1) * fdim];
    let pb = &feat[b * fdim..(b + 1) * fdim];
    let mut acc = S::zero();
    for k in 0..fdim {
        let d = pa[k] - pb[k];
        acc += d * d;
    }
    acc
}

/// Compute the quickshift forest without resolving it into segments.
pub fn quickshift_forest<S: Scalar>(
    image: &Image<S>,
    params: &QuickshiftParams<S>,
) -> Result<QuickshiftForest<S>, SegmentationError> {
    params.validate()?;
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let n = h * w;
    let fdim = c + 2;
    let feat = features(image, params);
    let r = params.window as isize;
    let inv_two_eps2 = (cast::<S>(2.0) * params.epsilon * params.epsilon).recip();

    let mut densities = vec![S::zero(); n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = (y as usize) * w + x as usize;
            let mut acc = S::zero();
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let q = (yy as usize) * w + xx as usize;
                    let d2 = feature_dist2(&feat, fdim, p, q);
                    acc += (-d2 * inv_two_eps2).exp();
                }
            }
            // deterministic perturbation so plateaus drain to a single mode
            let jitter = S::one() + cast::<S>(DENSITY_JITTER * unit_hash(p as u64));
            densities[p] = acc * jitter;
        }
    }

    // (density, reversed scan index): larger is "denser"; exact density ties
    // fall back to preferring the lexicographically smaller (y, x) pixel.
    let denser = |q: usize, p: usize| -> bool {
        densities[q] > densities[p] || (densities[q] == densities[p] && q < p)
    };

    let max_dist2 = cast::<S>((params.window as f64) * (params.window as f64) * 2.0);
    let mut parents = vec![None; n];
    let mut link_dists = vec![S::nan(); n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = (y as usize) * w + x as usize;
            let mut best: Option<(S, usize)> = None;
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let xx = x + dx;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let q = (yy as usize) * w + xx as usize;
                    if !denser(q, p) {
                        continue;
                    }
                    let d2 = feature_dist2(&feat, fdim, p, q);
                    let better = match best {
                        None => true,
                        Some((bd, bq)) => d2 < bd || (d2 == bd && q < bq),
                    };
                    if better {
                        best = Some((d2, q));
                    }
                }
            }
            if let Some((d2, q)) = best {
                if d2 <= max_dist2 {
                    parents[p] = Some(q);
                    link_dists[p] = d2.sqrt();
                }
            }
        }
    }

    Ok(QuickshiftForest { parents, densities, link_dists })
}

/// Quickshift segmentation of `image` with the given parameters.
pub fn quickshift<S: Scalar>(
    image: &Image<S>,
    params: &QuickshiftParams<S>,
) -> Result<LabelMap, SegmentationError> {
    let forest = quickshift_forest(image, params)?;
    let n = forest.parents.len();
    let mut root = vec![usize::MAX; n];
    for start in 0..n {
        if root[start] != usize::MAX {
            continue;
        }
        let mut chain = Vec::new();
        let mut p = start;
        while root[p] == usize::MAX {
            chain.push(p);
            match forest.parents[p] {
                Some(q) => p = q,
                None => break,
            }
        }
        let r = if root[p] != usize::MAX { root[p] } else { p };
        for q in chain {
            root[q] = r;
        }
    }
    Ok(LabelMap::from_raw(image.height(), image.width(), &root))
}

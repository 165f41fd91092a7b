//! Spectral graph filtering.
//!
//! Laplacian operators, the graph Fourier transform through an explicit
//! eigendecomposition, non-parametric spectral filters, and the fast
//! Chebyshev polynomial filter. The eigendecomposition costs O(m^3) and
//! serves as the oracle route for small graphs; production filtering goes
//! through [`chebyshev_filter`], which only touches the sparse operator.

use thiserror::Error;

use crate::hash::unit_hash;
use crate::scalar::{cast, Scalar};
use crate::sparse::SparseMatrix;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("signal length {got} does not match node count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree matrix disagrees with adjacency at node {node}: D = {degree}, row sum = {row_sum}")]
    InconsistentDegree { node: usize, degree: f64, row_sum: f64 },
    #[error("adjacency matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix dimensions differ: {a} vs {b}")]
    SizeMismatch { a: usize, b: usize },
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("Chebyshev order must be at least 1")]
    EmptyCoefficients,
}

/// Which Laplacian to build from adjacency and degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianMode {
    /// L = D - M.
    Combinatorial,
    /// L = I - D^{-1/2} M D^{-1/2}, with zero rows for isolated nodes.
    Normalized,
    /// The nonstandard composition I - D^{-1/2} (M D^{-1}) D^{-1/2}, kept
    /// behind this variant for side-by-side comparison with [`Normalized`].
    ///
    /// [`Normalized`]: LaplacianMode::Normalized
    NormalizedLiteral,
}

/// A graph Laplacian with its construction mode and an optional cached
/// largest eigenvalue.
#[derive(Debug, Clone)]
pub struct Laplacian<S> {
    matrix: SparseMatrix<S>,
    mode: LaplacianMode,
    lambda_max: Option<S>,
}

impl<S: Scalar> Laplacian<S> {
    pub fn matrix(&self) -> &SparseMatrix<S> {
        &self.matrix
    }

    pub fn mode(&self) -> LaplacianMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn lambda_max(&self) -> Option<S> {
        self.lambda_max
    }

    pub fn with_lambda_max(mut self, lambda_max: S) -> Self {
        self.lambda_max = Some(lambda_max);
        self
    }

    /// Largest eigenvalue for Chebyshev scaling: the cached value if any,
    /// the spectral bound 2 for normalized Laplacians, otherwise a power
    /// iteration estimate.
    pub fn lambda_max_for_scaling(&self) -> Result<S, SpectralError> {
        if let Some(l) = self.lambda_max {
            return Ok(l);
        }
        estimate_lambda_max(self)
    }
}

/// Build a Laplacian from the adjacency matrix `M` and degree matrix `D`.
pub fn laplacian<S: Scalar>(
    adjacency: &SparseMatrix<S>,
    degree: &SparseMatrix<S>,
    mode: LaplacianMode,
) -> Result<Laplacian<S>, SpectralError> {
    let m = adjacency.dim();
    if degree.dim() != m {
        return Err(SpectralError::SizeMismatch { a: m, b: degree.dim() });
    }
    if !adjacency.is_symmetric(cast(1e-12)) {
        return Err(SpectralError::NotSymmetric);
    }
    let row_sums = adjacency.row_sums();
    let diag = degree.diagonal();
    let tol = cast::<S>(1e-9);
    for v in 0..m {
        if (row_sums[v] - diag[v]).abs() > tol {
            return Err(SpectralError::InconsistentDegree {
                node: v,
                degree: diag[v].to_f64_lossy(),
                row_sum: row_sums[v].to_f64_lossy(),
            });
        }
        if degree.triplets().any(|(r, c, val)| r == v && c != v && val != S::zero()) {
            return Err(SpectralError::InconsistentDegree {
                node: v,
                degree: diag[v].to_f64_lossy(),
                row_sum: row_sums[v].to_f64_lossy(),
            });
        }
    }

    let mut triplets = Vec::with_capacity(adjacency.nnz() + m);
    match mode {
        LaplacianMode::Combinatorial => {
            for (r, c, v) in adjacency.triplets() {
                if r != c {
                    triplets.push((r, c, -v));
                }
            }
            for v in 0..m {
                if diag[v] != S::zero() {
                    triplets.push((v, v, diag[v]));
                }
            }
        }
        LaplacianMode::Normalized | LaplacianMode::NormalizedLiteral => {
            let inv_sqrt: Vec<S> = diag
                .iter()
                .map(|&d| if d > S::zero() { d.sqrt().recip() } else { S::zero() })
                .collect();
            let inv: Vec<S> = diag
                .iter()
                .map(|&d| if d > S::zero() { d.recip() } else { S::zero() })
                .collect();
            for (r, c, v) in adjacency.triplets() {
                if r == c {
                    continue;
                }
                let w = match mode {
                    LaplacianMode::Normalized => inv_sqrt[r] * v * inv_sqrt[c],
                    _ => inv_sqrt[r] * v * inv[c] * inv_sqrt[c],
                };
                triplets.push((r, c, -w));
            }
            for v in 0..m {
                if diag[v] > S::zero() {
                    triplets.push((v, v, S::one()));
                }
                // isolated nodes keep a zero row so filtering leaves them alone
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(m, triplets).expect("triplets built in range");
    Ok(Laplacian { matrix, mode, lambda_max: None })
}

/// Orthonormal eigenbasis of a Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralBasis<S> {
    eigenvalues: Vec<S>,
    /// Row-major m x m; column l is the eigenvector for eigenvalue l.
    u: Vec<S>,
    dim: usize,
}

impl<S: Scalar> SpectralBasis<S> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[S] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &[S] {
        &self.u
    }

    fn check_len(&self, x: &[S]) -> Result<(), SpectralError> {
        if x.len() != self.dim {
            return Err(SpectralError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense Jacobi eigendecomposition of the (symmetric) Laplacian. O(m^3);
/// meant for small graphs and as the testing oracle for the Chebyshev path.
pub fn eigendecompose<S: Scalar>(lap: &Laplacian<S>) -> Result<SpectralBasis<S>, SpectralError> {
    let m = lap.dim();
    let mut a = lap.matrix.to_dense();
    let mut u = vec![S::zero(); m * m];
    for i in 0..m {
        u[i * m + i] = S::one();
    }
    if m > 1 {
        let tol = cast::<S>(1e-14);
        let mut converged = false;
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let mut off = S::zero();
            for r in 0..m {
                for c in (r + 1)..m {
                    off = off.max(a[r * m + c].abs());
                }
            }
            if off <= tol {
                converged = true;
                break;
            }
            for p in 0..m {
                for q in (p + 1)..m {
                    let apq = a[p * m + q];
                    if apq.abs() <= tol {
                        continue;
                    }
                    let app = a[p * m + p];
                    let aqq = a[q * m + q];
                    let tau = (aqq - app) / (cast::<S>(2.0) * apq);
                    let t = if tau >= S::zero() {
                        (tau + (S::one() + tau * tau).sqrt()).recip()
                    } else {
                        -((-tau + (S::one() + tau * tau).sqrt()).recip())
                    };
                    let c = (S::one() + t * t).sqrt().recip();
                    let s = t * c;
                    for i in 0..m {
                        if i != p && i != q {
                            let aip = a[i * m + p];
                            let aiq = a[i * m + q];
                            a[i * m + p] = c * aip - s * aiq;
                            a[p * m + i] = a[i * m + p];
                            a[i * m + q] = s * aip + c * aiq;
                            a[q * m + i] = a[i * m + q];
                        }
                    }
                    let two = cast::<S>(2.0);
                    a[p * m + p] = c * c * app - two * s * c * apq + s * s * aqq;
                    a[q * m + q] = s * s * app + two * s * c * apq + c * c * aqq;
                    a[p * m + q] = S::zero();
                    a[q * m + p] = S::zero();
                    for i in 0..m {
                        let uip = u[i * m + p];
                        let uiq = u[i * m + q];
                        u[i * m + p] = c * uip - s * uiq;
                        u[i * m + q] = s * uip + c * uiq;
                    }
                }
            }
        }
        if !converged {
            // final check after the last sweep
            let mut off = S::zero();
            for r in 0..m {
                for c in (r + 1)..m {
                    off = off.max(a[r * m + c].abs());
                }
            }
            if off > tol {
                return Err(SpectralError::NonConvergence { iterations: JACOBI_MAX_SWEEPS });
            }
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[i * m + i].partial_cmp(&a[j * m + j]).unwrap());
    let eigenvalues: Vec<S> = order.iter().map(|&i| a[i * m + i]).collect();
    let mut sorted_u = vec![S::zero(); m * m];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..m {
            sorted_u[r * m + new_col] = u[r * m + old_col];
        }
    }
    Ok(SpectralBasis { eigenvalues, u: sorted_u, dim: m })
}

/// Graph Fourier transform x_hat = U^T x.
pub fn gft<S: Scalar>(basis: &SpectralBasis<S>, x: &[S]) -> Result<Vec<S>, SpectralError> {
    basis.check_len(x)?;
    let m = basis.dim;
    let mut out = vec![S::zero(); m];
    for l in 0..m {
        let mut acc = S::zero();
        for r in 0..m {
            acc += basis.u[r * m + l] * x[r];
        }
        out[l] = acc;
    }
    Ok(out)
}

/// Inverse graph Fourier transform x = U x_hat.
pub fn igft<S: Scalar>(basis: &SpectralBasis<S>, x_hat: &[S]) -> Result<Vec<S>, SpectralError> {
    basis.check_len(x_hat)?;
    let m = basis.dim;
    let mut out = vec![S::zero(); m];
    for r in 0..m {
        let mut acc = S::zero();
        for l in 0..m {
            acc += basis.u[r * m + l] * x_hat[l];
        }
        out[r] = acc;
    }
    Ok(out)
}

/// Filter a node signal by the frequency response `h`: y = U h(Lambda) U^T x.
pub fn spectral_filter<S: Scalar>(
    basis: &SpectralBasis<S>,
    x: &[S],
    h: impl Fn(S) -> S,
) -> Result<Vec<S>, SpectralError> {
    let mut x_hat = gft(basis, x)?;
    for (coef, &lambda) in x_hat.iter_mut().zip(basis.eigenvalues.iter()) {
        *coef = *coef * h(lambda);
    }
    igft(basis, &x_hat)
}

/// Chebyshev coefficients theta, defining the order-(K-1) polynomial filter
/// h(lambda) = sum_k theta_k T_k(lambda_scaled).
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffs<S> {
    theta: Vec<S>,
}

impl<S: Scalar> ChebCoeffs<S> {
    pub fn new(theta: Vec<S>) -> Result<Self, SpectralError> {
        if theta.is_empty() {
            return Err(SpectralError::EmptyCoefficients);
        }
        Ok(Self { theta })
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[S] {
        &self.theta
    }

    /// The scalar response at eigenvalue `lambda` under scaling by
    /// `lambda_max`; the spectral-route counterpart of [`chebyshev_filter`].
    pub fn response(&self, lambda: S, lambda_max: S) -> S {
        let lam = scale_guard(lambda_max);
        let x = cast::<S>(2.0) * lambda / lam - S::one();
        let mut acc = self.theta[0];
        if self.theta.len() == 1 {
            return acc;
        }
        let mut t_prev = S::one();
        let mut t_cur = x;
        acc += self.theta[1] * t_cur;
        for &th in &self.theta[2..] {
            let t_next = cast::<S>(2.0) * x * t_cur - t_prev;
            acc += th * t_next;
            t_prev = t_cur;
            t_cur = t_next;
        }
        acc
    }
}

/// An all-zero operator has lambda_max = 0; scale by 1 instead so the
/// shifted operator is well defined (it is -I either way).
fn scale_guard<S: Scalar>(lambda_max: S) -> S {
    if lambda_max <= cast(1e-12) {
        S::one()
    } else {
        lambda_max
    }
}

/// y = sum_k theta_k T_k(L_scaled) x via the three-term recurrence, without
/// materializing any dense matrix. L_scaled = 2 L / lambda_max - I.
pub fn chebyshev_filter<S: Scalar>(
    lap: &Laplacian<S>,
    x: &[S],
    coeffs: &ChebCoeffs<S>,
) -> Result<Vec<S>, SpectralError> {
    let m = lap.dim();
    if x.len() != m {
        return Err(SpectralError::DimensionMismatch { expected: m, got: x.len() });
    }
    let lambda_max = scale_guard(lap.lambda_max_for_scaling()?);
    let two_over_lam = cast::<S>(2.0) / lambda_max;

    // t = L_scaled v
    let apply_scaled = |v: &[S], t: &mut [S]| {
        lap.matrix.matvec(v, t);
        for i in 0..m {
            t[i] = two_over_lam * t[i] - v[i];
        }
    };

    let theta = coeffs.theta();
    let mut y: Vec<S> = x.iter().map(|&v| v * theta[0]).collect();
    if theta.len() == 1 {
        return Ok(y);
    }
    let mut t_prev = x.to_vec();
    let mut t_cur = vec![S::zero(); m];
    apply_scaled(x, &mut t_cur);
    for i in 0..m {
        y[i] += theta[1] * t_cur[i];
    }
    let mut scratch = vec![S::zero(); m];
    for &th in &theta[2..] {
        apply_scaled(&t_cur, &mut scratch);
        for i in 0..m {
            let t_next = cast::<S>(2.0) * scratch[i] - t_prev[i];
            t_prev[i] = t_cur[i];
            t_cur[i] = t_next;
            y[i] += th * t_next;
        }
    }
    Ok(y)
}

const POWER_MAX_ITERS: usize = 20_000;

/// Largest eigenvalue of a PSD Laplacian. Normalized Laplacians take the
/// fast path and return the spectral bound 2; other modes run a power
/// iteration to 1e-4 relative residual.
pub fn estimate_lambda_max<S: Scalar>(lap: &Laplacian<S>) -> Result<S, SpectralError> {
    if lap.mode == LaplacianMode::Normalized {
        return Ok(cast(2.0));
    }
    let m = lap.dim();
    if m == 0 {
        return Ok(S::zero());
    }
    let mut v: Vec<S> = (0..m).map(|i| S::one() + cast::<S>(unit_hash(i as u64))).collect();
    let norm = |v: &[S]| v.iter().map(|&x| x * x).sum::<S>().sqrt();
    let n0 = norm(&v);
    for x in v.iter_mut() {
        *x /= n0;
    }
    let mut av = vec![S::zero(); m];
    let tol = cast::<S>(1e-4);
    for iter in 0..POWER_MAX_ITERS {
        lap.matrix.matvec(&v, &mut av);
        let rho: S = v.iter().zip(&av).map(|(&a, &b)| a * b).sum();
        if rho.abs() <= cast(1e-300) {
            // zero operator
            return Ok(S::zero());
        }
        let mut resid = S::zero();
        for i in 0..m {
            let r = av[i] - rho * v[i];
            resid += r * r;
        }
        if resid.sqrt() <= tol * rho.abs() {
            return Ok(rho);
        }
        let n = norm(&av);
        if n <= cast(1e-300) {
            return Ok(S::zero());
        }
        for i in 0..m {
            v[i] = av[i] / n;
        }
        let _ = iter;
    }
    Err(SpectralError::NonConvergence { iterations: POWER_MAX_ITERS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{adjacency_and_degree, SuperpixelGraph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lap_of(edges: Vec<(u32, u32)>, m: usize, mode: LaplacianMode) -> Laplacian<f64> {
        let g: SuperpixelGraph<f64> =
            SuperpixelGraph::new(m, edges, vec![0.0; m], 1, None);
        let (adj, deg) = adjacency_and_degree(&g);
        laplacian(&adj, &deg, mode).unwrap()
    }

    pub(crate) fn random_connected_graph(
        rng: &mut ChaCha8Rng,
        max_nodes: usize,
    ) -> SuperpixelGraph<f64> {
        let m = rng.gen_range(2..=max_nodes);
        let mut edges = Vec::new();
        for v in 1..m {
            let u = rng.gen_range(0..v);
            edges.push((u as u32, v as u32));
        }
        for _ in 0..rng.gen_range(0..=2 * m) {
            let a = rng.gen_range(0..m);
            let b = rng.gen_range(0..m);
            if a != b {
                edges.push((a.min(b) as u32, a.max(b) as u32));
            }
        }
        SuperpixelGraph::new(m, edges, vec![0.0; m], 1, None)
    }

    #[test]
    fn combinatorial_edgeless_is_zero() {
        let lap = lap_of(vec![], 3, LaplacianMode::Combinatorial);
        assert_eq!(lap.matrix().nnz(), 0);
    }

    #[test]
    fn combinatorial_path2() {
        let lap = lap_of(vec![(0, 1)], 2, LaplacianMode::Combinatorial);
        let dense = lap.matrix().to_dense();
        assert_eq!(dense, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn normalized_path2_eigenvalues() {
        let lap = lap_of(vec![(0, 1)], 2, LaplacianMode::Normalized);
        let basis = eigendecompose(&lap).unwrap();
        assert!((basis.eigenvalues()[0] - 0.0).abs() < 1e-12);
        assert!((basis.eigenvalues()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn combinatorial_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_connected_graph(&mut rng, 12);
            let (adj, deg) = adjacency_and_degree(&g);
            let lap = laplacian(&adj, &deg, LaplacianMode::Combinatorial).unwrap();
            for s in lap.matrix().row_sums() {
                assert!(s.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn inconsistent_degree_rejected() {
        let g: SuperpixelGraph<f64> =
            SuperpixelGraph::new(2, vec![(0, 1)], vec![0.0; 2], 1, None);
        let (adj, _) = adjacency_and_degree(&g);
        let bad = SparseMatrix::from_diagonal(&[5.0, 1.0]);
        let err = laplacian(&adj, &bad, LaplacianMode::Combinatorial).unwrap_err();
        assert!(matches!(err, SpectralError::InconsistentDegree { node: 0, .. }));
    }

    #[test]
    fn eigendecompose_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_connected_graph(&mut rng, 10);
        for mode in [LaplacianMode::Combinatorial, LaplacianMode::Normalized] {
            let (adj, deg) = adjacency_and_degree(&g);
            let lap = laplacian(&adj, &deg, mode).unwrap();
            let basis = eigendecompose(&lap).unwrap();
            let m = lap.dim();
            // U Lambda U^T == L
            let mut err: f64 = 0.0;
            for r in 0..m {
                for c in 0..m {
                    let mut acc = 0.0;
                    for l in 0..m {
                        acc += basis.basis()[r * m + l]
                            * basis.eigenvalues()[l]
                            * basis.basis()[c * m + l];
                    }
                    err = err.max((acc - lap.matrix().get(r, c)).abs());
                }
            }
            assert!(err <= 1e-8, "reconstruction error {err}");
            // U^T U == I
            let mut ortho: f64 = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for r in 0..m {
                        acc += basis.basis()[r * m + i] * basis.basis()[r * m + j];
                    }
                    let want = if i == j { 1.0 } else { 0.0 };
                    ortho = ortho.max((acc - want).abs());
                }
            }
            assert!(ortho <= 1e-8, "orthonormality error {ortho}");
        }
    }

    #[test]
    fn connected_graph_has_single_zero_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_connected_graph(&mut rng, 9);
        let (adj, deg) = adjacency_and_degree(&g);
        let lap = laplacian(&adj, &deg, LaplacianMode::Combinatorial).unwrap();
        let basis = eigendecompose(&lap).unwrap();
        let zeros = basis.eigenvalues().iter().filter(|&&l| l.abs() < 1e-9).count();
        assert_eq!(zeros, 1);
    }

    #[test]
    fn edgeless_eigenvalues_are_zero() {
        let lap = lap_of(vec![], 4, LaplacianMode::Combinatorial);
        let basis = eigendecompose(&lap).unwrap();
        assert!(basis.eigenvalues().iter().all(|&l| l.abs() < 1e-12));
    }

    #[test]
    fn gft_round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = random_connected_graph(&mut rng, 12);
        let (adj, deg) = adjacency_and_degree(&g);
        let lap = laplacian(&adj, &deg, LaplacianMode::Normalized).unwrap();
        let basis = eigendecompose(&lap).unwrap();
        let x: Vec<f64> = (0..lap.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x_hat = gft(&basis, &x).unwrap();
        let back = igft(&basis, &x_hat).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-10);
        }
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nh: f64 = x_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((nx - nh).abs() <= 1e-10);
    }

    #[test]
    fn gft_zero_maps_to_zero() {
        let lap = lap_of(vec![(0, 1), (1, 2)], 3, LaplacianMode::Combinatorial);
        let basis = eigendecompose(&lap).unwrap();
        let x_hat = gft(&basis, &[0.0; 3]).unwrap();
        assert!(x_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_signal_concentrates_at_zero_frequency() {
        let lap = lap_of(vec![(0, 1), (1, 2), (0, 2)], 3, LaplacianMode::Combinatorial);
        let basis = eigendecompose(&lap).unwrap();
        let x_hat = gft(&basis, &[1.0; 3]).unwrap();
        for (l, &coef) in x_hat.iter().enumerate() {
            if basis.eigenvalues()[l].abs() > 1e-9 {
                assert!(coef.abs() < 1e-10, "energy at lambda {}", basis.eigenvalues()[l]);
            }
        }
    }

    #[test]
    fn gft_dimension_mismatch() {
        let lap = lap_of(vec![(0, 1)], 2, LaplacianMode::Combinatorial);
        let basis = eigendecompose(&lap).unwrap();
        assert!(matches!(
            gft(&basis, &[0.0; 3]),
            Err(SpectralError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn identity_and_laplacian_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = random_connected_graph(&mut rng, 10);
        let (adj, deg) = adjacency_and_degree(&g);
        let lap = laplacian(&adj, &deg, LaplacianMode::Combinatorial).unwrap();
        let basis = eigendecompose(&lap).unwrap();
        let m = lap.dim();
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let y = spectral_filter(&basis, &x, |_| 1.0).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-9);
        }

        let y = spectral_filter(&basis, &x, |l| l).unwrap();
        let mut lx = vec![0.0; m];
        lap.matrix().matvec(&x, &mut lx);
        for (a, b) in lx.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-9);
        }

        let y = spectral_filter(&basis, &x, |l| l * l).unwrap();
        let mut llx = vec![0.0; m];
        lap.matrix().matvec(&lx, &mut llx);
        for (a, b) in llx.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn chebyshev_low_orders_expand() {
        let lap = lap_of(vec![(0, 1), (1, 2)], 3, LaplacianMode::Normalized)
            .with_lambda_max(2.0);
        let x = [0.3, -1.2, 0.4];

        let y = chebyshev_filter(&lap, &x, &ChebCoeffs::new(vec![1.0]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &x);

        let (t0, t1) = (0.7, -0.4);
        let y = chebyshev_filter(&lap, &x, &ChebCoeffs::new(vec![t0, t1]).unwrap()).unwrap();
        let mut lx = vec![0.0; 3];
        lap.matrix().matvec(&x, &mut lx);
        for i in 0..3 {
            let scaled = lx[i] - x[i]; // 2L/2 - I
            assert!((y[i] - (t0 * x[i] + t1 * scaled)).abs() <= 1e-12);
        }
    }

    #[test]
    fn chebyshev_matches_spectral_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..25 {
            let g = random_connected_graph(&mut rng, 20);
            let (adj, deg) = adjacency_and_degree(&g);
            for mode in [LaplacianMode::Combinatorial, LaplacianMode::Normalized] {
                let lap = laplacian(&adj, &deg, mode).unwrap();
                let basis = eigendecompose(&lap).unwrap();
                let lam = *basis
                    .eigenvalues()
                    .last()
                    .unwrap();
                let lap = lap.with_lambda_max(lam);
                let m = lap.dim();
                let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let k = rng.gen_range(1..=5);
                let theta: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let coeffs = ChebCoeffs::new(theta).unwrap();
                let fast = chebyshev_filter(&lap, &x, &coeffs).unwrap();
                let slow = spectral_filter(&basis, &x, |l| coeffs.response(l, lam)).unwrap();
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() <= 1e-8, "mismatch {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn chebyshev_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_connected_graph(&mut rng, 12);
        let (adj, deg) = adjacency_and_degree(&g);
        let lap = laplacian(&adj, &deg, LaplacianMode::Normalized).unwrap();
        let m = lap.dim();
        let coeffs = ChebCoeffs::new(vec![0.2, -0.7, 0.3]).unwrap();
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (1.7, -0.6);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(&xi, &yi)| a * xi + b * yi).collect();
        let f_combo = chebyshev_filter(&lap, &combo, &coeffs).unwrap();
        let fx = chebyshev_filter(&lap, &x, &coeffs).unwrap();
        let fy = chebyshev_filter(&lap, &y, &coeffs).unwrap();
        for i in 0..m {
            assert!((f_combo[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn chebyshev_impulse_locality() {
        // path graph: a K-term filter of an impulse cannot reach beyond K-1 hops
        let m = 9;
        let edges: Vec<(u32, u32)> = (0..m as u32 - 1).map(|i| (i, i + 1)).collect();
        let lap = lap_of(edges, m, LaplacianMode::Normalized);
        for k in 1..=4usize {
            let theta = vec![0.5; k];
            let coeffs = ChebCoeffs::new(theta).unwrap();
            let mut x = vec![0.0; m];
            let v = 4;
            x[v] = 1.0;
            let y = chebyshev_filter(&lap, &x, &coeffs).unwrap();
            for (u, &val) in y.iter().enumerate() {
                if u.abs_diff(v) > k - 1 {
                    assert!(val.abs() <= 1e-12, "order {k}: leak at hop {}", u.abs_diff(v));
                }
            }
        }
    }

    #[test]
    fn empty_coefficients_rejected() {
        assert!(matches!(
            ChebCoeffs::<f64>::new(vec![]),
            Err(SpectralError::EmptyCoefficients)
        ));
    }

    #[test]
    fn lambda_max_normalized_fast_path() {
        let lap = lap_of(vec![(0, 1), (1, 2)], 3, LaplacianMode::Normalized);
        assert_eq!(estimate_lambda_max(&lap).unwrap(), 2.0);
    }

    #[test]
    fn lambda_max_path2_combinatorial() {
        let lap = lap_of(vec![(0, 1)], 2, LaplacianMode::Combinatorial);
        let est = estimate_lambda_max(&lap).unwrap();
        assert!((est - 2.0).abs() <= 2e-3);
    }

    #[test]
    fn lambda_max_matches_eigendecompose() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let g = random_connected_graph(&mut rng, 15);
            let (adj, deg) = adjacency_and_degree(&g);
            let lap = laplacian(&adj, &deg, LaplacianMode::Combinatorial).unwrap();
            let exact = *eigendecompose(&lap).unwrap().eigenvalues().last().unwrap();
            let est = estimate_lambda_max(&lap).unwrap();
            assert!(
                (est - exact).abs() / exact <= 1e-3,
                "estimate {est} vs exact {exact}"
            );
        }
    }

    #[test]
    fn normalized_spectrum_bounded_by_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let g = random_connected_graph(&mut rng, 14);
            let (adj, deg) = adjacency_and_degree(&g);
            let lap = laplacian(&adj, &deg, LaplacianMode::Normalized).unwrap();
            let basis = eigendecompose(&lap).unwrap();
            for &l in basis.eigenvalues() {
                assert!(l >= -1e-9 && l <= 2.0 + 1e-9);
            }
        }
    }

    #[test]
    fn literal_mode_differs_from_standard_on_irregular_graphs() {
        let lap_std = lap_of(vec![(0, 1), (1, 2)], 3, LaplacianMode::Normalized);
        let lap_lit = lap_of(vec![(0, 1), (1, 2)], 3, LaplacianMode::NormalizedLiteral);
        assert_ne!(lap_std.matrix().to_dense(), lap_lit.matrix().to_dense());
    }
}

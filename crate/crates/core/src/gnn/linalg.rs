//! Minimal dense row-major matrix kernels for the layer math.

use crate::scalar::Scalar;

/// C = A B for A: m x k, B: k x n.
pub(crate) fn matmul<S: Scalar>(a: &[S], m: usize, k: usize, b: &[S], n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

/// C = A^T B for A: k x m, B: k x n (shared leading dimension k).
pub(crate) fn matmul_at_b<S: Scalar>(a: &[S], k: usize, m: usize, b: &[S], n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![S::zero(); m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = arow[i];
            if av == S::zero() {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

/// C = A B^T for A: m x k, B: n x k.
pub(crate) fn matmul_a_bt<S: Scalar>(a: &[S], m: usize, k: usize, b: &[S], n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = S::zero();
            for p in 0..k {
                acc += arow[p] * brow[p];
            }
            crow[j] = acc;
        }
    }
    c
}

pub(crate) fn add_bias_rows<S: Scalar>(x: &mut [S], bias: &[S]) {
    let n = bias.len();
    for row in x.chunks_mut(n) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub(crate) fn column_sums<S: Scalar>(x: &[S], n: usize) -> Vec<S> {
    let mut out = vec![S::zero(); n];
    for row in x.chunks(n) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

pub(crate) fn relu<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter().map(|&v| v.max(S::zero())).collect()
}

/// d(relu)/dx applied to an upstream gradient: zero where pre <= 0.
pub(crate) fn relu_backward<S: Scalar>(pre: &[S], grad: &[S]) -> Vec<S> {
    pre.iter()
        .zip(grad)
        .map(|(&p, &g)| if p > S::zero() { g } else { S::zero() })
        .collect()
}

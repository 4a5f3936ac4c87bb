//! Small dense linear-algebra helpers shared by the estimators and the RE
//! tooling. Matrices are `nalgebra` column-major `f64` matrices.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `XᵀX / n`.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows().max(1) as f64;
    x.tr_mul(x) / n
}

/// Principal submatrix `G[S, S]`.
pub fn principal(g: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    let s = support.len();
    DMatrix::from_fn(s, s, |i, j| g[(support[i], support[j])])
}

/// Columns `S` of `X`.
pub fn columns(x: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    x.select_columns(support.iter())
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// ascending (and eigenvectors permuted to match).
pub fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigenvalues().min()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigenvalues().max()
}

/// Operator (spectral) norm by power iteration on `XᵀX`, stopped when the
/// relative change of the estimate drops below `tol`.
pub fn op_norm(x: &DMatrix<f64>, tol: f64) -> f64 {
    let d = x.ncols();
    if d == 0 || x.nrows() == 0 {
        return 0.0;
    }
    let xtx = x.tr_mul(x);
    // deterministic start with mass on every coordinate
    let mut v = DVector::from_fn(d, |i, _| 1.0 + (i as f64) * 1e-3);
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..100_000 {
        let w = &xtx * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= tol * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    libm::sqrt(estimate.max(0.0))
}

/// Minimum-norm solution of the symmetric positive semidefinite system
/// `G β = b` through the pseudo-inverse of `G`.
pub fn psd_pinv_solve(g: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (values, vectors) = sym_eigen(g);
    let top = values.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = top * 1e-12 * g.nrows().max(1) as f64;
    let mut out = DVector::zeros(g.nrows());
    for (i, &lam) in values.iter().enumerate() {
        if lam > cutoff && lam > 0.0 {
            let v = vectors.column(i);
            out += v * (v.dot(b) / lam);
        }
    }
    out
}

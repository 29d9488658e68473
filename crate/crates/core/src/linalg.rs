//! Thin row-major wrappers over `faer` for the dense kernels used by the
//! tensor algebra. Every matrix crossing this boundary is a row-major
//! `Vec<C64>` with explicit dimensions.

use faer::{Mat, MatRef};

use crate::{Error, Result, C64};

pub(crate) fn view(data: &[C64], rows: usize, cols: usize) -> MatRef<'_, C64> {
    MatRef::from_row_major_slice(data, rows, cols)
}

pub(crate) fn to_row_major(m: MatRef<'_, C64>) -> Vec<C64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Row-major `a (m x k) * b (k x n)`.
pub(crate) fn matmul(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if k == 0 {
        return vec![C64::new(0.0, 0.0); m * n];
    }
    let c: Mat<C64> = view(a, m, k) * view(b, k, n);
    to_row_major(c.as_ref())
}

/// Thin QR of a row-major `rows x cols` matrix: returns `(q, rank, r)` with
/// `q` of shape `rows x rank` and `r` of shape `rank x cols`, `rank = min(rows, cols)`.
pub(crate) fn qr(data: &[C64], rows: usize, cols: usize) -> (Vec<C64>, usize, Vec<C64>) {
    let a = view(data, rows, cols);
    let qr = a.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let rank = q.ncols();
    (to_row_major(q.as_ref()), rank, to_row_major(r))
}

pub(crate) struct ThinSvd {
    /// `rows x q`, row-major.
    pub u: Vec<C64>,
    /// Non-increasing singular values, length `q = min(rows, cols)`.
    pub s: Vec<f64>,
    /// `q x cols`, row-major: the adjoint of the right singular vectors.
    pub vh: Vec<C64>,
}

pub(crate) fn svd(data: &[C64], rows: usize, cols: usize) -> Result<ThinSvd> {
    let a = view(data, rows, cols);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("SVD of a {rows}x{cols} matrix did not converge: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|x| x.re).collect();
    let u = to_row_major(svd.U());
    let v = svd.V();
    let (cols_v, q) = (v.nrows(), v.ncols());
    let mut vh = Vec::with_capacity(q * cols_v);
    for j in 0..q {
        for i in 0..cols_v {
            vh.push(v[(i, j)].conj());
        }
    }
    Ok(ThinSvd { u, s, vh })
}

/// Number of leading singular values to keep so that the discarded squared
/// weight stays within `budget_sq`. Always keeps at least one.
pub(crate) fn truncation_rank(s: &[f64], budget_sq: f64) -> usize {
    let mut keep = s.len();
    let mut discarded = 0.0;
    while keep > 1 {
        let next = discarded + s[keep - 1] * s[keep - 1];
        if next > budget_sq {
            break;
        }
        discarded = next;
        keep -= 1;
    }
    keep
}

/// `x * p^{-1}` for row-major `x (rows x n)` and square `p (n x n)`.
pub(crate) fn right_solve(x: &[C64], rows: usize, p: &[C64], n: usize) -> Vec<C64> {
    use faer::linalg::solvers::Solve;
    let lu = view(p, n, n).partial_piv_lu();
    let mut lhs = view(x, rows, n).to_owned();
    lu.rsolve_in_place(lhs.as_mut());
    to_row_major(lhs.as_ref())
}

/// Ratio of extreme singular values, `inf` for a singular matrix.
pub(crate) fn condition_number(p: &[C64], n: usize) -> f64 {
    match view(p, n, n).singular_values() {
        Ok(s) if !s.is_empty() => {
            let min = s[s.len() - 1];
            if min == 0.0 {
                f64::INFINITY
            } else {
                s[0] / min
            }
        }
        _ => f64::INFINITY,
    }
}

/// Real symmetric eigen-decomposition: ascending eigenvalues and the first
/// component of each normalized eigenvector.
pub(crate) fn symmetric_eigen_first_components(a: &Mat<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("symmetric eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let u = evd.U();
    let first: Vec<f64> = (0..values.len()).map(|j| u[(0, j)]).collect();
    Ok((values, first))
}

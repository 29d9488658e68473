//! Partial rank-revealing LU pivot selection on a 2-site unfolding.
//!
//! Both variants perform Gaussian elimination with pivots picked greedily
//! by residual magnitude and stop once the next pivot falls below an
//! absolute threshold or the rank cap is reached.

use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

pub(super) struct Pivots {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Largest residual magnitude seen after the last accepted pivot.
    pub error: f64,
}

/// Complete pivoting on a dense row-major `m x n` matrix. Ties resolve to
/// the lowest row, then lowest column.
pub(super) fn full(a: &[C64], m: usize, n: usize, threshold: f64, max_rank: usize) -> Pivots {
    let mut res = a.to_vec();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    loop {
        let (best, at) = argmax(&res);
        let (r, c) = (at / n, at % n);
        if best == 0.0 || (!rows.is_empty() && best <= threshold) || rows.len() == max_rank {
            return Pivots { rows, cols, error: best };
        }
        let p = res[at];
        let col: Vec<C64> = (0..m).map(|i| res[i * n + c]).collect();
        let row: Vec<C64> = res[r * n..(r + 1) * n].iter().map(|x| x / p).collect();
        for (i, &f) in col.iter().enumerate() {
            if f == ZERO {
                continue;
            }
            for (x, y) in res[i * n..(i + 1) * n].iter_mut().zip(&row) {
                *x -= f * y;
            }
        }
        // exact zeros on the eliminated cross
        for i in 0..m {
            res[i * n + c] = ZERO;
        }
        res[r * n..(r + 1) * n].iter_mut().for_each(|x| *x = ZERO);
        rows.push(r);
        cols.push(c);
    }
}

/// Largest magnitude and its first position.
fn argmax(v: &[C64]) -> (f64, usize) {
    let mut best = 0.0;
    let mut at = 0;
    for (i, x) in v.iter().enumerate() {
        let a = x.norm();
        if a > best {
            best = a;
            at = i;
        }
    }
    (best, at)
}

/// Rook pivoting on a matrix available only through row and column queries.
///
/// `row(r)` and `col(c)` return the original (unreduced) entries; residuals
/// are formed from the accumulated cross. `start_col` seeds the first search.
pub(super) fn rook(
    n: usize,
    row: &mut dyn FnMut(usize) -> Vec<C64>,
    col: &mut dyn FnMut(usize) -> Vec<C64>,
    threshold: &dyn Fn() -> f64,
    max_rank: usize,
    start_col: usize,
    max_iters: usize,
) -> Pivots {
    // residual cross factors: A ≈ Σ_k u_k v_k^T with u_k = residual column / pivot
    let mut us: Vec<Vec<C64>> = Vec::new();
    let mut vs: Vec<Vec<C64>> = Vec::new();
    let mut rows: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut c = start_col.min(n - 1);

    let residual_col = |c: usize, raw: Vec<C64>, us: &[Vec<C64>], vs: &[Vec<C64>]| {
        let mut out = raw;
        for (u, v) in us.iter().zip(vs) {
            let f = v[c];
            if f != ZERO {
                out.iter_mut().zip(u).for_each(|(x, y)| *x -= f * y);
            }
        }
        out
    };
    let residual_row = |r: usize, raw: Vec<C64>, us: &[Vec<C64>], vs: &[Vec<C64>]| {
        let mut out = raw;
        for (u, v) in us.iter().zip(vs) {
            let f = u[r];
            if f != ZERO {
                out.iter_mut().zip(v).for_each(|(x, y)| *x -= f * y);
            }
        }
        out
    };

    loop {
        let mut r;
        let mut rres;
        let mut iters = 0;
        loop {
            let cres = residual_col(c, col(c), &us, &vs);
            r = pick(&cres, &rows);
            rres = residual_row(r, row(r), &us, &vs);
            let c_new = pick(&rres, &cols);
            iters += 1;
            if c_new == c || iters >= max_iters {
                c = c_new;
                break;
            }
            c = c_new;
        }
        let p = rres[c];
        let best = p.norm();
        if best == 0.0 || (!rows.is_empty() && best <= threshold()) || rows.len() == max_rank {
            return Pivots { rows, cols, error: best };
        }
        let cres = residual_col(c, col(c), &us, &vs);
        us.push(cres.iter().map(|x| x / p).collect());
        vs.push(rres);
        rows.push(r);
        cols.push(c);
        if cols.len() == n || rows.len() == us[0].len() {
            return Pivots { rows, cols, error: 0.0 };
        }
        // next search starts where the pivot row was largest
        c = pick(vs.last().unwrap(), &cols);
    }
}

/// Index of the largest magnitude outside `exclude`, lowest index on ties.
fn pick(v: &[C64], exclude: &[usize]) -> usize {
    let mut best = -1.0;
    let mut at = 0;
    for (i, x) in v.iter().enumerate() {
        if exclude.contains(&i) {
            continue;
        }
        let a = x.norm();
        if a > best {
            best = a;
            at = i;
        }
    }
    at
}

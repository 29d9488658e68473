//! One-dimensional grids: Gauss–Kronrod quadrature on the frequency axes and
//! Chebyshev–Lobatto collocation on the parameter axes.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Frequency,
    Volatility,
    Spot,
}

impl AxisKind {
    pub fn symbol(self) -> &'static str {
        match self {
            AxisKind::Frequency => "z",
            AxisKind::Volatility => "sigma",
            AxisKind::Spot => "s0",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    pub kind: AxisKind,
    pub asset: usize,
    pub nodes: Vec<f64>,
    /// Quadrature weights, present on frequency axes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl AxisGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.nodes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index and value of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> (usize, f64) {
        let mut best = (0, self.nodes[0]);
        for (i, &v) in self.nodes.iter().enumerate() {
            if (v - x).abs() < (best.1 - x).abs() {
                best = (i, v);
            }
        }
        best
    }

    /// Index of the node equal to `x` within a relative tolerance of
    /// `1e-12` of the axis span, or [`Error::OffGrid`].
    pub fn locate(&self, x: f64) -> Result<usize> {
        let (i, v) = self.nearest(x);
        let span = (self.max() - self.min()).abs().max(f64::MIN_POSITIVE);
        if (v - x).abs() <= 1e-12 * span.max(v.abs()) {
            Ok(i)
        } else {
            Err(Error::OffGrid {
                axis: self.kind.symbol().to_string(),
                asset: self.asset,
                value: x,
                nearest_index: i,
                nearest_value: v,
            })
        }
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Domain("Gauss rule needs at least one node".into()));
    }
    let (a, b) = legendre_recurrence(n);
    golub_welsch(&a[..n], &b[..n])
}

/// `(2n+1)`-point Gauss–Kronrod rule on `[-1, 1]` extending the `n`-point
/// Gauss–Legendre rule; nodes ascending. Exact for polynomials of degree
/// `3n + 1` (`3n + 2` for even `n`).
pub fn gauss_kronrod(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Domain("Gauss rule needs at least one node".into()));
    }
    let (a0, b0) = legendre_recurrence((3 * n).div_ceil(2) + 1);
    let (a, b) = kronrod_jacobi(n, &a0, &b0);
    if b.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::KronrodExtension { n_gauss: n });
    }
    golub_welsch(&a, &b)
}

/// Kronrod rule scaled to `[-r_z, r_z]` as a frequency axis.
pub fn gauss_kronrod_axis(n_gauss: usize, r_z: f64, asset: usize) -> Result<AxisGrid> {
    if !(r_z > 0.0) || !r_z.is_finite() {
        return Err(Error::Domain(format!("frequency range must be positive, got {r_z}")));
    }
    let (x, w) = gauss_kronrod(n_gauss)?;
    Ok(AxisGrid {
        kind: AxisKind::Frequency,
        asset,
        nodes: x.iter().map(|v| v * r_z).collect(),
        weights: Some(w.iter().map(|v| v * r_z).collect()),
    })
}

/// Monic recurrence for Legendre polynomials, `b[0]` holding the total mass.
fn legendre_recurrence(len: usize) -> (Vec<f64>, Vec<f64>) {
    let a = vec![0.0; len];
    let b = (0..len)
        .map(|k| {
            if k == 0 {
                2.0
            } else {
                let k2 = (k * k) as f64;
                k2 / (4.0 * k2 - 1.0)
            }
        })
        .collect();
    (a, b)
}

/// Laurie's construction of the Jacobi matrix of the Kronrod extension.
/// Returns recurrence coefficients of length `2n + 1`.
fn kronrod_jacobi(n: usize, a0: &[f64], b0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; 2 * n + 1];
    let mut b = vec![0.0; 2 * n + 1];
    for k in 0..=(3 * n / 2) {
        a[k] = a0[k];
    }
    for k in 0..=(3 * n).div_ceil(2) {
        b[k] = b0[k];
    }
    let mut s = vec![0.0; n / 2 + 2];
    let mut t = vec![0.0; n / 2 + 2];
    t[1] = b[n + 1];

    for m in 0..n.saturating_sub(1) {
        let mut u = 0.0;
        for k in (0..=(m + 1) / 2).rev() {
            let l = m - k;
            u += (a[k + n + 1] - a[l]) * t[k + 1] + b[k + n + 1] * s[k] - b[l] * s[k + 1];
            s[k + 1] = u;
        }
        std::mem::swap(&mut s, &mut t);
    }

    for j in (0..=n / 2).rev() {
        s[j + 1] = s[j];
    }

    for m in (n - 1)..(2 * n).saturating_sub(2) {
        let mut u = 0.0;
        let mut j = 0;
        for k in (m + 1 - n)..=((m - 1) / 2) {
            let l = m - k;
            j = n - 1 - l;
            u += -(a[k + n + 1] - a[l]) * t[j + 1] - b[k + n + 1] * s[j + 1] + b[l] * s[j + 2];
            s[j + 1] = u;
        }
        let k = (m + 1) / 2;
        if m % 2 == 0 {
            a[k + n + 1] = a[k] + (s[j + 1] - b[k + n + 1] * s[j + 2]) / t[j + 2];
        } else {
            b[k + n + 1] = s[j + 1] / s[j + 2];
        }
        std::mem::swap(&mut s, &mut t);
    }

    a[2 * n] = a[n - 1] - b[2 * n] * s[1] / t[1];
    (a, b)
}

/// Nodes and weights from a symmetric tridiagonal Jacobi matrix.
fn golub_welsch(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.len();
    let j = Mat::from_fn(n, n, |r, c| {
        if r == c {
            a[r]
        } else if r.abs_diff(c) == 1 {
            b[r.max(c)].sqrt()
        } else {
            0.0
        }
    });
    let (nodes, first) = linalg::symmetric_eigen_first_components(&j)?;
    let weights = first.iter().map(|v| b[0] * v * v).collect();
    Ok((nodes, weights))
}

/// Chebyshev–Lobatto points `cos(π k / (n-1))`, `k = 0..n`, descending from 1.
pub fn chebyshev_lobatto_nodes(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain(format!("Chebyshev grid needs at least 2 points, got {n}")));
    }
    let m = (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            // sin form keeps the middle node exactly at zero
            (PI * (m - 2.0 * k as f64) / (2.0 * m)).sin()
        })
        .collect())
}

pub fn chebyshev_lobatto_axis(
    kind: AxisKind,
    asset: usize,
    n: usize,
    min: f64,
    max: f64,
) -> Result<AxisGrid> {
    if !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::Domain(format!("invalid interval [{min}, {max}]")));
    }
    let mid = 0.5 * (max + min);
    let half = 0.5 * (max - min);
    let nodes = chebyshev_lobatto_nodes(n)?.iter().map(|l| mid + half * l).collect();
    Ok(AxisGrid { kind, asset, nodes, weights: None })
}

/// Collocation differentiation matrix on Chebyshev–Lobatto nodes of
/// `[min, max]`, ordered like [`chebyshev_lobatto_nodes`].
pub fn chebyshev_diff_matrix(n: usize, min: f64, max: f64) -> Result<Mat<f64>> {
    if !(max > min) {
        return Err(Error::Domain(format!("invalid interval [{min}, {max}]")));
    }
    let x = chebyshev_lobatto_nodes(n)?;
    let m = (n - 1) as f64;
    let theta = |k: usize| PI * k as f64 / m;
    let c = |k: usize| if k == 0 || k == n - 1 { 2.0 } else { 1.0 };
    let corner = (2.0 * m * m + 1.0) / 6.0;
    let scale = 2.0 / (max - min);
    Ok(Mat::from_fn(n, n, |i, j| {
        let d = if i == j {
            if i == 0 {
                corner
            } else if i == n - 1 {
                -corner
            } else {
                let s = theta(i).sin();
                -x[i] / (2.0 * s * s)
            }
        } else {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let diff = -2.0 * (0.5 * (theta(i) + theta(j))).sin() * (0.5 * (theta(i) - theta(j))).sin();
            c(i) / c(j) * sign / diff
        };
        scale * d
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_15_matches_reference_table() {
        let (x, w) = gauss_kronrod(7).unwrap();
        assert_eq!(x.len(), 15);
        let xgk = [
            0.991455371120813,
            0.949107912342759,
            0.864864423359769,
            0.741531185599394,
            0.586087235467691,
            0.405845151377397,
            0.207784955007898,
            0.0,
        ];
        let wgk = [
            0.022935322010529,
            0.063092092629979,
            0.104790010322250,
            0.140653259715525,
            0.169004726639267,
            0.190350578064785,
            0.204432940075298,
            0.209482141084728,
        ];
        for i in 0..8 {
            // ascending order: node i is -xgk[i]
            assert!((x[i] + xgk[i]).abs() < 1e-14, "node {i}: {}", x[i]);
            assert!((x[14 - i] - xgk[i]).abs() < 1e-14);
            assert!((w[i] - wgk[i]).abs() < 1e-14, "weight {i}: {}", w[i]);
            assert!((w[14 - i] - wgk[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn kronrod_embeds_gauss_nodes() {
        for n in [1, 2, 5, 8, 15, 63] {
            let (g, _) = gauss_legendre(n).unwrap();
            let (k, _) = gauss_kronrod(n).unwrap();
            assert_eq!(k.len(), 2 * n + 1);
            for (i, gx) in g.iter().enumerate() {
                assert!((k[2 * i + 1] - gx).abs() < 1e-13, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn gauss_legendre_three_point() {
        let (x, w) = gauss_legendre(3).unwrap();
        let r = (0.6f64).sqrt();
        assert!((x[0] + r).abs() < 1e-15 && x[1].abs() < 1e-15 && (x[2] - r).abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-15 && (w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn lobatto_nodes_and_mapping() {
        let g = chebyshev_lobatto_axis(AxisKind::Spot, 0, 5, 90.0, 120.0).unwrap();
        assert_eq!(g.nodes[0], 120.0);
        assert_eq!(g.nodes[4], 90.0);
        assert_eq!(g.nodes[2], 105.0);
        assert!((g.nodes[1] - (105.0 + 15.0 * (PI / 4.0).cos())).abs() < 1e-12);
        assert_eq!(g.locate(105.0).unwrap(), 2);
        match g.locate(96.0) {
            Err(Error::OffGrid { nearest_index, .. }) => assert_eq!(nearest_index, 3),
            other => panic!("expected off-grid error, got {other:?}"),
        }
        assert!(chebyshev_lobatto_nodes(1).is_err());
    }

    #[test]
    fn diff_matrix_two_points() {
        // nodes [1, -1]: D = [[1/2, -1/2], [1/2, -1/2]]
        let d = chebyshev_diff_matrix(2, -1.0, 1.0).unwrap();
        assert!((d[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((d[(0, 1)] + 0.5).abs() < 1e-15);
        assert!((d[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((d[(1, 1)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn kronrod_axis_scales_weights() {
        let g = gauss_kronrod_axis(7, 25.0, 1).unwrap();
        let total: f64 = g.weights.as_ref().unwrap().iter().sum();
        assert!((total - 50.0).abs() < 1e-12);
        assert!(gauss_kronrod_axis(7, -1.0, 0).is_err());
    }
}

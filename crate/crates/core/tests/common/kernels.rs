//! Kernel checks shared by the property suites and the acceptance run.
//! Each returns `Err` with a description on the first violation.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttgreeks::grids::{chebyshev_diff_matrix, chebyshev_lobatto_axis, gauss_kronrod_axis, AxisKind};
use ttgreeks::mc::{self, McConfig};
use ttgreeks::model::{CorrelationFixture, ModelSpec};
use ttgreeks::pipeline::Greek;
use ttgreeks::tci::{tci_learn, BlackBoxTensor, TciConfig};
use ttgreeks::tensor::{Core, TensorTrain};

pub type Check = Result<(), String>;

pub fn random_train(dims: &[usize], bonds: &[usize], seed: u64) -> TensorTrain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.len();
    let cores = (0..n)
        .map(|i| {
            let l = if i == 0 { 1 } else { bonds[i - 1] };
            let r = if i + 1 == n { 1 } else { bonds[i] };
            let data = (0..l * dims[i] * r)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            Core::new(l, dims[i], r, data).unwrap()
        })
        .collect();
    TensorTrain::new(cores).unwrap()
}

/// Dense expansion by plain left-to-right contraction of the core data.
pub fn dense(tt: &TensorTrain) -> Vec<C64> {
    let mut acc = vec![C64::new(1.0, 0.0)];
    let mut rows = 1;
    for core in tt.cores() {
        let (l, s, r) = core.shape();
        let mut next = vec![C64::new(0.0, 0.0); rows * s * r];
        for row in 0..rows {
            for a in 0..l {
                let x = acc[row * l + a];
                for si in 0..s {
                    for b in 0..r {
                        next[(row * s + si) * r + b] += x * core.get(a, si, b);
                    }
                }
            }
        }
        acc = next;
        rows *= s;
    }
    acc
}

/// Relative squared Frobenius error after truncation stays below `eps`.
pub fn svd_bound(dims: &[usize], bonds: &[usize], seed: u64, eps: f64) -> Check {
    let tt = random_train(dims, bonds, seed);
    let cut = tt.svd_truncate(eps).map_err(|e| e.to_string())?;
    let (a, b) = (dense(&tt), dense(&cut));
    let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let rel = num / den;
    if rel <= eps * (1.0 + 1e-9) + 1e-26 {
        Ok(())
    } else {
        Err(format!("dims {dims:?} bonds {bonds:?} eps {eps:e}: relative squared error {rel:e}"))
    }
}

/// TCI of `Σ_r Π_i f_{r,i}(x_i)` with rank 1 or 2 reproduces every entry.
pub fn tci_low_rank(dims: &[usize], rank: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<Vec<Vec<f64>>> = (0..rank)
        .map(|_| dims.iter().map(|&n| (0..n).map(|_| rng.random_range(0.5..1.5)).collect()).collect())
        .collect();
    let signs: Vec<f64> = (0..rank).map(|r| if r % 2 == 0 { 1.0 } else { -0.5 }).collect();
    let value = |idx: &[usize]| -> f64 {
        (0..rank)
            .map(|r| signs[r] * idx.iter().enumerate().map(|(i, &x)| factors[r][i][x]).product::<f64>())
            .sum()
    };
    let f = BlackBoxTensor::new(dims.to_vec(), |idx: &[usize]| C64::new(value(idx), 0.0));
    let (tt, diag) = tci_learn(&f, &TciConfig::with_tol(1e-12)).map_err(|e| e.to_string())?;
    if tt.max_bond() > rank {
        return Err(format!("rank {rank} tensor learned with bonds {:?}", tt.bond_dims()));
    }
    let all = dense(&tt);
    let scale = diag.max_abs_sample;
    let mut idx = vec![0usize; dims.len()];
    for (flat, got) in all.iter().enumerate() {
        let mut rem = flat;
        for i in (0..dims.len()).rev() {
            idx[i] = rem % dims[i];
            rem /= dims[i];
        }
        let want = value(&idx);
        if (got.re - want).abs() > 1e-10 * scale || got.im.abs() > 1e-10 * scale {
            return Err(format!("rank {rank} dims {dims:?}: entry {idx:?} = {got} vs {want}"));
        }
    }
    Ok(())
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_deriv(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
}

/// The differentiation matrix on `n` Lobatto nodes in `[lo, hi]` is exact
/// for polynomials of degree below `n`. Polynomials are in the centred
/// variable `t = (x − mid)/half` to keep the check well conditioned.
pub fn chebyshev_exact(n: usize, coeffs: &[f64], lo: f64, hi: f64) -> Check {
    assert!(coeffs.len() <= n);
    let axis = chebyshev_lobatto_axis(AxisKind::Spot, 0, n, lo, hi).map_err(|e| e.to_string())?;
    let dm = chebyshev_diff_matrix(n, lo, hi).map_err(|e| e.to_string())?;
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let vals: Vec<f64> = axis.nodes.iter().map(|&x| poly(coeffs, (x - mid) / half)).collect();
    let scale = coeffs.iter().enumerate().map(|(k, c)| c.abs() * k.max(1) as f64).sum::<f64>() / half;
    for (i, &x) in axis.nodes.iter().enumerate() {
        let got: f64 = (0..n).map(|j| dm[(i, j)] * vals[j]).sum();
        let want = poly_deriv(coeffs, (x - mid) / half) / half;
        if (got - want).abs() > 1e-9 * scale.max(1e-300) * (n * n) as f64 {
            return Err(format!("n {n} node {i}: {got} vs {want}"));
        }
    }
    Ok(())
}

/// The Kronrod rule with `2n+1` nodes integrates polynomials of degree
/// `3n+1` exactly on `[-r, r]`.
pub fn kronrod_exact(n: usize, coeffs: &[f64], r: f64) -> Check {
    assert!(coeffs.len() <= 3 * n + 2);
    let axis = gauss_kronrod_axis(n, r, 0).map_err(|e| e.to_string())?;
    let w = axis.weights.as_ref().ok_or("no weights")?;
    // again in t = x / r so that each monomial integrates to O(1)
    let got: f64 = axis.nodes.iter().zip(w).map(|(&x, &wi)| wi * poly(coeffs, x / r)).sum::<f64>() / r;
    let want: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| if k % 2 == 0 { 2.0 * c / (k + 1) as f64 } else { 0.0 })
        .sum();
    let scale: f64 = coeffs.iter().map(|c| c.abs()).sum();
    if (got - want).abs() <= 1e-12 * scale.max(1.0) {
        Ok(())
    } else {
        Err(format!("n {n}: {got} vs {want}"))
    }
}

pub fn mc_spec(d: usize) -> ModelSpec {
    let corr = CorrelationFixture::Const.matrix(d).unwrap();
    ModelSpec::new(1.0, 0.01, 100.0, corr, [0.15, 0.25], [90.0, 120.0]).unwrap()
}

/// Discounted spot means match `S⁰` within 3 standard errors and the
/// log-return covariance matches `σσρT` within `5/√n` relative.
pub fn mc_martingale_and_covariance(d: usize, n_paths: usize, seed: u64) -> Check {
    let spec = mc_spec(d);
    let sigma: Vec<f64> = (0..d).map(|m| 0.15 + 0.05 * m as f64).collect();
    let s0: Vec<f64> = (0..d).map(|m| 95.0 + 10.0 * m as f64).collect();
    let cfg = McConfig::with_paths(n_paths, seed);
    let (means, cov) = mc::sample_statistics(&spec, &sigma, &s0, &cfg).map_err(|e| e.to_string())?;
    for m in 0..d {
        if (means[m].value - s0[m]).abs() > 3.0 * means[m].std_error {
            return Err(format!("asset {m}: discounted mean {:?} vs {}", means[m], s0[m]));
        }
    }
    let tol = 5.0 / (n_paths as f64).sqrt();
    for i in 0..d {
        for j in 0..d {
            let want = sigma[i] * sigma[j] * spec.rho(i, j) * spec.maturity;
            let scale = sigma[i] * sigma[j] * spec.maturity;
            if (cov[i * d + j] - want).abs() > tol * scale {
                return Err(format!("covariance ({i},{j}) {} vs {want}", cov[i * d + j]));
            }
        }
    }
    Ok(())
}

/// Malliavin and common-seed finite-difference Greeks agree within three
/// combined standard errors.
pub fn mv_matches_fd(n_paths: usize, seed: u64) -> Check {
    let spec = mc_spec(2);
    let (sigma, s0) = ([0.2, 0.18], [100.0, 105.0]);
    let cfg = McConfig::with_paths(n_paths, seed);
    let mv = mc::mv_all(&spec, &sigma, &s0, &cfg).map_err(|e| e.to_string())?;
    for kappa in 0..2 {
        for g in Greek::ALL {
            let a = mv.get(g, kappa);
            let b = mc::mc_greek_fd(&spec, &sigma, &s0, &McConfig { seed: seed.wrapping_add(1), ..cfg.clone() }, g, kappa)
                .map_err(|e| e.to_string())?;
            let band = 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            if (a.value - b.value).abs() > band {
                return Err(format!("{} asset {kappa}: MV {a:?} vs FD {b:?}", g.name()));
            }
        }
    }
    Ok(())
}

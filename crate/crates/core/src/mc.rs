//! Monte Carlo reference values for the min-call option: plain pricing,
//! fixed-seed central finite differences and Malliavin-weight Greeks.
//!
//! Paths are drawn in batches. Batch `b` uses a ChaCha8 generator seeded
//! with `cfg.seed` on stream `b`, so results do not depend on the
//! execution policy or the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::model::{cholesky, ModelSpec};
use crate::pipeline::Greek;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Finite-difference step in σ.
    pub h_vega: f64,
    /// Finite-difference step in S⁰.
    pub h_spot: f64,
    pub batch_size: usize,
    pub execution: Execution,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            seed: 0x5eed,
            h_vega: 0.001,
            h_spot: 0.3,
            batch_size: 1 << 16,
            execution: Execution::default(),
        }
    }
}

impl McConfig {
    pub fn with_paths(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.batch_size == 0 {
            return Err(Error::Config("path and batch counts must be at least 1".into()));
        }
        if !(self.h_vega > 0.0 && self.h_spot > 0.0) {
            return Err(Error::Config("finite-difference steps must be positive".into()));
        }
        Ok(())
    }
}

/// Sample mean with its standard error `σ̂ / √n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Operation count charged to a simulation: one exponential per asset and
/// path.
pub fn mc_cost(d: usize, n_paths: usize) -> u64 {
    (d * n_paths) as u64
}

/// `G = B R` with `B = diag(σ)` and `ρ = R Rᵀ`, plus `G⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct MalliavinContext {
    pub d: usize,
    /// Lower Cholesky factor of ρ, row-major.
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
}

impl MalliavinContext {
    pub fn new(spec: &ModelSpec, sigma: &[f64]) -> Result<Self> {
        let d = spec.d;
        let r = cholesky(&spec.correlation, d)?;
        let g: Vec<f64> = (0..d * d).map(|k| sigma[k / d] * r[k]).collect();
        // forward substitution on the lower-triangular G, one column at a time
        let mut g_inv = vec![0.0; d * d];
        for c in 0..d {
            for i in 0..d {
                let mut acc = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    acc -= g[i * d + k] * g_inv[k * d + c];
                }
                let diag = g[i * d + i];
                if diag == 0.0 || !diag.is_finite() {
                    return Err(Error::Linalg("volatility matrix G is singular".into()));
                }
                g_inv[i * d + c] = acc / diag;
            }
        }
        Ok(Self { d, r, g, g_inv })
    }

    /// `θ = Σ_i (G⁻¹)_{iκ} U^i`.
    fn theta(&self, kappa: usize, u: &[f64]) -> f64 {
        (0..self.d).map(|i| self.g_inv[i * self.d + kappa] * u[i]).sum()
    }

    /// `Σ_k (G⁻¹)²_{kκ}`.
    fn g_inv_col_sq(&self, kappa: usize) -> f64 {
        (0..self.d).map(|k| self.g_inv[k * self.d + kappa].powi(2)).sum()
    }
}

/// Welford accumulator for several estimators fed from the same paths.
#[derive(Clone, Debug)]
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self { n: 0, mean: vec![0.0; k], m2: vec![0.0; k] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.n += other.n;
    }

    fn estimate(&self, i: usize, scale: f64) -> McEstimate {
        let var = if self.n > 1 { self.m2[i] / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            value: scale * self.mean[i],
            std_error: scale.abs() * (var.max(0.0) / self.n as f64).sqrt(),
            n_paths: self.n,
        }
    }
}

fn check_inputs(spec: &ModelSpec, sigma: &[f64], s0: &[f64]) -> Result<()> {
    spec.validate()?;
    if sigma.len() != spec.d || s0.len() != spec.d {
        return Err(Error::Structure(format!(
            "expected {} volatilities and spots, got {} and {}",
            spec.d,
            sigma.len(),
            s0.len()
        )));
    }
    if sigma.iter().chain(s0).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("volatilities and spots must be positive and finite".into()));
    }
    Ok(())
}

/// Runs `cfg.n_paths` standard normal draws `ξ ∈ ℝ^d` through `f`, which
/// writes `k` per-path samples into its output slice.
fn simulate<F>(d: usize, k: usize, cfg: &McConfig, f: F) -> Result<Moments>
where
    F: Fn(&[f64], &mut [f64]) + Sync + Send,
{
    cfg.validate()?;
    let batches = cfg.n_paths.div_ceil(cfg.batch_size);
    let parts = cfg.execution.map_collect(batches, |b| {
        let count = cfg.batch_size.min(cfg.n_paths - b * cfg.batch_size);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b as u64);
        let mut xi = vec![0.0; d];
        let mut out = vec![0.0; k];
        let mut acc = Moments::new(k);
        for _ in 0..count {
            for x in xi.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            f(&xi, &mut out);
            acc.push(&out);
        }
        acc
    });
    let mut total = Moments::new(k);
    for p in &parts {
        total.merge(p);
    }
    if total.mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Monte Carlo sample mean".into()));
    }
    Ok(total)
}

/// Terminal log-prices `x = ln S⁰ + (r − σ²/2) T + σ (R W)` for `W = √T ξ`,
/// also returning `U = W`.
fn terminal(
    spec: &ModelSpec,
    r: &[f64],
    sigma: &[f64],
    s0: &[f64],
    xi: &[f64],
    x: &mut [f64],
    u: &mut [f64],
) {
    let d = spec.d;
    let sqrt_t = spec.maturity.sqrt();
    for (ui, &z) in u.iter_mut().zip(xi) {
        *ui = sqrt_t * z;
    }
    for m in 0..d {
        let rw: f64 = (0..=m).map(|k| r[m * d + k] * u[k]).sum();
        x[m] = s0[m].ln() + (spec.rate - 0.5 * sigma[m] * sigma[m]) * spec.maturity + sigma[m] * rw;
    }
}

fn min_call(strike: f64, x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::INFINITY, f64::min);
    (m.exp() - strike).max(0.0)
}

/// Discounted mean payoff.
pub fn mc_price(spec: &ModelSpec, sigma: &[f64], s0: &[f64], cfg: &McConfig) -> Result<McEstimate> {
    check_inputs(spec, sigma, s0)?;
    let d = spec.d;
    let r = cholesky(&spec.correlation, d)?;
    let m = simulate(d, 1, cfg, |xi, out| {
        let (mut x, mut u) = (vec![0.0; d], vec![0.0; d]);
        terminal(spec, &r, sigma, s0, xi, &mut x, &mut u);
        out[0] = min_call(spec.strike, &x);
    })?;
    Ok(m.estimate(0, (-spec.rate * spec.maturity).exp()))
}

/// Central finite difference in `σ_κ` (vega) or `S⁰_κ` (delta, gamma) with
/// the same normal draws for every shifted run. The bias is `O(h²)`.
pub fn mc_greek_fd(
    spec: &ModelSpec,
    sigma: &[f64],
    s0: &[f64],
    cfg: &McConfig,
    greek: Greek,
    kappa: usize,
) -> Result<McEstimate> {
    check_inputs(spec, sigma, s0)?;
    check_kappa(spec, kappa)?;
    let d = spec.d;
    let h = if greek == Greek::Vega { cfg.h_vega } else { cfg.h_spot };
    if greek == Greek::Gamma && h < 1e-4 * s0[kappa] {
        log::warn!("gamma step {h:e} is tiny relative to S0 = {}; variance grows like 1/h", s0[kappa]);
    }
    let base = if greek == Greek::Vega { sigma[kappa] } else { s0[kappa] };
    if base - h <= 0.0 {
        return Err(Error::Config(format!("finite-difference step {h} reaches a non-positive parameter")));
    }
    let r = cholesky(&spec.correlation, d)?;
    let payoff_at = |shift: f64, xi: &[f64]| {
        let (mut sg, mut sp) = (sigma.to_vec(), s0.to_vec());
        if greek == Greek::Vega {
            sg[kappa] += shift;
        } else {
            sp[kappa] += shift;
        }
        let (mut x, mut u) = (vec![0.0; d], vec![0.0; d]);
        terminal(spec, &r, &sg, &sp, xi, &mut x, &mut u);
        min_call(spec.strike, &x)
    };
    let m = simulate(d, 1, cfg, |xi, out| {
        let (up, down) = (payoff_at(h, xi), payoff_at(-h, xi));
        out[0] = match greek {
            Greek::Vega | Greek::Delta => (up - down) / (2.0 * h),
            Greek::Gamma => (up - 2.0 * payoff_at(0.0, xi) + down) / (h * h),
        };
    })?;
    Ok(m.estimate(0, (-spec.rate * spec.maturity).exp()))
}

/// The same finite difference built from separately seeded runs
/// (`seed`, `seed + 1`, `seed + 2`), for comparison with the common-seed
/// estimator.
pub fn mc_greek_fd_independent(
    spec: &ModelSpec,
    sigma: &[f64],
    s0: &[f64],
    cfg: &McConfig,
    greek: Greek,
    kappa: usize,
) -> Result<McEstimate> {
    check_kappa(spec, kappa)?;
    let h = if greek == Greek::Vega { cfg.h_vega } else { cfg.h_spot };
    let run = |shift: f64, seed: u64| {
        let (mut sg, mut sp) = (sigma.to_vec(), s0.to_vec());
        if greek == Greek::Vega {
            sg[kappa] += shift;
        } else {
            sp[kappa] += shift;
        }
        mc_price(spec, &sg, &sp, &McConfig { seed, ..cfg.clone() })
    };
    let up = run(h, cfg.seed)?;
    let down = run(-h, cfg.seed.wrapping_add(1))?;
    let (value, var) = match greek {
        Greek::Vega | Greek::Delta => {
            ((up.value - down.value) / (2.0 * h), (up.std_error.powi(2) + down.std_error.powi(2)) / (4.0 * h * h))
        }
        Greek::Gamma => {
            let mid = run(0.0, cfg.seed.wrapping_add(2))?;
            (
                (up.value - 2.0 * mid.value + down.value) / (h * h),
                (up.std_error.powi(2) + 4.0 * mid.std_error.powi(2) + down.std_error.powi(2)) / h.powi(4),
            )
        }
    };
    Ok(McEstimate { value, std_error: var.sqrt(), n_paths: up.n_paths })
}

/// Malliavin-weight estimator of one Greek.
pub fn mv_greek(
    spec: &ModelSpec,
    sigma: &[f64],
    s0: &[f64],
    cfg: &McConfig,
    greek: Greek,
    kappa: usize,
) -> Result<McEstimate> {
    check_kappa(spec, kappa)?;
    let all = mv_all(spec, sigma, s0, cfg)?;
    Ok(all.get(greek, kappa))
}

/// Price and every Malliavin Greek from one set of paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McGreeks {
    pub price: McEstimate,
    pub vega: Vec<McEstimate>,
    pub delta: Vec<McEstimate>,
    pub gamma: Vec<McEstimate>,
}

impl McGreeks {
    pub fn get(&self, greek: Greek, kappa: usize) -> McEstimate {
        match greek {
            Greek::Vega => self.vega[kappa],
            Greek::Delta => self.delta[kappa],
            Greek::Gamma => self.gamma[kappa],
        }
    }
}

/// Per path, with `θ_κ = Σ_i (G⁻¹)_{iκ} U^i`:
/// - delta weight `θ_κ / (T S⁰_κ)`;
/// - gamma weight `(θ_κ² − T Σ_k (G⁻¹)²_{kκ} − T θ_κ) / (T S⁰_κ)²`;
/// - vega weight `θ_κ ((R U)_κ / T − σ_κ) − 1/σ_κ`.
///
/// The vega weight is derived by Gaussian integration by parts for a
/// general `κ`; for `κ = 0` it coincides with `(G_κκ/σ_κ) ζ`.
pub fn mv_all(spec: &ModelSpec, sigma: &[f64], s0: &[f64], cfg: &McConfig) -> Result<McGreeks> {
    check_inputs(spec, sigma, s0)?;
    let d = spec.d;
    let ctx = MalliavinContext::new(spec, sigma)?;
    let t = spec.maturity;
    let col_sq: Vec<f64> = (0..d).map(|k| ctx.g_inv_col_sq(k)).collect();
    let m = simulate(d, 1 + 3 * d, cfg, |xi, out| {
        let (mut x, mut u) = (vec![0.0; d], vec![0.0; d]);
        terminal(spec, &ctx.r, sigma, s0, xi, &mut x, &mut u);
        let v = min_call(spec.strike, &x);
        out[0] = v;
        for k in 0..d {
            if v == 0.0 {
                out[1 + k] = 0.0;
                out[1 + d + k] = 0.0;
                out[1 + 2 * d + k] = 0.0;
                continue;
            }
            let theta = ctx.theta(k, &u);
            let ru: f64 = (0..=k).map(|j| ctx.r[k * d + j] * u[j]).sum();
            out[1 + k] = v * (theta * (ru / t - sigma[k]) - 1.0 / sigma[k]);
            out[1 + d + k] = v * theta / (t * s0[k]);
            out[1 + 2 * d + k] =
                v * (theta * theta - t * col_sq[k] - t * theta) / (t * s0[k]).powi(2);
        }
    })?;
    let disc = (-spec.rate * t).exp();
    Ok(McGreeks {
        price: m.estimate(0, disc),
        vega: (0..d).map(|k| m.estimate(1 + k, disc)).collect(),
        delta: (0..d).map(|k| m.estimate(1 + d + k, disc)).collect(),
        gamma: (0..d).map(|k| m.estimate(1 + 2 * d + k, disc)).collect(),
    })
}

fn check_kappa(spec: &ModelSpec, kappa: usize) -> Result<()> {
    if kappa >= spec.d {
        return Err(Error::Config(format!("asset index {kappa} out of range for {} assets", spec.d)));
    }
    Ok(())
}

/// Discounted sample means of `S_m(T)` and the sample covariance of the
/// log-returns, for sampler checks.
pub fn sample_statistics(
    spec: &ModelSpec,
    sigma: &[f64],
    s0: &[f64],
    cfg: &McConfig,
) -> Result<(Vec<McEstimate>, Vec<f64>)> {
    check_inputs(spec, sigma, s0)?;
    let d = spec.d;
    let r = cholesky(&spec.correlation, d)?;
    // outputs: d discounted prices, d log-returns, d² products of log-returns
    let m = simulate(d, 2 * d + d * d, cfg, |xi, out| {
        let (mut x, mut u) = (vec![0.0; d], vec![0.0; d]);
        terminal(spec, &r, sigma, s0, xi, &mut x, &mut u);
        for i in 0..d {
            out[i] = x[i].exp();
            out[d + i] = x[i] - s0[i].ln();
        }
        for i in 0..d {
            for j in 0..d {
                out[2 * d + i * d + j] = out[d + i] * out[d + j];
            }
        }
    })?;
    let disc = (-spec.rate * spec.maturity).exp();
    let means = (0..d).map(|i| m.estimate(i, disc)).collect();
    let cov = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d, k % d);
            m.mean[2 * d + k] - m.mean[d + i] * m.mean[d + j]
        })
        .collect();
    Ok((means, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CorrelationFixture;

    fn spec(d: usize) -> ModelSpec {
        let corr = CorrelationFixture::Const.matrix(d).unwrap();
        ModelSpec::new(1.0, 0.01, 100.0, corr, [0.1, 0.4], [80.0, 120.0]).unwrap()
    }

    #[test]
    fn same_seed_is_bit_identical_across_policies() {
        let s = spec(2);
        let cfg = McConfig { n_paths: 20_000, batch_size: 3000, ..McConfig::with_paths(0, 7) };
        let a = mc_price(&s, &[0.2, 0.3], &[100.0, 105.0], &cfg).unwrap();
        let b = mc_price(&s, &[0.2, 0.3], &[100.0, 105.0], &cfg).unwrap();
        let c = mc_price(
            &s,
            &[0.2, 0.3],
            &[100.0, 105.0],
            &McConfig { execution: Execution::Sequential, ..cfg.clone() },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let other = mc_price(&s, &[0.2, 0.3], &[100.0, 105.0], &McConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.value, other.value);
    }

    #[test]
    fn vanishing_volatility_is_deterministic() {
        let s = spec(2);
        let cfg = McConfig::with_paths(1000, 1);
        let est = mc_price(&s, &[1e-8, 1e-8], &[110.0, 120.0], &cfg).unwrap();
        let want = (-0.01f64).exp() * (110.0 * 0.01f64.exp() - 100.0);
        assert!((est.value - want).abs() < 1e-5, "{} vs {want}", est.value);
        assert!(est.std_error < 1e-5);
    }

    #[test]
    fn worthless_option_has_zero_greeks() {
        let mut s = spec(2);
        s.strike = 1e12;
        let g = mv_all(&s, &[0.2, 0.2], &[100.0, 100.0], &McConfig::with_paths(5000, 3)).unwrap();
        for e in [g.price, g.vega[1], g.delta[0], g.gamma[1]] {
            assert_eq!((e.value, e.std_error), (0.0, 0.0));
        }
    }

    #[test]
    fn malliavin_context_reproduces_covariance() {
        let s = spec(3);
        let sigma = [0.2, 0.3, 0.25];
        let ctx = MalliavinContext::new(&s, &sigma).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let ggt: f64 = (0..3).map(|k| ctx.g[i * 3 + k] * ctx.g[j * 3 + k]).sum();
                assert!((ggt - sigma[i] * sigma[j] * s.rho(i, j)).abs() <= 1e-12);
                let id: f64 = (0..3).map(|k| ctx.g[i * 3 + k] * ctx.g_inv[k * 3 + j]).sum();
                assert!((id - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-12);
                if j > i {
                    assert_eq!(ctx.r[i * 3 + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let s = spec(1);
        for cfg in [
            McConfig { n_paths: 0, ..McConfig::default() },
            McConfig { h_spot: 0.0, ..McConfig::default() },
        ] {
            assert!(matches!(mc_price(&s, &[0.2], &[100.0], &cfg), Err(Error::Config(_))));
        }
        let cfg = McConfig::with_paths(10, 0);
        assert!(mc_greek_fd(&s, &[0.2], &[100.0], &cfg, Greek::Delta, 1).is_err());
        assert!(mc_price(&s, &[0.2, 0.2], &[100.0], &cfg).is_err());
    }
}

//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod kernels;

use num_complex::Complex64 as C64;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use ttgreeks::model::ModelSpec;
use ttgreeks::pipeline::{Greek, Grids};

/// Black–Scholes call: price, delta, gamma, vega.
#[derive(Clone, Copy, Debug)]
pub struct BsCall {
    pub price: f64,
    pub delta: f64,
    pub gamma: f64,
    pub vega: f64,
}

pub fn bs_call(s: f64, k: f64, r: f64, t: f64, sigma: f64) -> BsCall {
    let n = Normal::standard();
    let sq = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / sq;
    let d2 = d1 - sq;
    BsCall {
        price: s * n.cdf(d1) - k * (-r * t).exp() * n.cdf(d2),
        delta: n.cdf(d1),
        gamma: n.pdf(d1) / (s * sq),
        vega: s * n.pdf(d1) * t.sqrt(),
    }
}

impl BsCall {
    pub fn get(&self, g: Option<Greek>) -> f64 {
        match g {
            None => self.price,
            Some(Greek::Vega) => self.vega,
            Some(Greek::Delta) => self.delta,
            Some(Greek::Gamma) => self.gamma,
        }
    }
}

/// Nested Gauss–Kronrod sum of `e^{-rT}/(2π)^d Σ_j Π w_j · ∂φ(−z−iα) · ṽ(z+iα)`
/// at the given node indices (per original asset), where `∂` is the
/// requested parameter derivative of the characteristic function.
pub fn dense_quadrature(
    spec: &ModelSpec,
    grids: &Grids,
    idx: &[(usize, usize)],
    greek: Option<(Greek, usize)>,
) -> f64 {
    let d = spec.d;
    let t = spec.maturity;
    let i = C64::new(0.0, 1.0);
    let sigma: Vec<f64> = (0..d).map(|m| grids.sigma[m].nodes[idx[m].0]).collect();
    let s0: Vec<f64> = (0..d).map(|m| grids.spot[m].nodes[idx[m].1]).collect();
    let n: Vec<usize> = grids.z.iter().map(|g| g.len()).collect();
    let total: usize = n.iter().product();
    let mut acc = C64::new(0.0, 0.0);
    let mut u = vec![C64::new(0.0, 0.0); d];
    let mut w = vec![C64::new(0.0, 0.0); d];
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for m in (0..d).rev() {
            let j = rem % n[m];
            rem /= n[m];
            w[m] = C64::new(grids.z[m].nodes[j], spec.alpha[m]);
            u[m] = -w[m];
            weight *= grids.z[m].weights.as_ref().unwrap()[j];
        }
        // exponent = i uᵀμ − T/2 uᵀ Σ u with Σ_mk = σ_m σ_k ρ_mk
        let mut e = C64::new(0.0, 0.0);
        for m in 0..d {
            e += i * u[m] * (s0[m].ln() + (spec.rate - 0.5 * sigma[m] * sigma[m]) * t);
            for k in 0..d {
                e -= 0.5 * t * u[m] * u[k] * sigma[m] * sigma[k] * spec.rho(m, k);
            }
        }
        let phi = e.exp();
        let factor = match greek {
            None => C64::new(1.0, 0.0),
            Some((Greek::Vega, k)) => {
                // ∂e/∂σ_k
                let mut de = -i * u[k] * sigma[k] * t;
                for m in 0..d {
                    de -= t * u[k] * u[m] * sigma[m] * spec.rho(k, m);
                }
                de
            }
            Some((Greek::Delta, k)) => i * u[k] / s0[k],
            Some((Greek::Gamma, k)) => {
                let de = i * u[k] / s0[k];
                de * de - i * u[k] / (s0[k] * s0[k])
            }
        };
        // min-call transform −K^{1+iΣw} / ((−1)^d (1+iΣw) Π i w_m)
        let sw: C64 = w.iter().sum();
        let a = 1.0 + i * sw;
        let mut den = a * if d % 2 == 0 { 1.0 } else { -1.0 };
        for wm in &w {
            den *= i * wm;
        }
        let payoff = -(a * spec.strike.ln()).exp() / den;
        acc += weight * factor * phi * payoff;
    }
    (acc * (-spec.rate * t).exp() / (2.0 * std::f64::consts::PI).powi(d as i32)).re
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Deterministic uniform draws in `[0, 1)` for picking test points.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }
}

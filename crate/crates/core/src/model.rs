//! Multi-asset Black–Scholes model in Fourier space: characteristic
//! function, damped transform of the min-call payoff and the factors that
//! turn the price integrand into Greek integrands.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: usize,
    pub maturity: f64,
    pub rate: f64,
    pub strike: f64,
    /// Row-major `d x d` correlation matrix.
    pub correlation: Vec<f64>,
    /// Damping vector `α`; `α_m > 0` and `Σ α_m > 1`.
    pub alpha: Vec<f64>,
    /// Per-asset `[min, max]` volatility range covered by the grids.
    pub sigma_range: Vec<[f64; 2]>,
    /// Per-asset `[min, max]` initial spot range covered by the grids.
    pub s0_range: Vec<[f64; 2]>,
}

impl ModelSpec {
    /// Spec with the default damping `α_m = 5 / d` and the same parameter
    /// ranges for every asset.
    pub fn new(
        maturity: f64,
        rate: f64,
        strike: f64,
        correlation: Vec<Vec<f64>>,
        sigma_range: [f64; 2],
        s0_range: [f64; 2],
    ) -> Result<Self> {
        let d = correlation.len();
        if d == 0 {
            return Err(Error::Config("at least one asset is required".into()));
        }
        let spec = Self {
            d,
            maturity,
            rate,
            strike,
            correlation: correlation.concat(),
            alpha: vec![default_alpha(d); d],
            sigma_range: vec![sigma_range; d],
            s0_range: vec![s0_range; d],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_alpha(mut self, alpha: Vec<f64>) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.correlation[i * self.d + j]
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(Error::Config("at least one asset is required".into()));
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(Error::Config(format!("maturity must be positive, got {}", self.maturity)));
        }
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return Err(Error::Config(format!("strike must be positive, got {}", self.strike)));
        }
        if !self.rate.is_finite() {
            return Err(Error::Config("rate must be finite".into()));
        }
        if self.correlation.len() != d * d {
            return Err(Error::Config(format!(
                "correlation has {} entries, expected {}",
                self.correlation.len(),
                d * d
            )));
        }
        for i in 0..d {
            if (self.rho(i, i) - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("correlation diagonal entry {i} is not 1")));
            }
            for j in 0..d {
                if (self.rho(i, j) - self.rho(j, i)).abs() > 1e-12 {
                    return Err(Error::Config(format!("correlation is not symmetric at ({i}, {j})")));
                }
            }
        }
        cholesky(&self.correlation, d)?;
        if self.alpha.len() != d {
            return Err(Error::Config(format!("damping has {} entries, expected {d}", self.alpha.len())));
        }
        if self.alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Config("every damping component must be positive".into()));
        }
        if !(self.alpha.iter().sum::<f64>() > 1.0) {
            return Err(Error::Config("damping components must sum to more than 1".into()));
        }
        for (name, ranges) in [("volatility", &self.sigma_range), ("spot", &self.s0_range)] {
            if ranges.len() != d {
                return Err(Error::Config(format!("{name} ranges must have {d} entries")));
            }
            for (m, &[lo, hi]) in ranges.iter().enumerate() {
                if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::Config(format!(
                        "{name} range of asset {m} must satisfy 0 < min < max, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Damped frequency `z + iα`.
    pub fn shift(&self, z: &[f64]) -> Vec<C64> {
        z.iter().zip(&self.alpha).map(|(&z, &a)| C64::new(z, a)).collect()
    }

    /// `e^{-rT} / (2π)^d`.
    pub fn prefactor(&self) -> f64 {
        (-self.rate * self.maturity).exp() / (2.0 * std::f64::consts::PI).powi(self.d as i32)
    }

    /// The model restricted to the assets listed in `order`, in that order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let d = order.len();
        let correlation = order
            .iter()
            .flat_map(|&i| order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.rho(i, j))
            .collect();
        let spec = Self {
            d,
            maturity: self.maturity,
            rate: self.rate,
            strike: self.strike,
            correlation,
            alpha: order.iter().map(|&i| self.alpha[i]).collect(),
            sigma_range: order.iter().map(|&i| self.sigma_range[i]).collect(),
            s0_range: order.iter().map(|&i| self.s0_range[i]).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn default_alpha(d: usize) -> f64 {
    5.0 / d as f64
}

/// Lower Cholesky factor of a row-major symmetric matrix, or a config error
/// if it is not positive definite.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if !(v > 0.0) {
                    return Err(Error::Config("correlation matrix is not positive definite".into()));
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// `φ(u) = exp(i Σ u_m μ_m − T/2 Σ σ_m σ_k u_m u_k ρ_mk)` with
/// `μ_m = ln S_m + (r − σ_m²/2) T`, for complex `u`.
pub fn characteristic_fn(spec: &ModelSpec, u: &[C64], sigma: &[f64], s0: &[f64]) -> Result<C64> {
    let t = spec.maturity;
    let mut drift = C64::new(0.0, 0.0);
    let mut quad = C64::new(0.0, 0.0);
    for m in 0..spec.d {
        let mu = s0[m].ln() + (spec.rate - 0.5 * sigma[m] * sigma[m]) * t;
        drift += u[m] * mu;
        let mut row = C64::new(0.0, 0.0);
        for k in 0..spec.d {
            row += u[k] * (sigma[k] * spec.rho(m, k));
        }
        quad += u[m] * sigma[m] * row;
    }
    let exponent = I * drift - 0.5 * t * quad;
    if !(exponent.re < 700.0) {
        return Err(Error::NonFinite(format!(
            "characteristic function exponent with real part {:e}",
            exponent.re
        )));
    }
    Ok(exponent.exp())
}

/// Fourier transform of the min-call payoff at damped frequency `w = z + iα`:
/// `−K^{1+iΣw} / ((−1)^d (1 + iΣw) Π_m i w_m)`.
pub fn payoff_fourier_min_call(strike: f64, w: &[C64]) -> Result<C64> {
    if w.iter().any(|x| !(x.im > 0.0)) || !(w.iter().map(|x| x.im).sum::<f64>() > 1.0) {
        return Err(Error::Domain(
            "min-call transform needs every damping component positive and their sum above 1".into(),
        ));
    }
    let sum: C64 = w.iter().sum();
    let a = C64::new(1.0, 0.0) + I * sum;
    let numerator = (a * strike.ln()).exp();
    let mut denom = a;
    for wm in w {
        denom *= -I * wm;
    }
    Ok(-numerator / denom)
}

/// Vega factor for asset `kappa` at `w = z + iα`:
/// `T w_κ (i σ_κ − Σ_i ρ_iκ σ_i w_i)`.
pub fn psi_vega(spec: &ModelSpec, kappa: usize, w: &[C64], sigma: &[f64]) -> C64 {
    let mut s = I * sigma[kappa];
    for i in 0..spec.d {
        s -= w[i] * (spec.rho(i, kappa) * sigma[i]);
    }
    spec.maturity * w[kappa] * s
}

/// Delta factor `−i w_κ / S_κ`.
pub fn psi_delta(w_kappa: C64, s0_kappa: f64) -> Result<C64> {
    check_spot(s0_kappa)?;
    Ok(-I * w_kappa / s0_kappa)
}

/// Gamma factor `(i w_κ − w_κ²) / S_κ²`.
pub fn psi_gamma(w_kappa: C64, s0_kappa: f64) -> Result<C64> {
    check_spot(s0_kappa)?;
    Ok((I * w_kappa - w_kappa * w_kappa) / (s0_kappa * s0_kappa))
}

fn check_spot(s0: f64) -> Result<()> {
    if s0 > 0.0 && s0.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("initial spot must be positive, got {s0}")))
    }
}

/// Named correlation matrices used by the reference configurations. For
/// fewer than five assets the leading block is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationFixture {
    /// All off-diagonal entries 0.5, any dimension.
    Const,
    Noise,
    Rand,
}

const NOISE: [[f64; 5]; 5] = [
    [1.0, 0.472, 0.595, 0.453, 0.554],
    [0.472, 1.0, 0.426, 0.539, 0.533],
    [0.595, 0.426, 1.0, 0.531, 0.462],
    [0.453, 0.539, 0.531, 1.0, 0.593],
    [0.554, 0.533, 0.462, 0.593, 1.0],
];

const RAND: [[f64; 5]; 5] = [
    [1.0, 0.719, 0.728, 0.505, 0.303],
    [0.719, 1.0, 0.394, 0.132, 0.515],
    [0.728, 0.394, 1.0, 0.722, 0.178],
    [0.505, 0.132, 0.722, 1.0, 0.401],
    [0.303, 0.515, 0.178, 0.401, 1.0],
];

impl CorrelationFixture {
    pub fn matrix(self, d: usize) -> Result<Vec<Vec<f64>>> {
        let table = match self {
            CorrelationFixture::Const => {
                return Ok((0..d)
                    .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.5 }).collect())
                    .collect())
            }
            CorrelationFixture::Noise => &NOISE,
            CorrelationFixture::Rand => &RAND,
        };
        if d > 5 {
            return Err(Error::Config(format!("fixture {self:?} is defined for at most 5 assets")));
        }
        Ok(table[..d].iter().map(|row| row[..d].to_vec()).collect())
    }
}

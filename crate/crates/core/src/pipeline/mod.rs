//! Offline construction of parameter-dependent price and Greek tensor
//! trains, and their online evaluation at grid nodes.
//!
//! Offline, the weighted characteristic function φ̃ over
//! `(z_1, σ_1, S_1, …, z_d, σ_d, S_d)` and the payoff transform ṽ over
//! `(z_1, …, z_d)` are learned by cross interpolation, multiplied
//! entry-wise and summed over the frequency indices. What remains is a
//! train over `(σ_i, S_i)` pairs, stored as `d` operator cores. Online, a
//! price or Greek is one slice contraction per asset.

mod build;
mod ordering;

use serde::{Deserialize, Serialize};

pub use build::{
    build_price_tt, greeks_an, greeks_nd, learn_characteristic_tt, learn_vega_factor, BuildOptions,
    Builder,
};
pub use ordering::{interleave_ordering, reorder_assets, CoreSlot, Layout};

use crate::exec::Execution;
use crate::grids::{self, AxisGrid, AxisKind};
use crate::model::ModelSpec;
use crate::tensor::{io, LocalIndex, TtOperator};
use crate::tci::TciDiagnostics;
use crate::{Error, Result};

/// Imaginary parts below `IMAG_REL_TOL · |Re| + IMAG_ABS_TOL` are treated as
/// round-off.
pub const IMAG_REL_TOL: f64 = 1e-8;
pub const IMAG_ABS_TOL: f64 = 1e-12;

/// One tolerance per compression stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    pub tci: f64,
    pub svd_phi: f64,
    pub svd_payoff: f64,
    pub svd_vjkl: f64,
    pub svd_vkl: f64,
    pub svd_greeks: f64,
}

impl ToleranceSet {
    /// Reference settings for price and ND Greeks.
    pub fn reference_nd() -> Self {
        Self {
            tci: 1e-6,
            svd_phi: 1e-10,
            svd_payoff: 1e-10,
            svd_vjkl: 1e-10,
            svd_vkl: 1e-10,
            svd_greeks: 1e-10,
        }
    }

    /// Reference settings for AN Greeks (looser inputs to the big product).
    pub fn reference_an() -> Self {
        Self { svd_phi: 1e-8, svd_payoff: 1e-8, ..Self::reference_nd() }
    }

    pub fn uniform(tci: f64, svd: f64) -> Self {
        Self { tci, svd_phi: svd, svd_payoff: svd, svd_vjkl: svd, svd_vkl: svd, svd_greeks: svd }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tci > 0.0) {
            return Err(Error::Config(format!("TCI tolerance must be positive, got {}", self.tci)));
        }
        let svd = [self.svd_phi, self.svd_payoff, self.svd_vjkl, self.svd_vkl, self.svd_greeks];
        if svd.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Config("SVD tolerances must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Grid resolution: `N_z = 2 n_gauss + 1` frequency nodes on `[-r_z, r_z]`
/// and `n_p` Chebyshev–Lobatto nodes per parameter axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_gauss: usize,
    pub r_z: f64,
    pub n_p: usize,
}

impl GridSpec {
    pub fn n_z(&self) -> usize {
        2 * self.n_gauss + 1
    }
}

/// All axes of a model, indexed by original asset number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub z: Vec<AxisGrid>,
    pub sigma: Vec<AxisGrid>,
    pub spot: Vec<AxisGrid>,
}

impl Grids {
    pub fn build(spec: &ModelSpec, g: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let mut z = Vec::with_capacity(spec.d);
        let mut sigma = Vec::with_capacity(spec.d);
        let mut spot = Vec::with_capacity(spec.d);
        for m in 0..spec.d {
            z.push(grids::gauss_kronrod_axis(g.n_gauss, g.r_z, m)?);
            let [lo, hi] = spec.sigma_range[m];
            sigma.push(grids::chebyshev_lobatto_axis(AxisKind::Volatility, m, g.n_p, lo, hi)?);
            let [lo, hi] = spec.s0_range[m];
            spot.push(grids::chebyshev_lobatto_axis(AxisKind::Spot, m, g.n_p, lo, hi)?);
        }
        Ok(Self { z, sigma, spot })
    }

    pub fn d(&self) -> usize {
        self.sigma.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Greek {
    Vega,
    Delta,
    Gamma,
}

impl Greek {
    pub const ALL: [Greek; 3] = [Greek::Vega, Greek::Delta, Greek::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Greek::Vega => "vega",
            Greek::Delta => "delta",
            Greek::Gamma => "gamma",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nd,
    An,
}

/// What a parameter tensor evaluates to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Quantity {
    Price,
    Greek { greek: Greek, method: Method, kappa: usize },
}

/// Operator train over `(σ_i, S_i)` node indices plus everything needed to
/// map physical parameters to indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub quantity: Quantity,
    pub op: TtOperator,
    pub prefactor: f64,
    pub grids: Grids,
    /// `ordering[p]` is the original asset stored in core `p`.
    pub ordering: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ArtifactMeta {
    quantity: Quantity,
    prefactor: f64,
    grids: Grids,
    ordering: Vec<usize>,
    local_shapes: Vec<(usize, usize)>,
}

/// A value plus the multiply-add count of the contraction that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub imag: f64,
    pub flops: u64,
}

impl ParamTensor {
    pub fn d(&self) -> usize {
        self.ordering.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.op.bond_dims()
    }

    /// Node indices `(k_m, l_m)` per original asset for on-grid parameters.
    pub fn locate(&self, sigma: &[f64], s0: &[f64]) -> Result<Vec<LocalIndex>> {
        let d = self.d();
        if sigma.len() != d || s0.len() != d {
            return Err(Error::Structure(format!(
                "expected {d} volatilities and spots, got {} and {}",
                sigma.len(),
                s0.len()
            )));
        }
        (0..d)
            .map(|m| Ok((self.grids.sigma[m].locate(sigma[m])?, self.grids.spot[m].locate(s0[m])?)))
            .collect()
    }

    /// Evaluates at node indices given per original asset.
    pub fn evaluate_indices(&self, idx: &[LocalIndex]) -> Result<Evaluation> {
        if idx.len() != self.d() {
            return Err(Error::Structure(format!("expected {} index pairs, got {}", self.d(), idx.len())));
        }
        let permuted: Vec<LocalIndex> = self.ordering.iter().map(|&m| idx[m]).collect();
        let (v, flops) = self.op.evaluate_with_flops(&permuted)?;
        let v = v * self.prefactor;
        if v.im.abs() > IMAG_REL_TOL * v.re.abs() + IMAG_ABS_TOL {
            log::warn!("imaginary residual {:.3e} against real part {:.6e}", v.im, v.re);
        }
        Ok(Evaluation { value: v.re, imag: v.im, flops })
    }

    /// Evaluates at on-grid physical parameters; off-grid values are
    /// rejected with the nearest node.
    pub fn evaluate_at(&self, sigma: &[f64], s0: &[f64]) -> Result<f64> {
        let idx = self.locate(sigma, s0)?;
        Ok(self.evaluate_indices(&idx)?.value)
    }

    /// Batch evaluation over many index tuples.
    pub fn evaluate_many(&self, points: &[Vec<LocalIndex>], exec: Execution) -> Result<Vec<f64>> {
        exec.map_collect(points.len(), |i| self.evaluate_indices(&points[i]).map(|e| e.value))
            .into_iter()
            .collect()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let meta = ArtifactMeta {
            quantity: self.quantity,
            prefactor: self.prefactor,
            grids: self.grids.clone(),
            ordering: self.ordering.clone(),
            local_shapes: self.op.local_shapes(),
        };
        let meta = serde_json::to_value(meta).map_err(|e| Error::Format(e.to_string()))?;
        io::save(path, &self.op.to_train(), Some(&meta))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let (train, meta) = io::load(path)?;
        let meta = meta.ok_or_else(|| Error::Format("artifact has no parameter metadata".into()))?;
        let meta: ArtifactMeta =
            serde_json::from_value(meta).map_err(|e| Error::Format(e.to_string()))?;
        let op = TtOperator::from_train(&train, &meta.local_shapes)?;
        let d = meta.ordering.len();
        if op.len() != d || meta.grids.d() != d {
            return Err(Error::Format("metadata does not match core count".into()));
        }
        Ok(Self {
            quantity: meta.quantity,
            op,
            prefactor: meta.prefactor,
            grids: meta.grids,
            ordering: meta.ordering,
        })
    }
}

/// Bond profiles, sample counts and stage timings of an offline build.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BuildReport {
    pub d: usize,
    pub n_z: usize,
    pub n_p: usize,
    pub ordering: Vec<usize>,
    pub tolerances: Option<ToleranceSet>,
    pub phi_tci: TciDiagnostics,
    pub payoff_tci: TciDiagnostics,
    /// Bonds of φ̃ after TCI and after SVD.
    pub phi_bonds_tci: Vec<usize>,
    pub phi_bonds: Vec<usize>,
    pub payoff_bonds_tci: Vec<usize>,
    pub payoff_bonds: Vec<usize>,
    /// Bonds of the z-summed train before and after its SVD.
    pub summed_bonds: Vec<usize>,
    pub price_bonds: Vec<usize>,
    pub seconds_phi: f64,
    pub seconds_payoff: f64,
    pub seconds_product: f64,
    pub seconds_total: f64,
}

#[derive(Clone, Debug)]
pub struct PriceTensor {
    pub tensor: ParamTensor,
    pub report: BuildReport,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GreekReport {
    pub greek: Option<Greek>,
    pub method: Option<Method>,
    pub kappa: usize,
    /// Bond profile of the Ψ factor train (AN only).
    pub psi_bonds: Vec<usize>,
    pub psi_tci: Option<TciDiagnostics>,
    pub bonds: Vec<usize>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct GreekTensor {
    pub greek: Greek,
    pub method: Method,
    /// Original (0-based) asset index.
    pub kappa: usize,
    pub tensor: ParamTensor,
    pub report: GreekReport,
}

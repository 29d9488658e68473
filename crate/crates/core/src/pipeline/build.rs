use std::sync::OnceLock;
use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::ordering::{interleave_ordering, reorder_assets, CoreSlot, Layout};
use super::{
    BuildReport, Greek, GreekReport, GreekTensor, GridSpec, Grids, Method, ParamTensor, PriceTensor,
    Quantity, ToleranceSet,
};
use crate::grids::{chebyshev_diff_matrix, AxisKind};
use crate::model::{self, ModelSpec};
use crate::tci::{tci_learn, BlackBoxTensor, TciConfig, TciDiagnostics};
use crate::tensor::{TensorTrain, TtOperator};
use crate::{Error, Result, C64};

const NAN: C64 = C64::new(f64::NAN, f64::NAN);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Reorder assets so that strongly correlated ones are adjacent.
    pub reorder: bool,
    /// Cross interpolation settings; the tolerance is taken from the
    /// [`ToleranceSet`].
    pub tci: TciConfig,
    /// Relative squared singular-value cutoff inside the fused product.
    pub zip_cutoff: f64,
    /// Largest admissible bond of an entry-wise product.
    pub bond_cap: usize,
    /// Fail instead of warning when a cross interpolation does not reach
    /// its tolerance.
    pub require_convergence: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            reorder: true,
            tci: TciConfig::default(),
            zip_cutoff: 1e-26,
            bond_cap: 4096,
            require_convergence: true,
        }
    }
}

/// Offline state shared by the price tensor and the analytic Greeks: the
/// compressed φ̃ and ṽ trains and, on first use, the unsummed product
/// `Ṽ_(j,k,l)`.
pub struct Builder {
    spec: ModelSpec,
    grids: Grids,
    tols: ToleranceSet,
    opts: BuildOptions,
    ordering: Vec<usize>,
    /// The model with assets in chain order.
    chain_spec: ModelSpec,
    phi: TensorTrain,
    /// ṽ with identity cores on the σ and S slots.
    payoff: TensorTrain,
    vjkl: OnceLock<TensorTrain>,
    report: BuildReport,
}

impl Builder {
    pub fn new(
        spec: &ModelSpec,
        grid_spec: &GridSpec,
        tols: &ToleranceSet,
        opts: &BuildOptions,
    ) -> Result<Self> {
        let start = Instant::now();
        tols.validate()?;
        let grids = Grids::build(spec, grid_spec)?;
        let d = spec.d;
        let ordering =
            if opts.reorder { reorder_assets(&spec.correlation, d) } else { (0..d).collect() };
        let chain_spec = spec.permuted(&ordering)?;
        let tci = TciConfig { tol: tols.tci, ..opts.tci.clone() };
        let slots = interleave_ordering(d, Layout::Interleaved);

        let t = Instant::now();
        let (phi_raw, phi_diag) = learn_phi(&chain_spec, &grids, &ordering, &slots, &tci)?;
        check_convergence(&phi_diag, &tci, opts, "weighted characteristic function")?;
        let phi = phi_raw.svd_truncate(tols.svd_phi)?;
        let seconds_phi = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let (payoff_raw, payoff_diag) = learn_payoff(&chain_spec, &grids, &ordering, &tci)?;
        check_convergence(&payoff_diag, &tci, opts, "payoff transform")?;
        let payoff_small = payoff_raw.svd_truncate(tols.svd_payoff)?;
        let inserts: Vec<(usize, usize)> = (0..d)
            .flat_map(|a| {
                let m = ordering[a];
                [(a + 1, grids.sigma[m].len()), (a + 1, grids.spot[m].len())]
            })
            .collect();
        let payoff = payoff_small.insert_identity_cores(&inserts)?;
        let seconds_payoff = t.elapsed().as_secs_f64();

        let report = BuildReport {
            d,
            n_z: grid_spec.n_z(),
            n_p: grid_spec.n_p,
            ordering: ordering.clone(),
            tolerances: Some(*tols),
            phi_bonds_tci: phi_raw.bond_dims(),
            phi_bonds: phi.bond_dims(),
            payoff_bonds_tci: payoff_raw.bond_dims(),
            payoff_bonds: payoff_small.bond_dims(),
            phi_tci: phi_diag,
            payoff_tci: payoff_diag,
            seconds_phi,
            seconds_payoff,
            seconds_total: start.elapsed().as_secs_f64(),
            ..Default::default()
        };
        Ok(Self {
            spec: spec.clone(),
            grids,
            tols: *tols,
            opts: opts.clone(),
            ordering,
            chain_spec,
            phi,
            payoff,
            vjkl: OnceLock::new(),
            report,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn grids(&self) -> &Grids {
        &self.grids
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn report(&self) -> &BuildReport {
        &self.report
    }

    /// The compressed weighted characteristic-function train.
    pub fn phi(&self) -> &TensorTrain {
        &self.phi
    }

    /// The payoff train with identity cores on the parameter slots.
    pub fn payoff(&self) -> &TensorTrain {
        &self.payoff
    }

    fn z_positions(&self) -> Vec<usize> {
        (0..self.spec.d).map(|a| 3 * a).collect()
    }

    fn finish(&self, summed: TensorTrain, eps: f64, quantity: Quantity) -> Result<ParamTensor> {
        let compressed = summed.svd_truncate(eps)?;
        let op: TtOperator = compressed.pair_into_operator()?;
        Ok(ParamTensor {
            quantity,
            op,
            prefactor: self.spec.prefactor(),
            grids: self.grids.clone(),
            ordering: self.ordering.clone(),
        })
    }

    /// Multiplies φ̃ and ṽ, sums the frequency indices and compresses.
    pub fn price(&self) -> Result<PriceTensor> {
        let t = Instant::now();
        let summed = self
            .phi
            .hadamard_sum_compress(
                &self.payoff,
                &self.z_positions(),
                self.opts.zip_cutoff,
                self.opts.bond_cap,
            )?
            .into_train()?;
        let summed_bonds = summed.bond_dims();
        let tensor = self.finish(summed, self.tols.svd_vkl, Quantity::Price)?;
        let mut report = self.report.clone();
        report.summed_bonds = summed_bonds;
        report.price_bonds = tensor.bond_dims();
        report.seconds_product = t.elapsed().as_secs_f64();
        report.seconds_total += report.seconds_product;
        Ok(PriceTensor { tensor, report })
    }

    /// The compressed entry-wise product before frequency summation,
    /// computed once.
    pub fn vjkl(&self) -> Result<&TensorTrain> {
        if let Some(v) = self.vjkl.get() {
            return Ok(v);
        }
        let full = self
            .phi
            .hadamard_sum_compress(&self.payoff, &[], self.opts.zip_cutoff, self.opts.bond_cap)?
            .into_train()?;
        let v = full.svd_truncate(self.tols.svd_vjkl)?;
        Ok(self.vjkl.get_or_init(|| v))
    }

    /// Ψ factor train over the full interleaved layout, with its cross
    /// interpolation diagnostics when one was needed.
    pub fn psi_train(
        &self,
        greek: Greek,
        kappa: usize,
    ) -> Result<(TensorTrain, Option<TciDiagnostics>)> {
        let d = self.spec.d;
        let p = self.position(kappa)?;
        let alpha = self.chain_spec.alpha[p];
        let m = self.ordering[p];
        match greek {
            Greek::Delta | Greek::Gamma => {
                let mut factors = Vec::with_capacity(3 * d);
                for a in 0..d {
                    let ma = self.ordering[a];
                    let (nz, nk, nl) =
                        (self.grids.z[ma].len(), self.grids.sigma[ma].len(), self.grids.spot[ma].len());
                    if a != p {
                        factors.push(vec![C64::new(1.0, 0.0); nz]);
                        factors.push(vec![C64::new(1.0, 0.0); nk]);
                        factors.push(vec![C64::new(1.0, 0.0); nl]);
                        continue;
                    }
                    // Ψ_Δ = −i w / S and Ψ_γ = (i w − w²) / S² split into a
                    // frequency factor and a spot factor
                    let zf = self.grids.z[m]
                        .nodes
                        .iter()
                        .map(|&z| {
                            let w = C64::new(z, alpha);
                            Ok(match greek {
                                Greek::Delta => model::psi_delta(w, 1.0)?,
                                _ => model::psi_gamma(w, 1.0)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let power = if greek == Greek::Delta { 1 } else { 2 };
                    let sf = self.grids.spot[m]
                        .nodes
                        .iter()
                        .map(|&s| C64::new(s.powi(-power), 0.0))
                        .collect();
                    factors.push(zf);
                    factors.push(vec![C64::new(1.0, 0.0); nk]);
                    factors.push(sf);
                }
                Ok((TensorTrain::product(&factors)?, None))
            }
            Greek::Vega => {
                let tci = TciConfig { tol: self.tols.tci, ..self.opts.tci.clone() };
                let (psi, diag) =
                    learn_vega_factor(&self.chain_spec, &self.grids, &self.ordering, p, &tci)?;
                check_convergence(&diag, &tci, &self.opts, "vega factor")?;
                let inserts: Vec<(usize, usize)> =
                    (0..d).map(|a| (2 * a + 2, self.grids.spot[self.ordering[a]].len())).collect();
                Ok((psi.insert_identity_cores(&inserts)?, Some(diag)))
            }
        }
    }

    /// Analytic Greek: Ψ times `Ṽ_(j,k,l)`, summed over the frequencies.
    pub fn greek_an(&self, greek: Greek, kappa: usize) -> Result<GreekTensor> {
        let t = Instant::now();
        let (psi, psi_tci) = self.psi_train(greek, kappa)?;
        let vjkl = self.vjkl()?;
        let summed = psi
            .hadamard_sum_compress(vjkl, &self.z_positions(), self.opts.zip_cutoff, self.opts.bond_cap)?
            .into_train()?;
        let quantity = Quantity::Greek { greek, method: Method::An, kappa };
        let tensor = self.finish(summed, self.tols.svd_greeks, quantity)?;
        let report = GreekReport {
            greek: Some(greek),
            method: Some(Method::An),
            kappa,
            psi_bonds: psi.bond_dims(),
            psi_tci,
            bonds: tensor.bond_dims(),
            seconds: t.elapsed().as_secs_f64(),
        };
        Ok(GreekTensor { greek, method: Method::An, kappa, tensor, report })
    }

    fn position(&self, kappa: usize) -> Result<usize> {
        self.ordering.iter().position(|&m| m == kappa).ok_or_else(|| {
            Error::Config(format!("asset index {kappa} out of range for {} assets", self.spec.d))
        })
    }
}

fn check_convergence(
    diag: &TciDiagnostics,
    tci: &TciConfig,
    opts: &BuildOptions,
    what: &str,
) -> Result<()> {
    if diag.converged || diag.final_error <= tci.tol {
        return Ok(());
    }
    if opts.require_convergence {
        return Err(Error::TciNotConverged { sweeps: diag.sweeps, error: diag.final_error, tol: tci.tol });
    }
    log::warn!(
        "{what}: cross interpolation stopped at error {:.3e} (tolerance {:.1e})",
        diag.final_error,
        tci.tol
    );
    Ok(())
}

/// Cross interpolation of `Π_m w_{j_m} · φ(−z − iα; σ, S)` over the cores
/// listed in `slots`. `chain_spec` is the model in chain order and
/// `ordering` maps chain positions to original assets for grid lookup.
fn learn_phi(
    chain_spec: &ModelSpec,
    grids: &Grids,
    ordering: &[usize],
    slots: &[CoreSlot],
    tci: &TciConfig,
) -> Result<(TensorTrain, TciDiagnostics)> {
    let d = chain_spec.d;
    let dims: Vec<usize> = slots
        .iter()
        .map(|s| {
            let m = ordering[s.asset];
            match s.kind {
                AxisKind::Frequency => grids.z[m].len(),
                AxisKind::Volatility => grids.sigma[m].len(),
                AxisKind::Spot => grids.spot[m].len(),
            }
        })
        .collect();
    let f = BlackBoxTensor::new(dims, move |idx: &[usize]| {
        let mut u = vec![C64::new(0.0, 0.0); d];
        let mut sigma = vec![0.0; d];
        let mut s0 = vec![0.0; d];
        let mut weight = 1.0;
        for (slot, &i) in slots.iter().zip(idx) {
            let a = slot.asset;
            let m = ordering[a];
            match slot.kind {
                AxisKind::Frequency => {
                    let g = &grids.z[m];
                    u[a] = -C64::new(g.nodes[i], chain_spec.alpha[a]);
                    weight *= g.weights.as_ref().map_or(1.0, |w| w[i]);
                }
                AxisKind::Volatility => sigma[a] = grids.sigma[m].nodes[i],
                AxisKind::Spot => s0[a] = grids.spot[m].nodes[i],
            }
        }
        model::characteristic_fn(chain_spec, &u, &sigma, &s0).map_or(NAN, |v| v * weight)
    });
    tci_learn(&f, tci)
}

fn learn_payoff(
    chain_spec: &ModelSpec,
    grids: &Grids,
    ordering: &[usize],
    tci: &TciConfig,
) -> Result<(TensorTrain, TciDiagnostics)> {
    let d = chain_spec.d;
    let dims: Vec<usize> = ordering.iter().map(|&m| grids.z[m].len()).collect();
    let strike = chain_spec.strike;
    let f = BlackBoxTensor::new(dims, move |idx: &[usize]| {
        let w: Vec<C64> = (0..d)
            .map(|a| C64::new(grids.z[ordering[a]].nodes[idx[a]], chain_spec.alpha[a]))
            .collect();
        model::payoff_fourier_min_call(strike, &w).unwrap_or(NAN)
    });
    tci_learn(&f, tci)
}

/// Cross interpolation of `Ψ_ν` for chain position `p` over
/// `(z_1, σ_1, …, z_d, σ_d)`, before the spot dummies are inserted.
pub fn learn_vega_factor(
    chain_spec: &ModelSpec,
    grids: &Grids,
    ordering: &[usize],
    p: usize,
    tci: &TciConfig,
) -> Result<(TensorTrain, TciDiagnostics)> {
    let d = chain_spec.d;
    if p >= d {
        return Err(Error::Config(format!("asset position {p} out of range for {d} assets")));
    }
    let dims: Vec<usize> =
        ordering.iter().flat_map(|&m| [grids.z[m].len(), grids.sigma[m].len()]).collect();
    let f = BlackBoxTensor::new(dims, move |idx: &[usize]| {
        let mut w = vec![C64::new(0.0, 0.0); d];
        let mut sigma = vec![0.0; d];
        for (a, pair) in idx.chunks(2).enumerate() {
            let m = ordering[a];
            w[a] = C64::new(grids.z[m].nodes[pair[0]], chain_spec.alpha[a]);
            sigma[a] = grids.sigma[m].nodes[pair[1]];
        }
        model::psi_vega(chain_spec, p, &w, &sigma)
    });
    tci_learn(&f, tci)
}

/// Learns the weighted characteristic function alone in the requested core
/// layout, without reordering. Used to compare layouts.
pub fn learn_characteristic_tt(
    spec: &ModelSpec,
    grid_spec: &GridSpec,
    layout: Layout,
    tci: &TciConfig,
) -> Result<(TensorTrain, TciDiagnostics)> {
    let grids = Grids::build(spec, grid_spec)?;
    let ordering: Vec<usize> = (0..spec.d).collect();
    let slots = interleave_ordering(spec.d, layout);
    learn_phi(spec, &grids, &ordering, &slots, tci)
}

/// Offline price tensor in one call.
pub fn build_price_tt(
    spec: &ModelSpec,
    grid_spec: &GridSpec,
    tols: &ToleranceSet,
    opts: &BuildOptions,
) -> Result<PriceTensor> {
    Builder::new(spec, grid_spec, tols, opts)?.price()
}

/// Numerical-differentiation Greek: the Chebyshev differentiation matrix
/// applied to the σ (vega) or S (delta, twice for gamma) index of the core
/// holding asset `kappa`. Bond dimensions are untouched.
pub fn greeks_nd(price: &PriceTensor, greek: Greek, kappa: usize) -> Result<GreekTensor> {
    let t = Instant::now();
    let pt = &price.tensor;
    let p = pt.ordering.iter().position(|&m| m == kappa).ok_or_else(|| {
        Error::Config(format!("asset index {kappa} out of range for {} assets", pt.d()))
    })?;
    let axis = match greek {
        Greek::Vega => &pt.grids.sigma[kappa],
        Greek::Delta | Greek::Gamma => &pt.grids.spot[kappa],
    };
    let (n1, n2) = pt.op.cores()[p].local_shape();
    let expected = if greek == Greek::Vega { n1 } else { n2 };
    if axis.len() != expected {
        return Err(Error::Structure(format!(
            "{} axis has {} nodes but the core index has {expected}",
            axis.kind.symbol(),
            axis.len()
        )));
    }
    let dm = chebyshev_diff_matrix(axis.len(), axis.min(), axis.max())?;
    let op = match greek {
        Greek::Vega => pt.op.apply_matrix(p, false, dm.as_ref())?,
        Greek::Delta => pt.op.apply_matrix(p, true, dm.as_ref())?,
        Greek::Gamma => {
            let d2: Mat<f64> = &dm * &dm;
            pt.op.apply_matrix(p, true, d2.as_ref())?
        }
    };
    let tensor = ParamTensor {
        quantity: Quantity::Greek { greek, method: Method::Nd, kappa },
        op,
        ..pt.clone()
    };
    let report = GreekReport {
        greek: Some(greek),
        method: Some(Method::Nd),
        kappa,
        bonds: tensor.bond_dims(),
        seconds: t.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(GreekTensor { greek, method: Method::Nd, kappa, tensor, report })
}

/// Analytic Greek from a prepared builder (reuses its cached `Ṽ_(j,k,l)`).
pub fn greeks_an(builder: &Builder, greek: Greek, kappa: usize) -> Result<GreekTensor> {
    builder.greek_an(greek, kappa)
}

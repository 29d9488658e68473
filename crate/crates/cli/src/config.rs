//! Run configuration (TOML).
//!
//! ```toml
//! [model]
//! assets = 5
//! maturity = 1.0
//! rate = 0.01
//! strike = 100.0
//! correlation = "const"        # "noise", "rand", or an explicit matrix
//! sigma_range = [0.15, 0.25]
//! s0_range = [90.0, 120.0]
//! # alpha = 1.0                 # scalar or one value per asset; default 5/d
//!
//! [grids]
//! n_z = 127
//! r_z = 25.0
//! n_p = 100
//!
//! [tolerances]
//! preset = "nd"                 # or "an"; any field below overrides it
//! tci = 1e-6
//!
//! [mc]
//! n_paths = 1000000
//! reference_paths = 100000000
//! seed = 7
//!
//! [build]
//! an_greeks = true
//!
//! [compare]
//! samples = 100
//! seed = 2024
//!
//! [outputs]
//! dir = "out/five_asset_const"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttgreeks::mc::McConfig;
use ttgreeks::model::{CorrelationFixture, ModelSpec};
use ttgreeks::pipeline::{BuildOptions, GridSpec, ToleranceSet};
use ttgreeks::Execution;

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grids: GridSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub build: BuildSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Correlation {
    Named(CorrelationFixture),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Uniform(f64),
    PerAsset(Vec<f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Required with a named correlation fixture.
    pub assets: Option<usize>,
    pub maturity: f64,
    pub rate: f64,
    pub strike: f64,
    pub correlation: Correlation,
    pub sigma_range: [f64; 2],
    pub s0_range: [f64; 2],
    pub alpha: Option<Alpha>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Kronrod node count `2n + 1`.
    pub n_z: usize,
    pub r_z: f64,
    pub n_p: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TolerancePreset {
    #[default]
    Nd,
    An,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default)]
    pub preset: TolerancePreset,
    pub tci: Option<f64>,
    pub svd_phi: Option<f64>,
    pub svd_payoff: Option<f64>,
    pub svd_vjkl: Option<f64>,
    pub svd_vkl: Option<f64>,
    pub svd_greeks: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_paths: usize,
    /// Paths of the Malliavin reference run used by `compare`.
    pub reference_paths: usize,
    pub seed: u64,
    pub h_vega: f64,
    pub h_spot: f64,
    pub batch_size: usize,
    pub execution: Execution,
}

impl Default for McSection {
    fn default() -> Self {
        let d = McConfig::default();
        Self {
            n_paths: d.n_paths,
            reference_paths: 10_000_000,
            seed: d.seed,
            h_vega: d.h_vega,
            h_spot: d.h_spot,
            batch_size: d.batch_size,
            execution: d.execution,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildSection {
    pub an_greeks: bool,
    pub reorder: bool,
    pub max_bond: usize,
    pub max_sweeps: usize,
    pub require_convergence: bool,
    pub execution: Execution,
}

impl Default for BuildSection {
    fn default() -> Self {
        let o = BuildOptions::default();
        Self {
            an_greeks: false,
            reorder: o.reorder,
            max_bond: o.tci.max_bond,
            max_sweeps: o.tci.max_sweeps,
            require_convergence: o.require_convergence,
            execution: o.tci.execution,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { samples: 100, seed: 2024 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => cfg_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model_spec()?;
        self.grid_spec()?;
        self.tolerances()?.validate()?;
        self.mc_config(self.mc.n_paths).validate()?;
        if self.mc.reference_paths == 0 {
            return Err(cfg_err("mc.reference_paths must be at least 1"));
        }
        if self.compare.samples == 0 {
            return Err(cfg_err("compare.samples must be at least 1"));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let corr = match &m.correlation {
            Correlation::Named(f) => {
                let d = m.assets.ok_or_else(|| cfg_err("model.assets is required with a named correlation"))?;
                f.matrix(d)?
            }
            Correlation::Matrix(rows) => {
                if let Some(d) = m.assets {
                    if d != rows.len() {
                        return Err(cfg_err(format!("model.assets = {d} but the correlation matrix has {} rows", rows.len())));
                    }
                }
                if rows.iter().any(|r| r.len() != rows.len()) {
                    return Err(cfg_err("correlation matrix must be square"));
                }
                rows.clone()
            }
        };
        let d = corr.len();
        let spec = ModelSpec::new(m.maturity, m.rate, m.strike, corr, m.sigma_range, m.s0_range)?;
        Ok(match &m.alpha {
            None => spec,
            Some(Alpha::Uniform(a)) => spec.with_alpha(vec![*a; d])?,
            Some(Alpha::PerAsset(v)) => {
                if v.len() != d {
                    return Err(cfg_err(format!("model.alpha has {} entries for {d} assets", v.len())));
                }
                spec.with_alpha(v.clone())?
            }
        })
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let g = &self.grids;
        if g.n_z < 3 || g.n_z % 2 == 0 {
            return Err(cfg_err(format!("grids.n_z must be odd and at least 3, got {}", g.n_z)));
        }
        if !(g.r_z > 0.0 && g.r_z.is_finite()) {
            return Err(cfg_err(format!("grids.r_z must be positive, got {}", g.r_z)));
        }
        if g.n_p < 2 {
            return Err(cfg_err(format!("grids.n_p must be at least 2, got {}", g.n_p)));
        }
        Ok(GridSpec { n_gauss: (g.n_z - 1) / 2, r_z: g.r_z, n_p: g.n_p })
    }

    pub fn tolerances(&self) -> Result<ToleranceSet, CliError> {
        let t = &self.tolerances;
        let base = match t.preset {
            TolerancePreset::Nd => ToleranceSet::reference_nd(),
            TolerancePreset::An => ToleranceSet::reference_an(),
        };
        let set = ToleranceSet {
            tci: t.tci.unwrap_or(base.tci),
            svd_phi: t.svd_phi.unwrap_or(base.svd_phi),
            svd_payoff: t.svd_payoff.unwrap_or(base.svd_payoff),
            svd_vjkl: t.svd_vjkl.unwrap_or(base.svd_vjkl),
            svd_vkl: t.svd_vkl.unwrap_or(base.svd_vkl),
            svd_greeks: t.svd_greeks.unwrap_or(base.svd_greeks),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn build_options(&self) -> BuildOptions {
        let mut o = BuildOptions { reorder: self.build.reorder, require_convergence: self.build.require_convergence, ..Default::default() };
        o.tci.max_bond = self.build.max_bond;
        o.tci.max_sweeps = self.build.max_sweeps;
        o.tci.execution = self.build.execution;
        o
    }

    pub fn mc_config(&self, n_paths: usize) -> McConfig {
        McConfig {
            n_paths,
            seed: self.mc.seed,
            h_vega: self.mc.h_vega,
            h_spot: self.mc.h_spot,
            batch_size: self.mc.batch_size,
            execution: self.mc.execution,
        }
    }
}

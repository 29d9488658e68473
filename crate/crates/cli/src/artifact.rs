//! Artifact directory written by `build` and read by the other commands.
//!
//! ```text
//! config.toml         resolved run configuration
//! price.ttg           price tensor
//! an_<greek>_<k>.ttg  analytic Greek tensors (k is 1-based)
//! report.json         bond profiles, sample counts, timings
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttgreeks::model::ModelSpec;
use ttgreeks::pipeline::{
    greeks_nd, BuildReport, Greek, GreekReport, GreekTensor, Method, ParamTensor, PriceTensor, Quantity,
};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildSummary {
    pub assets: usize,
    /// Cores of the integrand trains before the `(z, σ, S)` triples are merged.
    pub pre_merge_cores: usize,
    pub price_bonds: Vec<usize>,
    pub price: BuildReport,
    pub analytic: Vec<GreekReport>,
    /// Analytic Greeks that could not be built, with the reason.
    pub analytic_skipped: Vec<String>,
}

pub struct Artifact {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub spec: ModelSpec,
    pub price: PriceTensor,
    pub analytic: BTreeMap<(Greek, usize), ParamTensor>,
}

pub fn an_file(greek: Greek, kappa: usize) -> String {
    format!("an_{}_{}.ttg", greek.name(), kappa + 1)
}

pub fn write(
    dir: &Path,
    config: &RunConfig,
    price: &PriceTensor,
    analytic: &[GreekTensor],
    summary: &BuildSummary,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    price.tensor.save(&dir.join("price.ttg"))?;
    for g in analytic {
        g.tensor.save(&dir.join(an_file(g.greek, g.kappa)))?;
    }
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

impl Artifact {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        if !dir.is_dir() {
            return Err(CliError::Config(format!("artifact directory {} does not exist", dir.display())));
        }
        let config = RunConfig::load(&dir.join("config.toml"))?;
        let spec = config.model_spec()?;
        let tensor = ParamTensor::load(&dir.join("price.ttg"))?;
        if tensor.quantity != Quantity::Price {
            return Err(CliError::Config(format!("{}/price.ttg does not hold a price tensor", dir.display())));
        }
        if tensor.d() != spec.d {
            return Err(CliError::Config(format!(
                "price tensor has {} assets but the stored configuration has {}",
                tensor.d(),
                spec.d
            )));
        }
        let report = match std::fs::read_to_string(dir.join("report.json")) {
            Ok(text) => serde_json::from_str::<BuildSummary>(&text)?.price,
            Err(_) => BuildReport::default(),
        };
        let mut analytic = BTreeMap::new();
        for greek in Greek::ALL {
            for kappa in 0..spec.d {
                let path = dir.join(an_file(greek, kappa));
                if path.is_file() {
                    analytic.insert((greek, kappa), ParamTensor::load(&path)?);
                }
            }
        }
        Ok(Self { dir: dir.to_path_buf(), config, spec, price: PriceTensor { tensor, report }, analytic })
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n_p(&self) -> usize {
        self.price.tensor.grids.sigma[0].len()
    }

    /// The tensor for a Greek by the requested method; `None` if an
    /// analytic tensor was not built.
    pub fn greek(&self, greek: Greek, method: Method, kappa: usize) -> Result<Option<ParamTensor>, CliError> {
        if kappa >= self.d() {
            return Err(CliError::Config(format!("--kappa {} out of range for {} assets", kappa + 1, self.d())));
        }
        Ok(match method {
            Method::Nd => Some(greeks_nd(&self.price, greek, kappa)?.tensor),
            Method::An => self.analytic.get(&(greek, kappa)).cloned(),
        })
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bond chaining, core count or local dimension mismatch.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("index {index} out of range for core {core} with local dimension {dim}")]
    IndexOutOfRange { core: usize, index: usize, dim: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// A function was called outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("black-box tensor returned a non-finite value at index {index:?}")]
    NonFiniteSample { index: Vec<usize> },

    #[error("bond dimension {bond} exceeds the configured cap {cap} at position {position}")]
    BondCap { position: usize, bond: usize, cap: usize },

    #[error("local matrix with {entries} entries at position {position} exceeds the limit of {limit}")]
    MemoryLimit { position: usize, entries: usize, limit: usize },

    #[error("cross interpolation stopped after {sweeps} sweeps with estimated error {error:e} above {tol:e}")]
    TciNotConverged { sweeps: usize, error: f64, tol: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("Gauss-Kronrod extension of the {n_gauss}-point Gauss rule has non-real nodes")]
    KronrodExtension { n_gauss: usize },

    #[error(
        "value {value} is not a node of the {axis} axis of asset {asset}; nearest node is index {nearest_index} ({nearest_value})"
    )]
    OffGrid {
        axis: String,
        asset: usize,
        value: f64,
        nearest_index: usize,
        nearest_value: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("artifact format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical kernels, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NonFiniteSample { .. }
                | Error::BondCap { .. }
                | Error::MemoryLimit { .. }
                | Error::TciNotConverged { .. }
                | Error::Linalg(_)
                | Error::KronrodExtension { .. }
        )
    }
}

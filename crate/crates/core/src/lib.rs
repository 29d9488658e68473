//! Tensor-train compressed Fourier pricing of multi-asset European options.
//!
//! The offline phase learns the parameter-dependent Fourier integrand as a
//! tensor train (TT) with tensor cross interpolation, sums out the Fourier
//! variables and leaves a compact TT indexed by volatility and spot grid
//! nodes. The online phase evaluates prices and Greeks by contracting one
//! slice per asset.
//!
//! Module map:
//! - [`tensor`]: complex tensor trains, TT operators and their algebra.
//! - [`tci`]: tensor cross interpolation of black-box tensors.
//! - [`grids`]: Gauss–Kronrod and Chebyshev–Lobatto axes, spectral differentiation.
//! - [`model`]: Black–Scholes characteristic function, min-call payoff transform, Greek factors.
//! - [`pipeline`]: offline price/Greek tensor construction and online evaluation.
//! - [`mc`]: Monte Carlo pricing, finite-difference and Malliavin Greeks.

pub mod error;
pub mod exec;
pub mod grids;
pub(crate) mod linalg;
pub mod mc;
pub mod model;
pub mod pipeline;
pub mod tci;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Execution;
pub use num_complex::Complex64 as C64;

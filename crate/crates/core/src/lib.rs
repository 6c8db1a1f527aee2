//! Inexact gradient descent for empirical risk minimization with a learned
//! gradient oracle.
//!
//! At every iteration the loss gradient is queried on a virtual uniform grid
//! `G_m ⊂ [0,1]^d` and the per-sample gradients are reconstructed by
//! multivariate local polynomial interpolation. The oracle cost per
//! iteration is therefore `m^d`, independent of the number of samples `n`.
//!
//! Module map:
//!
//! * [`multiindex`]: exponent tuples, the lexicographic basis layout and `U(u)`.
//! * [`kernels`]: bounded compactly supported kernels and their products.
//! * [`interpolation`]: uniform grids, the moment matrix `B(x)`, interpolation
//!   weights and the theory-mode `(m, h)` selectors.
//! * [`spectra`]: the integral matrix `∫ U Uᵀ` in exact arithmetic, its
//!   Legendre/Cholesky structure and the eigenvalue constant `Λ(d,l)` (log-space only).
//! * [`problems`]: losses, the counting first-order oracle, datasets and
//!   smoothness diagnostics.
//! * [`optimizer`]: LPI-GD, GD and SGD, schedules, bound evaluation and the
//!   inexact-descent trajectory checker.

pub mod error;
pub mod interpolation;
pub mod kernels;
pub mod multiindex;
pub mod optimizer;
pub mod problems;
pub mod spectra;

pub use error::{Error, Result};
pub use interpolation::{InterpConfig, LocalFit, UniformGrid};
pub use kernels::Kernel;
pub use multiindex::{BasisLayout, MultiIndex};
pub use optimizer::{RunReport, Schedule};
pub use problems::{CountingOracle, Dataset, LossProblem};

/// Default cap on the number of virtual grid points `m^d`.
pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

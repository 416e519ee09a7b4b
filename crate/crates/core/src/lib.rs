//! Gaussian covariance dynamics for lossy coupled-oscillator chains, with
//! analytic exceptional-point (EP) maps for the three-resonator case.
//!
//! All rates and times are expressed in units of the resonator coupling
//! `g`, which is fixed to one internally.
//!
//! Modules:
//! - [`gaussian`]: symplectic form, covariance matrices, matrix exponential,
//!   Lyapunov steady states, closed-form and Jordan-form propagation.
//! - [`chain`]: builders for the three-resonator chain and the analytic
//!   Jordan decompositions at its EP-2 and EP-3.
//! - [`epmap`]: branch functions, cubic discriminant, EP enumeration and
//!   classification.
//! - [`metrics`]: squeezing, purity, logarithmic negativity, reset fidelity,
//!   quasistable bounds and quasistabilization times.
//! - [`sweep`]: experiment configuration, result tables and the sweep
//!   drivers used by the `epgauss` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod epmap;
mod error;
pub mod gaussian;
pub mod metrics;
pub mod sweep;

pub use error::{Error, Result};
pub use chain::{ChainParams, EpsilonPoint, Frame};
pub use epmap::{EpBranch, EpPoint};
pub use metrics::{Channel, Trace};
pub use gaussian::{CovarianceMatrix, JordanDecomposition, LyapunovSystem, SymplecticForm};
pub use sweep::{Experiment, ExperimentConfig, ResultTable};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

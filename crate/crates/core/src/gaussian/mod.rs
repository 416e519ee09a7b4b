//! Frame-agnostic engines for N-mode quadratic open systems.
//!
//! The covariance matrix obeys the differential Lyapunov equation
//! `dV/dt = Γ V + V Γᵀ + D`. For time-independent `Γ`, `D` the solution is
//! `V(t) = e^{Γt} (V₀ − V_ss) e^{Γᵀt} + V_ss`, with `V_ss` the solution of the
//! algebraic equation `Γ V_ss + V_ss Γᵀ + D = 0`.

mod covariance;
mod expm;
mod jordan;
mod lyapunov;
mod symplectic;

pub use covariance::{check_uncertainty, symmetrize, CovarianceMatrix};
pub use expm::matrix_exp;
pub use jordan::{block_exp, propagate_jordan, JordanBlock, JordanDecomposition, JordanPropagation};
pub use lyapunov::{
    lyapunov_residual, propagate, solve_lyapunov_steady, LyapunovSystem, Propagator,
    HURWITZ_TOLERANCE,
};
pub use symplectic::{symplectic_form, SymplecticForm};

use nalgebra::DMatrix;

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

use nalgebra::{DMatrix, Matrix2, Matrix4};

use super::{max_abs, symplectic_form};
use crate::{Error, Result};

/// Relative asymmetry accepted when constructing a covariance matrix.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Real symmetric `2N×2N` covariance matrix of quadratures, vacuum variance 1/2.
///
/// Construction only enforces shape, finiteness and symmetry; physicality
/// (`V + iΩ/2 ≥ 0`) is a separate check so that unphysical inputs can still
/// be represented and rejected explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        validate_shape(&matrix)?;
        if !is_symmetric(&matrix) {
            return Err(Error::invalid("covariance matrix is not symmetric"));
        }
        Ok(CovarianceMatrix { matrix: symmetrize(&matrix) })
    }

    /// Symmetrizes first; for results of floating-point propagation.
    pub(crate) fn from_symmetrized(matrix: DMatrix<f64>) -> Self {
        CovarianceMatrix { matrix: symmetrize(&matrix) }
    }

    pub fn vacuum(n_modes: usize) -> Self {
        CovarianceMatrix { matrix: DMatrix::identity(2 * n_modes, 2 * n_modes) * 0.5 }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Reduced single-mode block `V^(j)` (zero-based mode index).
    pub fn mode_block(&self, j: usize) -> Matrix2<f64> {
        assert!(j < self.n_modes(), "mode index {j} out of range");
        self.matrix.fixed_view::<2, 2>(2 * j, 2 * j).into_owned()
    }

    /// Joint two-mode block `[[V^(j), C^(jk)], [C^(jk)ᵀ, V^(k)]]`.
    pub fn two_mode_block(&self, j: usize, k: usize) -> Matrix4<f64> {
        assert!(j != k && j < self.n_modes() && k < self.n_modes());
        let idx = [2 * j, 2 * j + 1, 2 * k, 2 * k + 1];
        Matrix4::from_fn(|a, b| self.matrix[(idx[a], idx[b])])
    }

    /// Smallest eigenvalue of the Hermitian matrix `V + iΩ/2`.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        min_eigenvalue_with_omega(&self.matrix)
    }

    pub fn check_uncertainty(&self, tol: f64) -> bool {
        self.uncertainty_min_eigenvalue() >= -tol
    }

    /// Uncertainty relation plus `√det V^(j) ≥ 1/2` for every mode.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.check_uncertainty(tol)
            && (0..self.n_modes()).all(|j| self.mode_block(j).determinant().max(0.0).sqrt() >= 0.5 - tol)
    }

    /// Largest absolute asymmetry `|V_ij − V_ji|`.
    pub fn asymmetry(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.transpose()))
    }
}

/// `true` iff the smallest eigenvalue of `V + iΩ/2` is at least `−tol`.
pub fn check_uncertainty(v: &DMatrix<f64>, tol: f64) -> Result<bool> {
    validate_shape(v)?;
    if !is_symmetric(v) {
        return Err(Error::invalid("uncertainty check needs a symmetric matrix"));
    }
    Ok(min_eigenvalue_with_omega(v) >= -tol)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn validate_shape(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 || !m.nrows().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "covariance matrix must be 2N×2N, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("covariance matrix has non-finite entries"));
    }
    Ok(())
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = max_abs(m).max(1.0);
    max_abs(&(m - m.transpose())) <= SYMMETRY_TOLERANCE * scale
}

// A Hermitian A + iB has the spectrum of the real symmetric [[A, −B], [B, A]],
// each eigenvalue repeated twice.
fn min_eigenvalue_with_omega(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows();
    let half_omega = symplectic_form(n / 2).expect("even dimension").into_matrix() * 0.5;
    let mut embed = DMatrix::zeros(2 * n, 2 * n);
    embed.view_mut((0, 0), (n, n)).copy_from(v);
    embed.view_mut((n, n), (n, n)).copy_from(v);
    embed.view_mut((0, n), (n, n)).copy_from(&(-&half_omega));
    embed.view_mut((n, 0), (n, n)).copy_from(&half_omega);
    let embed = symmetrize(&embed);
    embed.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_saturates_bound() {
        let v = CovarianceMatrix::vacuum(3);
        assert!(v.check_uncertainty(1e-12));
        assert!(v.uncertainty_min_eigenvalue().abs() < 1e-14);
    }

    #[test]
    fn sub_vacuum_variance_violates() {
        let v = CovarianceMatrix::from_diagonal(&[0.4, 0.4]).unwrap();
        assert!(!v.check_uncertainty(1e-10));
        assert!(!check_uncertainty(v.matrix(), 1e-10).unwrap());
    }

    #[test]
    fn pure_squeezed_state_is_valid() {
        let e2 = 1.0_f64.exp().powi(2);
        let v = CovarianceMatrix::from_diagonal(&[e2 / 2.0, 0.5 / e2]).unwrap();
        assert!(v.check_uncertainty(1e-10));
        assert!(v.is_physical(1e-10));
    }

    #[test]
    fn non_symmetric_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.5]);
        assert!(matches!(check_uncertainty(&m, 1e-9), Err(Error::InvalidInput(_))));
        assert!(CovarianceMatrix::new(m).is_err());
    }

    #[test]
    fn odd_dimension_is_rejected() {
        assert!(CovarianceMatrix::new(DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn blocks_are_extracted_in_mode_order() {
        let m = DMatrix::from_fn(6, 6, |i, j| (i.min(j) * 10 + i.max(j)) as f64);
        let v = CovarianceMatrix::new(m).unwrap();
        assert_eq!(v.mode_block(1)[(0, 1)], 23.0);
        let b = v.two_mode_block(0, 2);
        assert_eq!(b[(0, 2)], 4.0);
        assert_eq!(b[(1, 3)], 15.0);
        assert_eq!(b[(2, 3)], 45.0);
    }
}

use nalgebra::DMatrix;

use crate::{Error, Result};

/// The symplectic form `Ω = ⊕ [[0, 1], [−1, 0]]` for quadrature ordering
/// `(q₁, p₁, …, q_N, p_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n_modes: usize,
    matrix: DMatrix<f64>,
}

impl SymplecticForm {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

pub fn symplectic_form(n_modes: usize) -> Result<SymplecticForm> {
    if n_modes == 0 {
        return Err(Error::invalid("symplectic form needs at least one mode"));
    }
    let dim = 2 * n_modes;
    let mut matrix = DMatrix::zeros(dim, dim);
    for j in 0..n_modes {
        matrix[(2 * j, 2 * j + 1)] = 1.0;
        matrix[(2 * j + 1, 2 * j)] = -1.0;
    }
    Ok(SymplecticForm { n_modes, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_block() {
        let omega = symplectic_form(1).unwrap();
        assert_eq!(omega.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn squares_to_minus_identity() {
        let omega = symplectic_form(3).unwrap().into_matrix();
        assert_eq!(&omega * &omega, -DMatrix::<f64>::identity(6, 6));
        assert_eq!(omega.transpose(), -&omega);
    }

    #[test]
    fn orthogonal() {
        let omega = symplectic_form(2).unwrap().into_matrix();
        assert_eq!(omega.transpose() * &omega, DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(symplectic_form(0).is_err());
    }
}

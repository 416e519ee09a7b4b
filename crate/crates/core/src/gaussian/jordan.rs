use nalgebra::DMatrix;

use super::{max_abs, CovarianceMatrix};
use crate::{Error, Result, C64};

/// Condition numbers of `P` above this value flag the propagation result.
const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanBlock {
    pub eigenvalue: C64,
    pub size: usize,
}

/// `Γ = P J P⁻¹` with `J` block diagonal. Instances come from analytic
/// constructors (see `chain::jordan_ep2`/`jordan_ep3`); numerical Jordan
/// decomposition is not attempted.
#[derive(Debug, Clone)]
pub struct JordanDecomposition {
    p: DMatrix<C64>,
    p_inv: DMatrix<C64>,
    blocks: Vec<JordanBlock>,
    condition_number: f64,
}

impl JordanDecomposition {
    pub fn new(p: DMatrix<C64>, blocks: Vec<JordanBlock>) -> Result<Self> {
        let dim = p.nrows();
        if !p.is_square() || dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::invalid("P must be 2N×2N"));
        }
        if blocks.iter().map(|b| b.size).sum::<usize>() != dim {
            return Err(Error::invalid("Jordan block sizes must add up to the dimension of P"));
        }
        if let Some(b) = blocks.iter().find(|b| b.size == 0 || b.size > dim / 2) {
            return Err(Error::invalid(format!("Jordan block of size {} exceeds the mode count", b.size)));
        }
        let singular = p.clone().svd(false, false).singular_values;
        let smax = singular.max();
        let smin = singular.min();
        let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let p_inv = p
            .clone()
            .try_inverse()
            .filter(|_| condition_number.is_finite())
            .ok_or_else(|| Error::invalid("P is singular"))?;
        Ok(JordanDecomposition { p, p_inv, blocks, condition_number })
    }

    pub fn p(&self) -> &DMatrix<C64> {
        &self.p
    }

    pub fn p_inverse(&self) -> &DMatrix<C64> {
        &self.p_inv
    }

    pub fn blocks(&self) -> &[JordanBlock] {
        &self.blocks
    }

    /// 2-norm condition number of `P`.
    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn jordan_matrix(&self) -> DMatrix<C64> {
        let mut j = DMatrix::zeros(self.dim(), self.dim());
        let mut offset = 0;
        for b in &self.blocks {
            for k in 0..b.size {
                j[(offset + k, offset + k)] = b.eigenvalue;
                if k + 1 < b.size {
                    j[(offset + k, offset + k + 1)] = C64::new(1.0, 0.0);
                }
            }
            offset += b.size;
        }
        j
    }

    /// `max |ΓP − PJ|`.
    pub fn residual(&self, gamma: &DMatrix<f64>) -> f64 {
        let g = gamma.map(|x| C64::new(x, 0.0));
        (&g * &self.p - &self.p * self.jordan_matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `P e^{Jt} P⁻¹`, the real part of which is `e^{Γt}`.
    pub fn exp(&self, t: f64) -> Result<DMatrix<C64>> {
        let mut e = DMatrix::zeros(self.dim(), self.dim());
        let mut offset = 0;
        for b in &self.blocks {
            e.view_mut((offset, offset), (b.size, b.size)).copy_from(&block_exp(*b, t)?);
            offset += b.size;
        }
        Ok(&self.p * e * &self.p_inv)
    }
}

/// `e^{λt}` times the upper-triangular Toeplitz matrix with entries `t^k/k!`.
pub fn block_exp(block: JordanBlock, t: f64) -> Result<DMatrix<C64>> {
    if !(1..=3).contains(&block.size) {
        return Err(Error::UnsupportedBlockSize(block.size));
    }
    let scale = (block.eigenvalue * t).exp();
    let n = block.size;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut term = 1.0;
        for k in 0..n - i {
            if k > 0 {
                term *= t / k as f64;
            }
            out[(i, i + k)] = scale * term;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct JordanPropagation {
    pub cm: CovarianceMatrix,
    pub condition_number: f64,
    /// Set when `P` is too ill-conditioned for the result to be trusted.
    pub ill_conditioned: bool,
}

/// `V(t) = P e^{Jt} P⁻¹ (V₀ − V_ss) (P⁻¹)ᵀ e^{Jᵀt} Pᵀ + V_ss`.
pub fn propagate_jordan(
    jd: &JordanDecomposition,
    v0: &CovarianceMatrix,
    v_ss: &CovarianceMatrix,
    t: f64,
) -> Result<JordanPropagation> {
    if v0.matrix().nrows() != jd.dim() || v_ss.matrix().nrows() != jd.dim() {
        return Err(Error::invalid("covariance matrices do not match the decomposition"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("propagation time must be finite and ≥ 0, got {t}")));
    }
    let flow = jd.exp(t)?;
    let imag = flow.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let flow_re = flow.map(|z| z.re);
    let deviation = v0.matrix() - v_ss.matrix();
    let evolved = &flow_re * deviation * flow_re.transpose() + v_ss.matrix();
    let ill_conditioned = jd.condition_number > CONDITION_WARNING
        || imag > 1e-8 * max_abs(&flow_re).max(1.0);
    Ok(JordanPropagation {
        cm: CovarianceMatrix::from_symmetrized(evolved),
        condition_number: jd.condition_number,
        ill_conditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn block_exp_size_three() {
        let lambda = c(-0.4, 1.3);
        let t = 1.7;
        let e = block_exp(JordanBlock { eigenvalue: lambda, size: 3 }, t).unwrap();
        let s = (lambda * t).exp();
        let expected = [[1.0, t, t * t / 2.0], [0.0, 1.0, t], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((e[(i, j)] - s * expected[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn block_exp_small_sizes() {
        let lambda = c(-1.0, 0.0);
        let e1 = block_exp(JordanBlock { eigenvalue: lambda, size: 1 }, 2.0).unwrap();
        assert!((e1[(0, 0)].re - (-2.0f64).exp()).abs() < 1e-16);
        let e2 = block_exp(JordanBlock { eigenvalue: lambda, size: 2 }, 2.0).unwrap();
        assert!((e2[(0, 1)].re - 2.0 * (-2.0f64).exp()).abs() < 1e-16);
        assert_eq!(e2[(1, 0)], c(0.0, 0.0));
    }

    #[test]
    fn unsupported_block_sizes() {
        for size in [0, 4] {
            let b = JordanBlock { eigenvalue: c(0.0, 0.0), size };
            assert_eq!(block_exp(b, 1.0).unwrap_err(), Error::UnsupportedBlockSize(size));
        }
    }

    #[test]
    fn diagonal_decomposition_round_trip() {
        // Γ = diag(−1, −2) as a single 'mode'
        let p = DMatrix::identity(2, 2).map(|x: f64| c(x, 0.0));
        let blocks = vec![
            JordanBlock { eigenvalue: c(-1.0, 0.0), size: 1 },
            JordanBlock { eigenvalue: c(-2.0, 0.0), size: 1 },
        ];
        let jd = JordanDecomposition::new(p, blocks).unwrap();
        let gamma = DMatrix::from_diagonal(&nalgebra::dvector![-1.0, -2.0]);
        assert!(jd.residual(&gamma) < 1e-15);
        let v0 = CovarianceMatrix::from_diagonal(&[2.0, 0.125]).unwrap();
        let out = propagate_jordan(&jd, &v0, &v0, 0.0).unwrap();
        assert!((out.cm.matrix() - v0.matrix()).amax() < 1e-15);
        assert!(!out.ill_conditioned);
    }

    #[test]
    fn bad_block_sizes_are_rejected() {
        let p = DMatrix::identity(2, 2).map(|x: f64| c(x, 0.0));
        let blocks = vec![JordanBlock { eigenvalue: c(-1.0, 0.0), size: 2 }];
        assert!(JordanDecomposition::new(p.clone(), blocks).is_err());
        let blocks = vec![JordanBlock { eigenvalue: c(-1.0, 0.0), size: 1 }];
        assert!(JordanDecomposition::new(p, blocks).is_err());
    }

    #[test]
    fn singular_p_is_rejected() {
        let p = DMatrix::from_element(2, 2, c(1.0, 0.0));
        let blocks = vec![
            JordanBlock { eigenvalue: c(-1.0, 0.0), size: 1 },
            JordanBlock { eigenvalue: c(-2.0, 0.0), size: 1 },
        ];
        assert!(JordanDecomposition::new(p, blocks).is_err());
    }
}

//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (orders 3, 5, 7, 9, 13), after Higham, "The scaling and squaring method
//! for the matrix exponential revisited" (SIAM J. Matrix Anal. Appl., 2005).
//!
//! No eigendecomposition is involved, so defective matrices (the dynamical
//! matrix at an exceptional point) are handled like any other.

use nalgebra::DMatrix;

use crate::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// More squarings than this cannot produce a finite result in f64.
const MAX_SQUARINGS: i32 = 1100;

/// `e^{m t}` for a real square matrix.
pub fn matrix_exp(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::invalid("matrix exponential needs a square matrix"));
    }
    if !t.is_finite() || m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix exponential needs finite entries"));
    }
    let n = m.nrows();
    let a = m * t;
    let norm = one_norm(&a);
    if !norm.is_finite() {
        return Err(Error::Range(format!("‖m t‖₁ overflows ({norm:e})")));
    }
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }

    let result = if norm <= THETA_3 {
        pade_low(&a, &B3)
    } else if norm <= THETA_5 {
        pade_low(&a, &B5)
    } else if norm <= THETA_7 {
        pade_low(&a, &B7)
    } else if norm <= THETA_9 {
        pade_low(&a, &B9)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        if s > MAX_SQUARINGS {
            return Err(Error::Range(format!("‖m t‖₁ = {norm:e} is too large to exponentiate")));
        }
        let scaled = &a * 2f64.powi(-s);
        let mut x = pade13(&scaled)?;
        for _ in 0..s {
            x = &x * &x;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Range(format!("e^(m t) overflows (‖m t‖₁ = {norm:e})")));
            }
        }
        return Ok(x);
    }?;
    Ok(result)
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

// Orders 3..9: u = A Σ b_{2k+1} A^{2k}, v = Σ b_{2k} A^{2k}.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u_inner = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for k in 0..b.len() / 2 {
        v += &power * b[2 * k];
        u_inner += &power * b[2 * k + 1];
        power = &power * &a2;
    }
    let u = a * u_inner;
    solve_pade(u, v)
}

fn pade13(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let b = &B13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_high = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (u_high + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let v_high = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_high + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    solve_pade(u, v)
}

// r = (v − u)⁻¹ (v + u)
fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let denom = &v - &u;
    let numer = v + u;
    denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::NumericalDomain("singular Padé denominator".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_gives_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(matrix_exp(&z, 3.7).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn nilpotent_block_is_polynomial() {
        let mut n3 = DMatrix::<f64>::zeros(3, 3);
        n3[(0, 1)] = 1.0;
        n3[(1, 2)] = 1.0;
        for &t in &[0.3, 1.0, 2.5, 7.0] {
            let e = matrix_exp(&n3, t).unwrap();
            let expected =
                DMatrix::from_row_slice(3, 3, &[1.0, t, t * t / 2.0, 0.0, 1.0, t, 0.0, 0.0, 1.0]);
            assert!((e - expected).amax() < 1e-12 * (1.0 + t * t));
        }
    }

    #[test]
    fn scalar_matches_exp() {
        for &x in &[-30.0, -2.0, 1e-9, 0.5, 3.0, 40.0] {
            let e = matrix_exp(&DMatrix::from_element(1, 1, x), 1.0).unwrap()[(0, 0)];
            let rel = (e - f64::exp(x)).abs() / f64::exp(x); assert!(rel <= 1e-13, "x={x} rel={rel:e}");
        }
    }

    #[test]
    fn rotation_generator() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let t = 5000.0 * 0.01;
        let e = matrix_exp(&w, t).unwrap();
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-12);
        assert!((e[(0, 1)] - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_a_range_error() {
        let m = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(matrix_exp(&m, 1e4), Err(Error::Range(_))));
        assert!(matches!(matrix_exp(&m, 1e308), Err(Error::Range(_))));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(matrix_exp(&m, 1.0), Err(Error::InvalidInput(_))));
    }
}

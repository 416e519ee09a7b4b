use nalgebra::DMatrix;

use super::{matrix_exp, max_abs, symmetrize, CovarianceMatrix};
use crate::{Error, Result};

/// Real parts of the spectrum must lie below `−HURWITZ_TOLERANCE`.
pub const HURWITZ_TOLERANCE: f64 = 1e-12;

const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// The pair `(Γ, D)` of `dV/dt = ΓV + VΓᵀ + D`, optionally carrying a
/// stationary covariance matrix.
///
/// A cached stationary matrix only needs to satisfy the algebraic equation;
/// it does not have to be unique. This lets builders attach the analytic
/// vacuum even when some decay rate is zero, while
/// [`solve_lyapunov_steady`] still refuses non-Hurwitz systems.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSystem {
    gamma: DMatrix<f64>,
    diffusion: DMatrix<f64>,
    steady_state: Option<CovarianceMatrix>,
}

impl LyapunovSystem {
    pub fn new(gamma: DMatrix<f64>, diffusion: DMatrix<f64>) -> Result<Self> {
        let n = gamma.nrows();
        if !gamma.is_square() || n == 0 || !n.is_multiple_of(2) {
            return Err(Error::invalid("Γ must be 2N×2N"));
        }
        if diffusion.shape() != gamma.shape() {
            return Err(Error::invalid("D must have the shape of Γ"));
        }
        if gamma.iter().chain(diffusion.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("Γ and D must be finite"));
        }
        let scale = max_abs(&diffusion).max(1.0);
        if max_abs(&(&diffusion - diffusion.transpose())) > 1e-12 * scale {
            return Err(Error::invalid("D must be symmetric"));
        }
        let diffusion = symmetrize(&diffusion);
        let min_eig = diffusion.symmetric_eigenvalues().min();
        if min_eig < -1e-12 * scale {
            return Err(Error::invalid(format!("D must be positive semidefinite (min eigenvalue {min_eig:e})")));
        }
        Ok(LyapunovSystem { gamma, diffusion, steady_state: None })
    }

    /// Attaches a stationary covariance matrix after checking the residual.
    pub fn with_steady_state(mut self, v_ss: CovarianceMatrix) -> Result<Self> {
        if v_ss.matrix().shape() != self.gamma.shape() {
            return Err(Error::invalid("steady state has the wrong dimension"));
        }
        let residual = lyapunov_residual(&self.gamma, &self.diffusion, v_ss.matrix());
        if residual > RESIDUAL_TOLERANCE * max_abs(&self.diffusion).max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(format!("matrix is not stationary (residual {residual:e})")));
        }
        self.steady_state = Some(v_ss);
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.gamma.nrows() / 2
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn steady_state(&self) -> Option<&CovarianceMatrix> {
        self.steady_state.as_ref()
    }

    /// Largest real part in the spectrum of Γ.
    pub fn spectral_abscissa(&self) -> f64 {
        self.gamma.complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.spectral_abscissa() < -HURWITZ_TOLERANCE
    }

    /// Cached stationary matrix, or the unique one when Γ is Hurwitz.
    pub fn stationary(&self) -> Result<CovarianceMatrix> {
        match &self.steady_state {
            Some(v) => Ok(v.clone()),
            None => solve_lyapunov_steady(self),
        }
    }
}

/// `max |ΓV + VΓᵀ + D|`.
pub fn lyapunov_residual(gamma: &DMatrix<f64>, diffusion: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    max_abs(&(gamma * v + v * gamma.transpose() + diffusion))
}

/// Solves `ΓV + VΓᵀ + D = 0` by vectorization:
/// `(I ⊗ Γ + Γ ⊗ I) vec V = −vec D`, with one step of iterative refinement.
pub fn solve_lyapunov_steady(sys: &LyapunovSystem) -> Result<CovarianceMatrix> {
    let max_real = sys.spectral_abscissa();
    if max_real >= -HURWITZ_TOLERANCE {
        return Err(Error::NotHurwitz { max_real });
    }
    let n = sys.gamma.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let op = ident.kronecker(&sys.gamma) + sys.gamma.kronecker(&ident);
    let rhs = -DMatrix::from_column_slice(n * n, 1, sys.diffusion.as_slice());
    let lu = op.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalDomain("singular Lyapunov operator".into()))?;
    let correction = lu
        .solve(&(&rhs - &op * &x))
        .ok_or_else(|| Error::NumericalDomain("singular Lyapunov operator".into()))?;
    x += correction;
    let v = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok(CovarianceMatrix::from_symmetrized(v))
}

/// `V(t) = e^{Γt}(V₀ − V_ss)e^{Γᵀt} + V_ss`.
pub fn propagate(sys: &LyapunovSystem, v0: &CovarianceMatrix, t: f64) -> Result<CovarianceMatrix> {
    Propagator::new(sys)?.at(v0, t)
}

/// Closed-form propagation with the stationary matrix resolved once.
#[derive(Debug, Clone)]
pub struct Propagator {
    gamma: DMatrix<f64>,
    v_ss: CovarianceMatrix,
}

impl Propagator {
    pub fn new(sys: &LyapunovSystem) -> Result<Self> {
        Ok(Propagator { gamma: sys.gamma.clone(), v_ss: sys.stationary()? })
    }

    pub fn steady_state(&self) -> &CovarianceMatrix {
        &self.v_ss
    }

    pub fn at(&self, v0: &CovarianceMatrix, t: f64) -> Result<CovarianceMatrix> {
        self.check_initial(v0, t)?;
        let deviation = v0.matrix() - self.v_ss.matrix();
        let evolved = self.evolve_deviation(&deviation, t)?;
        Ok(CovarianceMatrix::from_symmetrized(evolved + self.v_ss.matrix()))
    }

    /// `e^{Γt} X e^{Γᵀt}` for an arbitrary deviation `X` from the stationary matrix.
    pub fn evolve_deviation(&self, deviation: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        let e = matrix_exp(&self.gamma, t)?;
        Ok(&e * deviation * e.transpose())
    }

    /// States at `t = k·dt` for `k = 0..=steps`, by repeated application of
    /// `e^{Γ dt}` (symmetrized after every step).
    pub fn sample(&self, v0: &CovarianceMatrix, dt: f64, steps: usize) -> Result<Vec<CovarianceMatrix>> {
        self.check_initial(v0, 0.0)?;
        let deviation = v0.matrix() - self.v_ss.matrix();
        let out = self.sample_deviation(&deviation, dt, steps)?;
        Ok(out.into_iter().map(|x| CovarianceMatrix::from_symmetrized(x + self.v_ss.matrix())).collect())
    }

    /// `e^{Γ k dt} X e^{Γᵀ k dt}` for `k = 0..=steps`.
    pub fn sample_deviation(&self, deviation: &DMatrix<f64>, dt: f64, steps: usize) -> Result<Vec<DMatrix<f64>>> {
        if deviation.shape() != self.gamma.shape() {
            return Err(Error::invalid("deviation has the wrong dimension"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("sampling step must be positive"));
        }
        let step = matrix_exp(&self.gamma, dt)?;
        let step_t = step.transpose();
        let mut current = symmetrize(deviation);
        let mut out = Vec::with_capacity(steps + 1);
        out.push(current.clone());
        for _ in 0..steps {
            current = symmetrize(&(&step * &current * &step_t));
            out.push(current.clone());
        }
        Ok(out)
    }

    fn check_initial(&self, v0: &CovarianceMatrix, t: f64) -> Result<()> {
        if v0.matrix().shape() != self.gamma.shape() {
            return Err(Error::invalid("initial covariance matrix has the wrong dimension"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("propagation time must be finite and ≥ 0, got {t}")));
        }
        Ok(())
    }
}

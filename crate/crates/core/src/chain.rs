//! Builders for the three-resonator chain R1–R2–R3 with nearest-neighbour
//! coupling `g` (fixed to 1) and individual losses `κ_j`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::gaussian::{max_abs, CovarianceMatrix, JordanBlock, JordanDecomposition, LyapunovSystem, Propagator};
use crate::{epmap, Error, Result, C64};

/// Resonator–resonator coupling; every rate and frequency is in these units.
pub const COUPLING: f64 = 1.0;

const JORDAN_RESIDUAL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Laboratory frame; `omega1` is the angular frequency of R1.
    Lab { omega1: f64 },
    /// Frame rotating at the frequency of R1, so that `ω₁ → 0`.
    RotatingAtOmega1,
}

impl Frame {
    pub fn omega1(&self) -> f64 {
        match self {
            Frame::Lab { omega1 } => *omega1,
            Frame::RotatingAtOmega1 => 0.0,
        }
    }
}

/// Physical parameters of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    omega: [f64; 3],
    kappa: [f64; 3],
    frame: Frame,
}

impl ChainParams {
    /// In the rotating frame `omega` holds `(0, δ₂, δ₃)`.
    pub fn new(omega: [f64; 3], kappa: [f64; 3], frame: Frame) -> Result<Self> {
        if omega.iter().chain(kappa.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("chain parameters must be finite"));
        }
        if let Some(k) = kappa.iter().find(|k| **k < 0.0) {
            return Err(Error::UnphysicalParameters(format!("negative decay rate {k}")));
        }
        match frame {
            Frame::RotatingAtOmega1 if omega[0] != 0.0 => {
                return Err(Error::invalid("rotating frame requires omega[0] = 0"))
            }
            Frame::Lab { omega1 } if omega1 != omega[0] => {
                return Err(Error::invalid("lab frame omega1 must equal omega[0]"))
            }
            _ => {}
        }
        Ok(ChainParams { omega, kappa, frame })
    }

    /// Degenerate resonators (`δ₂ = δ₃ = 0`).
    pub fn degenerate(kappa: [f64; 3], frame: Frame) -> Result<Self> {
        let w = frame.omega1();
        Self::new([w; 3], kappa, frame)
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    pub fn kappa(&self) -> [f64; 3] {
        self.kappa
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// `(δ₂, δ₃)` relative to R1.
    pub fn detunings(&self) -> [f64; 2] {
        [self.omega[1] - self.omega[0], self.omega[2] - self.omega[0]]
    }

    /// Same physical chain described in another frame.
    pub fn in_frame(&self, frame: Frame) -> ChainParams {
        let [d2, d3] = self.detunings();
        let w = frame.omega1();
        ChainParams { omega: [w, w + d2, w + d3], kappa: self.kappa, frame }
    }

    /// Offsets of R2 and R3 relative to R1 expressed as complex `ε_k`.
    pub fn epsilon(&self) -> EpsilonPoint {
        let [d2, d3] = self.detunings();
        let k1 = self.kappa[0];
        let to_eps = |kappa: f64, delta: f64| {
            C64::new((kappa - k1) / (2.0 * SQRT_2 * COUPLING), delta / (SQRT_2 * COUPLING))
        };
        EpsilonPoint { eps2: to_eps(self.kappa[1], d2), eps3: to_eps(self.kappa[2], d3) }
    }
}

/// Complex offsets `ε₂`, `ε₃`: `δ_k = √2 g Im ε_k`, `κ_k = κ₁ + 2√2 g Re ε_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonPoint {
    pub eps2: C64,
    pub eps3: C64,
}

impl EpsilonPoint {
    pub fn new(eps2: C64, eps3: C64) -> Self {
        EpsilonPoint { eps2, eps3 }
    }

    /// Degenerate resonators, decay-rate offsets only.
    pub fn real(eps2: f64, eps3: f64) -> Self {
        EpsilonPoint { eps2: C64::new(eps2, 0.0), eps3: C64::new(eps3, 0.0) }
    }
}

pub fn params_from_epsilon(kappa1: f64, ep: EpsilonPoint, frame: Frame) -> Result<ChainParams> {
    if !(kappa1 >= 0.0) {
        return Err(Error::UnphysicalParameters(format!("kappa1 = {kappa1} must be ≥ 0")));
    }
    let kappa_of = |e: C64| kappa1 + 2.0 * SQRT_2 * COUPLING * e.re;
    let delta_of = |e: C64| SQRT_2 * COUPLING * e.im;
    let kappa = [kappa1, kappa_of(ep.eps2), kappa_of(ep.eps3)];
    if kappa[1] < 0.0 || kappa[2] < 0.0 {
        return Err(Error::UnphysicalParameters(format!(
            "epsilon offsets give negative decay rates (kappa2 = {}, kappa3 = {})",
            kappa[1], kappa[2]
        )));
    }
    let w = frame.omega1();
    ChainParams::new([w, w + delta_of(ep.eps2), w + delta_of(ep.eps3)], kappa, frame)
}

/// `Γ = [[K₁, G, 0], [G, K₂, G], [0, G, K₃]]`, `D = ⊕ κ_j I/2`, with the
/// vacuum attached as stationary state.
pub fn build_system(p: &ChainParams) -> LyapunovSystem {
    let mut gamma = DMatrix::zeros(6, 6);
    let mut diffusion = DMatrix::zeros(6, 6);
    for j in 0..3 {
        let (k, w) = (p.kappa[j], p.omega[j]);
        let b = 2 * j;
        gamma[(b, b)] = -k / 2.0;
        gamma[(b + 1, b + 1)] = -k / 2.0;
        gamma[(b, b + 1)] = w;
        gamma[(b + 1, b)] = -w;
        diffusion[(b, b)] = k / 2.0;
        diffusion[(b + 1, b + 1)] = k / 2.0;
    }
    for (j, k) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
        gamma[(2 * j, 2 * k + 1)] = COUPLING;
        gamma[(2 * j + 1, 2 * k)] = -COUPLING;
    }
    LyapunovSystem::new(gamma, diffusion)
        .and_then(|s| s.with_steady_state(CovarianceMatrix::vacuum(3)))
        .expect("chain system is well formed by construction")
}

/// Vacuum on R1 and R2, R3 squeezed: `diag(1, 1, 1, 1, e^{2r}, e^{−2r}) / 2`.
pub fn initial_squeezed_cm(r: f64) -> Result<CovarianceMatrix> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("squeezing parameter must be finite and ≥ 0, got {r}")));
    }
    let e = (2.0 * r).exp();
    CovarianceMatrix::from_diagonal(&[0.5, 0.5, 0.5, 0.5, 0.5 * e, 0.5 / e])
}

/// `Γ' = Λ diag(−i(H + ω₁), i(H* + ω₁)) Λ†` in the block ordering
/// `(q₁, q₂, q₃, p₁, p₂, p₃)`.
pub fn gamma_from_nonhermitian(h: &Matrix3<C64>, omega1: f64) -> Result<DMatrix<f64>> {
    let tiny = 1e-12 * h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if h[(0, 2)].norm() > tiny || h[(2, 0)].norm() > tiny {
        return Err(Error::invalid("effective Hamiltonian must be tridiagonal (no R1–R3 coupling)"));
    }
    if (h[(0, 1)] - h[(1, 0)]).norm() > tiny || (h[(1, 2)] - h[(2, 1)]).norm() > tiny {
        return Err(Error::invalid("effective Hamiltonian couplings must be symmetric"));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("effective Hamiltonian must be finite"));
    }
    let i = C64::new(0.0, 1.0);
    let shifted = h + Matrix3::identity() * C64::new(omega1, 0.0);
    let mut block = DMatrix::<C64>::zeros(6, 6);
    block.view_mut((0, 0), (3, 3)).copy_from(&(shifted * -i));
    block.view_mut((3, 3), (3, 3)).copy_from(&(shifted.conjugate() * i));
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut lambda = DMatrix::<C64>::zeros(6, 6);
    for k in 0..3 {
        lambda[(k, k)] = s;
        lambda[(k, k + 3)] = s;
        lambda[(k + 3, k)] = -i * s;
        lambda[(k + 3, k + 3)] = i * s;
    }
    let full = &lambda * block * lambda.adjoint();
    let imag = full.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-12 * full.iter().map(|z| z.norm()).fold(1.0, f64::max) {
        return Err(Error::NumericalDomain(format!("Γ' has an imaginary part {imag:e}")));
    }
    Ok(full.map(|z| z.re))
}

/// Reorders a matrix from `(q₁, q₂, q₃, p₁, p₂, p₃)` to `(q₁, p₁, q₂, p₂, q₃, p₃)`.
pub fn interleave_quadratures(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() / 2;
    let src = |k: usize| if k.is_multiple_of(2) { k / 2 } else { n + k / 2 };
    DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| m[(src(a), src(b))])
}

/// Lifts a mode-space map `a ↦ M a` (no `a†` admixture) to quadratures,
/// ordering `(q₁, p₁, …)`.
pub fn lift_mode_map(m: &Matrix3<C64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(6, 6);
    for j in 0..3 {
        for k in 0..3 {
            let z = m[(j, k)];
            out[(2 * j, 2 * k)] = z.re;
            out[(2 * j, 2 * k + 1)] = -z.im;
            out[(2 * j + 1, 2 * k)] = z.im;
            out[(2 * j + 1, 2 * k + 1)] = z.re;
        }
    }
    out
}

/// Spectral projector (in quadrature space) onto the least-damped normal mode
/// of the chain. It is used to build the quasistable reference trajectory:
/// the part of the dynamics that survives once all faster modes have decayed.
pub fn slow_mode_projector(p: &ChainParams) -> Result<DMatrix<f64>> {
    let h = epmap::effective_hamiltonian(p);
    let modes = epmap::normal_modes(&h)?;
    let (slow_idx, slow) = modes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.eigenvalue.im.total_cmp(&b.1.eigenvalue.im))
        .expect("three modes");
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let degenerate = modes
        .iter()
        .enumerate()
        .any(|(k, m)| k != slow_idx && (m.eigenvalue - slow.eigenvalue).norm() < 1e-8 * scale);
    if degenerate {
        return Err(Error::NumericalDomain("slowest normal mode is degenerate".into()));
    }
    // H is complex symmetric, so the left eigenvector is the transpose of the right one.
    let v = slow.vector;
    let norm = (v.transpose() * v)[(0, 0)];
    if norm.norm() < 1e-10 {
        return Err(Error::NumericalDomain("self-orthogonal slow mode (exceptional point)".into()));
    }
    Ok(lift_mode_map(&(v * v.transpose() / norm)))
}

/// Quasistable reference trajectory `V_ss + e^{Γt} Π X Πᵀ e^{Γᵀt}`, with
/// `X = V₀ − V_ss` and `Π` the slow-mode projector, sampled at `t = k·dt`.
/// Metrics evaluated on it give the plateau that a trace settles onto once
/// the fast modes have decayed.
pub fn quasistable_reference(p: &ChainParams, v0: &CovarianceMatrix, dt: f64, steps: usize) -> Result<Vec<CovarianceMatrix>> {
    let proj = slow_mode_projector(p)?;
    let propagator = Propagator::new(&build_system(p))?;
    let vss = propagator.steady_state().matrix().clone();
    if v0.matrix().shape() != vss.shape() {
        return Err(Error::invalid("initial covariance matrix must describe three modes"));
    }
    let projected = &proj * (v0.matrix() - &vss) * proj.transpose();
    propagator
        .sample_deviation(&projected, dt, steps)?
        .into_iter()
        .map(|x| CovarianceMatrix::new(x + &vss))
        .collect()
}

/// Analytic Jordan decomposition of Γ at the EP-3 reached with degenerate
/// resonators, `κ₂ = κ₁ + 2√2 g`, `κ₃ = κ₁ + 4√2 g`.
pub fn jordan_ep3(kappa1: f64, omega: f64) -> Result<JordanDecomposition> {
    let g = COUPLING;
    let lambda = |sign: f64| C64::new(-(kappa1 + 2.0 * SQRT_2 * g) / 2.0, sign * omega);
    let r2 = SQRT_2;
    #[rustfmt::skip]
    let p = complex_rows(&[
        [(0., -1.), (0., -r2 / g), (0., -1. / (g * g)), (0., 1.), (0., r2 / g), (0., 1. / (g * g))],
        [(-1., 0.), (-r2 / g, 0.), (-1. / (g * g), 0.), (-1., 0.), (-r2 / g, 0.), (-1. / (g * g), 0.)],
        [(-r2, 0.), (-1. / g, 0.), (0., 0.), (-r2, 0.), (-1. / g, 0.), (0., 0.)],
        [(0., r2), (0., 1. / g), (0., 0.), (0., -r2), (0., -1. / g), (0., 0.)],
        [(0., 1.), (0., 0.), (0., 0.), (0., -1.), (0., 0.), (0., 0.)],
        [(1., 0.), (0., 0.), (0., 0.), (1., 0.), (0., 0.), (0., 0.)],
    ]);
    let blocks = vec![
        JordanBlock { eigenvalue: lambda(-1.0), size: 3 },
        JordanBlock { eigenvalue: lambda(1.0), size: 3 },
    ];
    let params = ep_params(kappa1, omega, [2.0 * SQRT_2, 4.0 * SQRT_2])?;
    validated(JordanDecomposition::new(p, blocks)?, &params, "EP-3")
}

/// Analytic Jordan decomposition of Γ at the EP-2 reached with degenerate
/// resonators, `κ₂ = κ₁ + 4√2 g`, `κ₃ = κ₁`.
pub fn jordan_ep2(kappa1: f64, omega: f64) -> Result<JordanDecomposition> {
    let g = COUPLING;
    let slow = |sign: f64| C64::new(-kappa1 / 2.0, sign * omega);
    let fast = |sign: f64| C64::new(-(kappa1 + 2.0 * SQRT_2 * g) / 2.0, sign * omega);
    let r2 = SQRT_2;
    #[rustfmt::skip]
    let p = complex_rows(&[
        [(0., -1.), (0., 1.), (0., 0.), (0., 1.), (0., -1.), (0., 0.)],
        [(-1., 0.), (1., 0.), (0., 0.), (-1., 0.), (1., 0.), (0., 0.)],
        [(0., 0.), (r2, 0.), (-1. / g, 0.), (0., 0.), (r2, 0.), (-1. / g, 0.)],
        [(0., 0.), (0., -r2), (0., 1. / g), (0., 0.), (0., r2), (0., -1. / g)],
        [(0., 1.), (0., 1.), (0., 0.), (0., -1.), (0., -1.), (0., 0.)],
        [(1., 0.), (1., 0.), (0., 0.), (1., 0.), (1., 0.), (0., 0.)],
    ]);
    let blocks = vec![
        JordanBlock { eigenvalue: slow(-1.0), size: 1 },
        JordanBlock { eigenvalue: fast(-1.0), size: 2 },
        JordanBlock { eigenvalue: slow(1.0), size: 1 },
        JordanBlock { eigenvalue: fast(1.0), size: 2 },
    ];
    let params = ep_params(kappa1, omega, [4.0 * SQRT_2, 0.0])?;
    validated(JordanDecomposition::new(p, blocks)?, &params, "EP-2")
}

/// Jordan decomposition for parameters sitting at one of the catalogued EPs.
pub fn jordan_at(p: &ChainParams) -> Result<JordanDecomposition> {
    let [d2, d3] = p.detunings();
    let [k1, k2, k3] = p.kappa;
    let tol = 1e-9 * (1.0 + k1.abs());
    if d2.abs() > tol || d3.abs() > tol {
        return Err(Error::WrongEp("catalogued EPs require degenerate resonators".into()));
    }
    let near = |x: f64, target: f64| (x - target).abs() <= tol;
    if near(k2 - k1, 2.0 * SQRT_2) && near(k3 - k1, 4.0 * SQRT_2) {
        jordan_ep3(k1, p.omega[0])
    } else if near(k2 - k1, 4.0 * SQRT_2) && near(k3 - k1, 0.0) {
        jordan_ep2(k1, p.omega[0])
    } else {
        Err(Error::WrongEp(format!("kappa = {:?} is neither the EP-2 nor the EP-3 of the chain", p.kappa)))
    }
}

fn ep_params(kappa1: f64, omega: f64, offsets: [f64; 2]) -> Result<ChainParams> {
    if !(kappa1 >= 0.0 && omega.is_finite()) {
        return Err(Error::WrongEp(format!("kappa1 = {kappa1}, omega = {omega} do not describe a physical EP")));
    }
    let frame = if omega == 0.0 { Frame::RotatingAtOmega1 } else { Frame::Lab { omega1: omega } };
    ChainParams::degenerate([kappa1, kappa1 + offsets[0], kappa1 + offsets[1]], frame)
}

fn validated(jd: JordanDecomposition, params: &ChainParams, label: &str) -> Result<JordanDecomposition> {
    let gamma = build_system(params).gamma().clone();
    let residual = jd.residual(&gamma);
    if residual > JORDAN_RESIDUAL * max_abs(&gamma) {
        return Err(Error::WrongEp(format!("{label} Jordan data does not match Γ (residual {residual:e})")));
    }
    Ok(jd)
}

fn complex_rows(rows: &[[(f64, f64); 6]; 6]) -> DMatrix<C64> {
    DMatrix::from_fn(6, 6, |i, j| C64::new(rows[i][j].0, rows[i][j].1))
}

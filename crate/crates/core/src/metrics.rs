//! Observables of Gaussian states and the figures of merit of the
//! stabilization and reset protocols.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4};

use crate::gaussian::CovarianceMatrix;
use crate::{Error, Result};

/// Fit constants of the quasistabilization envelopes.
pub const Y_R1: f64 = 0.75;
pub const Y_E13: f64 = 1.3;
pub const Z_R1: f64 = 0.5;
pub const Z_E13: f64 = 1.0;

const DET_TOLERANCE: f64 = 1e-10;
const NEGATIVITY_CLAMP: f64 = 1e-12;

/// Squeezed-thermal parametrization of a single-mode covariance block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleModeDecomposition {
    pub r: f64,
    pub phi: f64,
    pub n_bar: f64,
    pub purity: f64,
}

pub fn single_mode_decomposition(v: &Matrix2<f64>) -> Result<SingleModeDecomposition> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("covariance block must be finite"));
    }
    if (v[(0, 1)] - v[(1, 0)]).abs() > 1e-12 * v.amax().max(1.0) {
        return Err(Error::invalid("covariance block must be symmetric"));
    }
    let det = v.determinant();
    if det < 0.25 - DET_TOLERANCE {
        return Err(Error::UnphysicalState(format!("single-mode determinant {det} below 1/4")));
    }
    let n_bar = (det.max(0.25).sqrt() - 0.5).max(0.0);
    let (a, b, c) = (v[(0, 0)], v[(1, 1)], 0.5 * (v[(0, 1)] + v[(1, 0)]));
    let spread = ((a - b).powi(2) + 4.0 * c * c).sqrt();
    Ok(SingleModeDecomposition {
        r: 0.5 * (spread / (2.0 * (n_bar + 0.5))).asinh(),
        phi: (2.0 * c).atan2(a - b),
        n_bar,
        purity: 1.0 / (2.0 * n_bar + 1.0),
    })
}

/// Logarithmic negativity of a two-mode covariance matrix, ordering
/// `(q_j, p_j, q_k, p_k)`.
pub fn log_negativity(v: &Matrix4<f64>) -> Result<f64> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("covariance matrix must be finite"));
    }
    let block = |r: usize, c: usize| v.fixed_view::<2, 2>(r, c).determinant();
    let delta = block(0, 0) + block(2, 2) - 2.0 * block(0, 2);
    let det = v.determinant();
    let disc = delta * delta - 4.0 * det;
    let nu_sq = if disc >= DEGENERATE_SPECTRUM * delta * delta {
        // (Δ − √disc)/2 rewritten to avoid cancellation for strongly entangled states.
        2.0 * det / (delta + disc.sqrt())
    } else {
        // Nearly equal symplectic eigenvalues: √disc has only half the working
        // precision, so take ν̃⁻ from a symmetric eigenproblem instead.
        partially_transposed_min_nu_sq(v)?
    };
    if !(nu_sq > 0.0) {
        return Err(Error::NumericalDomain(format!("non-positive symplectic eigenvalue² {nu_sq:e}")));
    }
    let e = -(2.0 * nu_sq.sqrt()).log2();
    // ν̃⁻ = 1/2 exactly for product states; rounding must not report entanglement.
    Ok(if e <= NEGATIVITY_CLAMP { 0.0 } else { e })
}

/// Below this `disc/Δ̃²` the closed form for `ν̃⁻` is replaced by an eigensolve.
const DEGENERATE_SPECTRUM: f64 = 1e-4;

/// Smallest `ν̃²` of the partial transpose `Ṽ`: the eigenvalues of `−M²` with
/// `M = Ṽ^{1/2} Ω Ṽ^{1/2}` are the squared symplectic eigenvalues.
fn partially_transposed_min_nu_sq(v: &Matrix4<f64>) -> Result<f64> {
    let mut pt = (v + v.transpose()) * 0.5;
    for k in 0..4 {
        if k != 3 {
            pt[(3, k)] = -pt[(3, k)];
            pt[(k, 3)] = -pt[(k, 3)];
        }
    }
    let eig = pt.symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::NumericalDomain("covariance matrix is not positive definite".into()));
    }
    let root = eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    #[rustfmt::skip]
    let omega = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
    );
    let m = root * omega * root;
    Ok((m.transpose() * m).symmetric_eigen().eigenvalues.min())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetFidelity {
    pub fidelity: f64,
    pub infidelity: f64,
}

/// Overlap with the multimode vacuum, `F = 1/√det(V + V_ss)`, for a zero-mean state.
pub fn reset_fidelity(v: &CovarianceMatrix) -> ResetFidelity {
    let m = v.matrix();
    let n = m.nrows();
    let sum = m + nalgebra::DMatrix::<f64>::identity(n, n) * 0.5;
    // V + V_ss is positive definite for any physical V; Cholesky keeps the determinant accurate.
    let fidelity = match sum.clone().cholesky() {
        Some(ch) => {
            let log_det: f64 = ch.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
            (-0.5 * log_det).exp()
        }
        None => 1.0 / sum.determinant().sqrt(),
    };
    let fidelity = fidelity.min(1.0);
    ResetFidelity { fidelity, infidelity: 1.0 - fidelity }
}

/// Long-time values reached from `V₀(r)` at the EP-2 when `κ₁ = κ₃ → 0`.
/// `r₂*`, `N̄₂*`, `E₁₂*` and `E₂₃*` vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasistableBounds {
    pub r_star: f64,
    pub n_bar_star: f64,
    pub e13_star: f64,
}

impl QuasistableBounds {
    pub fn purity_star(&self) -> f64 {
        1.0 / (2.0 * self.n_bar_star + 1.0)
    }
}

pub fn quasistable_bounds(r: f64) -> Result<QuasistableBounds> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("squeezing parameter must be finite and ≥ 0, got {r}")));
    }
    let root = (10.0 + 6.0 * (2.0 * r).cosh()).sqrt();
    Ok(QuasistableBounds {
        r_star: 0.5 * ((3.0 + (2.0 * r).exp()) / root).ln(),
        n_bar_star: (root - 4.0) / 8.0,
        e13_star: 0.5 * (1.0 - (-2.0 * r).exp().ln_1p() / std::f64::consts::LN_2),
    })
}

/// Squeezing in decibels, `10 log₁₀ e^{2r}`.
pub fn squeezing_db(r: f64) -> f64 {
    20.0 * r * std::f64::consts::LOG10_E
}

/// Inverse of [`squeezing_db`].
pub fn squeezing_from_db(db: f64) -> f64 {
    db / (20.0 * std::f64::consts::LOG10_E)
}

/// Parameters of the fitted quasistabilization envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub r_star: f64,
    pub e_star: f64,
    pub kappa1: f64,
    pub kappa_minus: f64,
    pub delta_minus: f64,
    pub y_r1: f64,
    pub y_e: f64,
}

impl FitParams {
    pub fn new(r_star: f64, e_star: f64, kappa1: f64, kappa_minus: f64, delta_minus: f64) -> Self {
        FitParams { r_star, e_star, kappa1, kappa_minus, delta_minus, y_r1: Y_R1, y_e: Y_E13 }
    }
}

/// `(r₁_fit(t), E₁₃_fit(t))`.
pub fn fit_curves(t: f64, p: &FitParams) -> Result<(f64, f64)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("fit time must be finite and ≥ 0, got {t}")));
    }
    let osc = (p.delta_minus * t).cos();
    let r1 = p.r_star / 2.0
        * (-p.y_r1 * p.kappa1 * t).exp()
        * ((-p.kappa_minus * t / 2.0).exp() * (1.0 - 3.0 * osc) + 2.0);
    let e13 = p.e_star * (-p.y_e * p.kappa1 * t).exp() * (1.0 - (-p.kappa_minus * t).exp() * osc * osc);
    Ok((r1, e13))
}

/// `t ≈ log(α*/σ)/(y κ₁ + z κ₋)`, floored at zero when `σ ≥ α*`.
pub fn estimate_qstab_time(alpha_star: f64, sigma: f64, y: f64, z: f64, kappa1: f64, kappa_minus: f64) -> Result<f64> {
    let rate = y * kappa1 + z * kappa_minus;
    if !(rate > 0.0 && alpha_star > 0.0 && sigma > 0.0) {
        return Err(Error::invalid("estimate requires positive rate, target and tolerance"));
    }
    Ok(((alpha_star / sigma).ln() / rate).max(0.0))
}

/// Observable channels recorded along a trajectory of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    R1,
    NBar1,
    R2,
    NBar2,
    R3,
    NBar3,
    E12,
    E13,
    E23,
    Iss,
}

impl Channel {
    pub const ALL: [Channel; 10] = [
        Channel::R1,
        Channel::NBar1,
        Channel::R2,
        Channel::NBar2,
        Channel::R3,
        Channel::NBar3,
        Channel::E12,
        Channel::E13,
        Channel::E23,
        Channel::Iss,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::R1 => "r1",
            Channel::NBar1 => "n_bar1",
            Channel::R2 => "r2",
            Channel::NBar2 => "n_bar2",
            Channel::R3 => "r3",
            Channel::NBar3 => "n_bar3",
            Channel::E12 => "E12",
            Channel::E13 => "E13",
            Channel::E23 => "E23",
            Channel::Iss => "I_ss",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown channel {s:?}")))
    }
}

/// All channels of one three-mode state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainMetrics {
    pub modes: [SingleModeDecomposition; 3],
    pub e12: f64,
    pub e13: f64,
    pub e23: f64,
    pub reset: ResetFidelity,
}

impl ChainMetrics {
    pub fn from_cm(v: &CovarianceMatrix) -> Result<Self> {
        if v.n_modes() != 3 {
            return Err(Error::invalid("chain metrics need a three-mode state"));
        }
        let mode = |j| single_mode_decomposition(&v.mode_block(j));
        Ok(ChainMetrics {
            modes: [mode(0)?, mode(1)?, mode(2)?],
            e12: log_negativity(&v.two_mode_block(0, 1))?,
            e13: log_negativity(&v.two_mode_block(0, 2))?,
            e23: log_negativity(&v.two_mode_block(1, 2))?,
            reset: reset_fidelity(v),
        })
    }

    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::R1 => self.modes[0].r,
            Channel::NBar1 => self.modes[0].n_bar,
            Channel::R2 => self.modes[1].r,
            Channel::NBar2 => self.modes[1].n_bar,
            Channel::R3 => self.modes[2].r,
            Channel::NBar3 => self.modes[2].n_bar,
            Channel::E12 => self.e12,
            Channel::E13 => self.e13,
            Channel::E23 => self.e23,
            Channel::Iss => self.reset.infidelity,
        }
    }
}

/// Sampled channels of a trajectory; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    times: Vec<f64>,
    series: Vec<Vec<f64>>,
}

impl Trace {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.series[c.index()]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Metrics of each state of a trajectory sampled at `t = k·dt`.
    pub fn from_states(states: &[CovarianceMatrix], dt: f64) -> Result<Trace> {
        let mut b = TraceBuilder::default();
        for (k, v) in states.iter().enumerate() {
            b.push(k as f64 * dt, &ChainMetrics::from_cm(v)?)?;
        }
        Ok(b.finish())
    }
}

#[derive(Debug, Default)]
pub struct TraceBuilder {
    times: Vec<f64>,
    series: Vec<Vec<f64>>,
}

impl TraceBuilder {
    pub fn push(&mut self, t: f64, m: &ChainMetrics) -> Result<()> {
        if !t.is_finite() || self.times.last().is_some_and(|last| t <= *last) {
            return Err(Error::invalid(format!("trace times must be finite and strictly increasing, got {t}")));
        }
        if self.series.is_empty() {
            self.series = vec![Vec::new(); Channel::ALL.len()];
        }
        self.times.push(t);
        for c in Channel::ALL {
            self.series[c.index()].push(m.get(c));
        }
        Ok(())
    }

    pub fn finish(mut self) -> Trace {
        if self.series.is_empty() {
            self.series = vec![Vec::new(); Channel::ALL.len()];
        }
        Trace { times: self.times, series: self.series }
    }
}

/// Lower envelope of a sampled series: between its first and last strict
/// local minima, the piecewise-linear interpolation through the minima
/// (never above the series); elsewhere, and for series with fewer than two
/// minima, the series itself.
pub fn lower_envelope(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values must have equal length"));
    }
    let n = values.len();
    let minima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
        .collect();
    let mut env = values.to_vec();
    if minima.len() < 2 {
        return Ok(env);
    }
    for pair in minima.windows(2) {
        let (i0, i1) = (pair[0], pair[1]);
        let (t0, t1, a0, a1) = (times[i0], times[i1], values[i0], values[i1]);
        for i in i0..=i1 {
            let line = a0 + (a1 - a0) * (times[i] - t0) / (t1 - t0);
            env[i] = values[i].min(line);
        }
    }
    Ok(env)
}

/// Earliest sample time after which `reference(t) − α̃(t) ≤ σ` holds for
/// every later sample, where `α̃` is the lower envelope of the channel.
pub fn quasistabilization_time_to(trace: &Trace, channel: Channel, reference: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    if reference.len() != trace.len() || trace.is_empty() {
        return Err(Error::invalid("reference must match the (non-empty) trace length"));
    }
    let env = lower_envelope(trace.times(), trace.channel(channel))?;
    let gap: Vec<f64> = reference.iter().zip(&env).map(|(r, a)| r - a).collect();
    match gap.iter().rposition(|g| !(*g <= sigma)) {
        None => Ok(trace.times()[0]),
        Some(last) if last + 1 == gap.len() => Err(Error::NotConverged { final_gap: gap[last] }),
        Some(last) => Ok(trace.times()[last + 1]),
    }
}

/// Quasistabilization time against the decaying target `α* e^{−y κ₁ t}`.
pub fn quasistabilization_time(
    trace: &Trace,
    channel: Channel,
    alpha_star: f64,
    y_alpha: f64,
    kappa1: f64,
    sigma: f64,
) -> Result<f64> {
    let reference: Vec<f64> = trace.times().iter().map(|t| alpha_star * (-y_alpha * kappa1 * t).exp()).collect();
    quasistabilization_time_to(trace, channel, &reference, sigma)
}

//! Exceptional points of the chain's effective non-Hermitian Hamiltonian:
//! the branch function `f(ε)`, normal-mode offsets `h_j(ε)`, the cubic
//! discriminant, EP-3 enumeration and numerical EP classification.
//!
//! All closed forms use `g = 1` and depend on `ε₃ = ε`, `ε₂ = f(ε)` only;
//! `κ₁` enters as a uniform shift of the spectrum.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::chain::{params_from_epsilon, ChainParams, EpsilonPoint, Frame, COUPLING};
use crate::{Error, Result, C64};

/// `|v|, |w|` below this are treated as the triple root of an EP-3.
pub const EP3_TOLERANCE: f64 = 1e-10;
/// Default eigenvalue clustering tolerance of [`classify_ep_default`], relative to `‖H‖`.
pub const DEFAULT_TOL_EIG: f64 = 1e-4;
/// Default rank tolerance of [`classify_ep_default`], relative to `‖H‖`.
pub const DEFAULT_TOL_VEC: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// One of the four sign choices in `f(ε)`; `outer` multiplies the square root,
/// `inner` the `(1 + 2ε²)^{3/2}` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpBranch {
    pub outer: Sign,
    pub inner: Sign,
}

impl EpBranch {
    pub const PP: EpBranch = EpBranch { outer: Sign::Plus, inner: Sign::Plus };
    pub const MP: EpBranch = EpBranch { outer: Sign::Minus, inner: Sign::Plus };
    pub const PM: EpBranch = EpBranch { outer: Sign::Plus, inner: Sign::Minus };
    pub const MM: EpBranch = EpBranch { outer: Sign::Minus, inner: Sign::Minus };
    pub const ALL: [EpBranch; 4] = [Self::PP, Self::MP, Self::PM, Self::MM];

    pub fn label(&self) -> String {
        format!("{}{}", self.outer.symbol(), self.inner.symbol())
    }
}

impl fmt::Display for EpBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for EpBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EpBranch::ALL
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown branch {s:?} (expected ++, -+, +- or --)")))
    }
}

/// `P(x) = a x³ + b x² + c x + d = det(x I − H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl CubicCoefficients {
    pub fn eval(&self, x: C64) -> C64 {
        ((self.a * x + self.b) * x + self.c) * x + self.d
    }

    /// Coefficients of `P(s y)/s³`, i.e. the polynomial in the rescaled variable `y = x/s`.
    pub fn scaled(&self, s: f64) -> CubicCoefficients {
        CubicCoefficients { a: self.a, b: self.b / s, c: self.c / (s * s), d: self.d / (s * s * s) }
    }

    /// Simple root when the cubic has a double root.
    pub fn single_root(&self) -> C64 {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        (a * b * c * 4.0 - a * a * d * 9.0 - b * b * b) / (a * (b * b - a * c * 3.0))
    }

    /// Double root when the cubic has one.
    pub fn double_root(&self) -> C64 {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        (a * d * 9.0 - b * c) / ((b * b - a * c * 3.0) * 2.0)
    }

    pub fn triple_root(&self) -> C64 {
        -self.b / (self.a * 3.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discriminant {
    pub delta: C64,
    pub v: C64,
    pub w: C64,
}

impl Discriminant {
    pub fn is_triple(&self) -> bool {
        self.v.norm() < EP3_TOLERANCE && self.w.norm() < EP3_TOLERANCE
    }
}

/// Rotating-frame effective Hamiltonian of the chain.
pub fn effective_hamiltonian(p: &ChainParams) -> Matrix3<C64> {
    let [d2, d3] = p.detunings();
    let k = p.kappa();
    let g = C64::new(COUPLING, 0.0);
    let z = C64::new(0.0, 0.0);
    Matrix3::new(
        C64::new(0.0, -k[0] / 2.0), g, z,
        g, C64::new(d2, -k[1] / 2.0), g,
        z, g, C64::new(d3, -k[2] / 2.0),
    )
}

/// Same as [`effective_hamiltonian`] but straight from the `ε` offsets,
/// without requiring the derived decay rates to be physical.
pub fn effective_hamiltonian_eps(kappa1: f64, ep: EpsilonPoint) -> Matrix3<C64> {
    let g = C64::new(COUPLING, 0.0);
    let z = C64::new(0.0, 0.0);
    let diag = |e: C64| C64::new(0.0, -kappa1 / 2.0) - C64::i() * SQRT_2 * COUPLING * e;
    Matrix3::new(
        C64::new(0.0, -kappa1 / 2.0), g, z,
        g, diag(ep.eps2), g,
        z, g, diag(ep.eps3),
    )
}

pub fn char_coeffs(kappa1: f64, ep: EpsilonPoint) -> CubicCoefficients {
    let (e2, e3) = (ep.eps2, ep.eps3);
    let i = C64::i();
    let g = COUPLING;
    let k = kappa1;
    let sum = e2 + e3;
    CubicCoefficients {
        a: C64::new(1.0, 0.0),
        b: i / 2.0 * (3.0 * k + 2.0 * SQRT_2 * g * sum),
        c: -3.0 * k * k / 4.0 - SQRT_2 * g * k * sum - 2.0 * g * g * (1.0 + e2 * e3),
        d: -i / 8.0
            * (k * k * k
                + 8.0 * SQRT_2 * g * g * g * e3
                + 2.0 * SQRT_2 * g * k * k * sum
                + 8.0 * g * g * k * (1.0 + e2 * e3)),
    }
}

pub fn discriminant(co: &CubicCoefficients) -> Result<Discriminant> {
    let (a, b, c, d) = (co.a, co.b, co.c, co.d);
    if a.norm() == 0.0 {
        return Err(Error::invalid("leading cubic coefficient vanishes"));
    }
    let v = (a * c * 3.0 - b * b) / (a * a * 3.0);
    let w = (b * b * b * 2.0 - a * b * c * 9.0 + a * a * d * 27.0) / (a * a * a * 27.0);
    Ok(Discriminant { delta: -(v * v * v * 4.0 + w * w * 27.0), v, w })
}

/// Discriminant of the coefficients rescaled by `‖H‖` (largest entry modulus),
/// so that a fixed tolerance is meaningful across parameter ranges.
pub fn normalized_discriminant(kappa1: f64, ep: EpsilonPoint) -> Result<Discriminant> {
    let scale = matrix_scale(&effective_hamiltonian_eps(kappa1, ep));
    discriminant(&char_coeffs(kappa1, ep).scaled(scale))
}

/// Left-hand side of the quartic relation between `ε₂` and `ε₃` that
/// characterizes the degeneracies of `H` (independent of `κ₁`).
pub fn quartic_condition(eps2: C64, eps3: C64) -> C64 {
    let (x, y) = (eps2, eps3);
    let (x2, y2) = (x * x, y * y);
    x2 * x2 * y2 * 4.0 - x2 * x * y2 * y * 8.0 + x2 * 4.0 * (y2 * y2 - y2 * 5.0 + 1.0)
        + x * 4.0 * (y2 * y * 5.0 - y)
        - y2 * y2 * 8.0
        + y2 * 13.0
        - 16.0
}

/// `ε₂ = f(ε₃)` on the given branch; principal complex square roots.
pub fn branch_f(eps3: C64, branch: EpBranch) -> Result<C64> {
    let e = eps3;
    if !(e.re.is_finite() && e.im.is_finite()) {
        return Err(Error::invalid("eps3 must be finite"));
    }
    let e2 = e * e;
    let one = C64::new(1.0, 0.0);
    let u = e2 * 2.0;
    let s = (one + u) * (one + u).sqrt();
    let radicand = match branch.inner {
        Sign::Plus => {
            // (ε⁴ + 10ε² − 2 + 2s)/ε² with the removable 1/ε² cancelled.
            if (s + one).norm() > 1e-3 {
                e2 + 10.0 + (u * u + u * 3.0 + 3.0) * 4.0 / (s + one)
            } else {
                (e2 * e2 + e2 * 10.0 - 2.0 + s * 2.0) / e2
            }
        }
        Sign::Minus => {
            if e.norm() == 0.0 {
                return Err(Error::DivergentBranch);
            }
            e2 + 10.0 - (one + s) * 2.0 / e2
        }
    };
    let f = (e + radicand.sqrt() * branch.outer.value()) / 2.0;
    if !(f.re.is_finite() && f.im.is_finite()) {
        return Err(Error::DivergentBranch);
    }
    Ok(f)
}

/// Offsets `(h₁, h₂ = h₃)` of the normal modes on the branch through `ε₃`.
/// At an EP-3 all three coincide and the common value is returned.
pub fn mode_h(eps3: C64, branch: EpBranch) -> Result<(C64, C64)> {
    let f = branch_f(eps3, branch)?;
    mode_h_at(EpsilonPoint::new(f, eps3))
}

/// Like [`mode_h`] for an explicit on-branch point.
pub fn mode_h_at(ep: EpsilonPoint) -> Result<(C64, C64)> {
    let (e, f) = (ep.eps3, ep.eps2);
    let disc = discriminant(&char_coeffs(0.0, ep))?;
    if disc.is_triple() {
        let h = (e + f) / 3.0;
        return Ok((h, h));
    }
    let den = f * f - e * f + e * e - 3.0;
    if den.norm() < 1e-300 {
        return Err(Error::NumericalDomain(format!("mode offsets singular at eps3 = {e}")));
    }
    let h1 = (f * f * f - e * f * f - (e * e + 4.0) * f + e * e * e + e / 2.0) / den;
    let h2 = (e * f * f * 2.0 + (e * e + 1.0) * f * 2.0 - e * 7.0) / den / 4.0;
    Ok((h1, h2))
}

/// Eigenvalue of `H` for a mode offset `h`: `x = −iκ₁/2 − i√2 g h`.
pub fn h_to_eigenvalue(h: C64, kappa1: f64) -> C64 {
    C64::new(0.0, -kappa1 / 2.0) - C64::i() * SQRT_2 * COUPLING * h
}

/// Inverse of [`h_to_eigenvalue`].
pub fn eigenvalue_to_h(x: C64, kappa1: f64) -> C64 {
    (C64::i() * x - kappa1 / 2.0) / (SQRT_2 * COUPLING)
}

/// `λ± = −κ_eff/2 ± i(ω₁ + δ_eff)` for the single and the double root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpEigenvalues {
    pub single: [C64; 2],
    pub double: [C64; 2],
}

pub fn eigenvalues_from_h(h: C64, kappa1: f64, omega1: f64) -> [C64; 2] {
    let kappa_eff = kappa1 + 2.0 * SQRT_2 * COUPLING * h.re;
    let delta_eff = SQRT_2 * COUPLING * h.im;
    [C64::new(-kappa_eff / 2.0, omega1 + delta_eff), C64::new(-kappa_eff / 2.0, -(omega1 + delta_eff))]
}

pub fn ep_eigenvalues(eps3: C64, branch: EpBranch, kappa1: f64, omega1: f64) -> Result<EpEigenvalues> {
    let (h1, h2) = mode_h(eps3, branch)?;
    Ok(EpEigenvalues {
        single: eigenvalues_from_h(h1, kappa1, omega1),
        double: eigenvalues_from_h(h2, kappa1, omega1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpPoint {
    pub eps3: C64,
    pub eps2: C64,
    pub branch: EpBranch,
    pub order: u8,
    pub h1: C64,
    pub h2: C64,
    /// `λ⁺` of the single and of the double root (rotating frame).
    pub lambda: (C64, C64),
}

/// The six EP-3s: `(ε₃, ε₂) = (±2, ±1)` and `(±i/√2, (±3√3 ± i)/(2√2))`.
pub fn enumerate_ep3(kappa1: f64) -> Result<Vec<EpPoint>> {
    let c = 2.0 * SQRT_2;
    let t = 3.0 * 3f64.sqrt();
    let candidates = [
        (C64::new(2.0, 0.0), C64::new(1.0, 0.0)),
        (C64::new(-2.0, 0.0), C64::new(-1.0, 0.0)),
        (C64::new(0.0, 1.0 / SQRT_2), C64::new(t / c, 1.0 / c)),
        (C64::new(0.0, 1.0 / SQRT_2), C64::new(-t / c, 1.0 / c)),
        (C64::new(0.0, -1.0 / SQRT_2), C64::new(t / c, -1.0 / c)),
        (C64::new(0.0, -1.0 / SQRT_2), C64::new(-t / c, -1.0 / c)),
    ];
    candidates
        .into_iter()
        .map(|(eps3, eps2)| {
            let ep = EpsilonPoint::new(eps2, eps3);
            let disc = discriminant(&char_coeffs(kappa1, ep))?;
            if !disc.is_triple() {
                return Err(Error::NumericalDomain(format!("EP-3 check failed at eps3 = {eps3}")));
            }
            let branch = [EpBranch::PM, EpBranch::MM, EpBranch::PP, EpBranch::MP]
                .into_iter()
                .find(|b| branch_f(eps3, *b).map(|f| (f - eps2).norm() < 1e-9).unwrap_or(false))
                .ok_or_else(|| Error::NumericalDomain(format!("no branch through eps3 = {eps3}")))?;
            let (h1, h2) = mode_h_at(ep)?;
            let lam1 = eigenvalues_from_h(h1, kappa1, 0.0)[0];
            let lam2 = eigenvalues_from_h(h2, kappa1, 0.0)[0];
            Ok(EpPoint { eps3, eps2, branch, order: 3, h1, h2, lambda: (lam1, lam2) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMode {
    pub eigenvalue: C64,
    /// Right eigenvector, unit 2-norm.
    pub vector: Vector3<C64>,
}

/// Eigenvalues of a 3×3 complex matrix: complex Schur form, falling back to
/// Newton-polished roots of the characteristic polynomial when the QR
/// iteration stalls (it can cycle on some exactly structured inputs).
pub fn eigenvalues3(h: &Matrix3<C64>) -> Result<[C64; 3]> {
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::invalid("matrix must be finite"));
    }
    if let Some(ev) = h.try_schur(f64::EPSILON, 500).and_then(|s| s.eigenvalues()) {
        return Ok([ev[0], ev[1], ev[2]]);
    }
    cubic_roots(h)
}

fn cubic_roots(h: &Matrix3<C64>) -> Result<[C64; 3]> {
    let minors = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)] + h[(0, 0)] * h[(2, 2)]
        - h[(0, 2)] * h[(2, 0)]
        + h[(1, 1)] * h[(2, 2)]
        - h[(1, 2)] * h[(2, 1)];
    let co = CubicCoefficients { a: C64::new(1.0, 0.0), b: -h.trace(), c: minors, d: -h.determinant() };
    let disc = discriminant(&co)?;
    let shift = -co.b / 3.0;
    // Depressed cubic y³ + v y + w = 0 (Cardano).
    let (v, w) = (disc.v, disc.w);
    let inner = (w * w / 4.0 + v * v * v / 27.0).sqrt();
    let mut u = (-w / 2.0 + inner).cbrt();
    if u.norm() < 1e-300 {
        u = (-w / 2.0 - inner).cbrt();
    }
    let omega = C64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut roots = [0, 1, 2].map(|k| {
        let uk = u * omega.powi(k);
        if uk.norm() < 1e-300 {
            shift
        } else {
            uk - v / (uk * 3.0) + shift
        }
    });
    let deriv = |x: C64| (co.a * x * 3.0 + co.b * 2.0) * x + co.c;
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let dp = deriv(*x);
            if dp.norm() < 1e-300 {
                break;
            }
            let step = co.eval(*x) / dp;
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            *x -= step;
        }
    }
    Ok(roots)
}

/// Eigenpairs of `H`; each vector spans the numerical kernel of `H − λI`.
pub fn normal_modes(h: &Matrix3<C64>) -> Result<[NormalMode; 3]> {
    let ev = eigenvalues3(h)?;
    let mode = |lambda: C64| {
        let shifted = h - Matrix3::identity() * lambda;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("requested V^H");
        let k = argmin(svd.singular_values.iter().copied());
        let v: Vector3<C64> = vt.row(k).transpose().map(|z| z.conj());
        NormalMode { eigenvalue: lambda, vector: v }
    };
    Ok([mode(ev[0]), mode(ev[1]), mode(ev[2])])
}

/// Decay rate and detuning of a normal mode, `x = δ − iκ/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalModeRate {
    pub kappa: f64,
    pub delta: f64,
}

/// Normal-mode rates of the chain from the eigenvalues of `H`, slowest first.
pub fn normal_mode_rates(p: &ChainParams) -> Result<[NormalModeRate; 3]> {
    let ev = eigenvalues3(&effective_hamiltonian(p))?;
    let mut rates = ev.map(|x| NormalModeRate { kappa: -2.0 * x.im, delta: x.re });
    rates.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
    Ok(rates)
}

/// Order of the exceptional point at `H`: 1 if diagonalizable, otherwise the
/// size of the largest Jordan block found numerically.
///
/// Eigenvalues closer than `tol_eig · ‖H‖` are clustered; a cluster of size
/// `m` with `g < m` singular values of `H − λ̄I` below `tol_vec · ‖H‖` is a
/// defective eigenvalue of order `m − g + 1`. If the result changes when the
/// clustering tolerance is multiplied by ten the classification is reported
/// as ambiguous.
pub fn classify_ep(h: &Matrix3<C64>, tol_eig: f64, tol_vec: f64) -> Result<u8> {
    if !(tol_eig > 0.0 && tol_vec > 0.0) {
        return Err(Error::invalid("classification tolerances must be positive"));
    }
    let scale = matrix_scale(h);
    let ev = eigenvalues3(h)?;
    let lower = classify_with(h, &ev, tol_eig * scale, tol_vec * scale);
    let upper = classify_with(h, &ev, 10.0 * tol_eig * scale, tol_vec * scale);
    if lower != upper {
        return Err(Error::AmbiguousClassification { lower, upper });
    }
    Ok(lower)
}

pub fn classify_ep_default(h: &Matrix3<C64>) -> Result<u8> {
    classify_ep(h, DEFAULT_TOL_EIG, DEFAULT_TOL_VEC)
}

fn classify_with(h: &Matrix3<C64>, ev: &[C64; 3], tol_eig: f64, tol_rank: f64) -> u8 {
    // Single-linkage clustering of three points.
    let mut label = [0usize, 1, 2];
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (ev[i] - ev[j]).norm() <= tol_eig {
                let (from, to) = (label[j], label[i]);
                label.iter_mut().filter(|l| **l == from).for_each(|l| *l = to);
            }
        }
    }
    let mut order = 1u8;
    for root in 0..3 {
        let members: Vec<usize> = (0..3).filter(|k| label[*k] == root).collect();
        let m = members.len();
        if m < 2 {
            continue;
        }
        let mean = members.iter().map(|k| ev[*k]).sum::<C64>() / m as f64;
        let sv = (h - Matrix3::identity() * mean).singular_values();
        let geometric = sv.iter().filter(|s| **s <= tol_rank).count().max(1);
        if geometric < m {
            order = order.max((m - geometric + 1) as u8);
        }
    }
    order
}

/// Effective rates of the EP-2 family (`κ₃ = κ₁`, degenerate frequencies)
/// in the regime `κ₁ ≪ κ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates {
    /// `(δ₊, δ₋)`.
    pub delta_pm: [f64; 2],
    /// `(κ₊, κ₋)`.
    pub kappa_pm: [f64; 2],
    pub kappa_0: f64,
}

pub fn effective_mode_rates(kappa2: f64, kappa1: f64) -> EffectiveRates {
    let g2 = COUPLING * COUPLING;
    let root = C64::new(kappa2 * kappa2 - 32.0 * g2, 0.0).sqrt();
    let kappa_plus = kappa2 / 2.0 + root.re / 2.0;
    // κ₊κ₋ = 8g² when the root is real; avoids cancellation for κ₂ ≫ g.
    let kappa_minus = if root.re > 0.0 { 8.0 * g2 / kappa_plus } else { kappa2 / 2.0 - root.re / 2.0 };
    EffectiveRates {
        delta_pm: [root.im / 4.0, -root.im / 4.0],
        kappa_pm: [kappa_plus, kappa_minus],
        kappa_0: kappa1,
    }
}

/// EP-2 family point with the given `κ₂` (`κ₃ = κ₁`, degenerate frequencies).
pub fn ep2_family(kappa1: f64, kappa2: f64, frame: Frame) -> Result<ChainParams> {
    let eps2 = (kappa2 - kappa1) / (2.0 * SQRT_2 * COUPLING);
    params_from_epsilon(kappa1, EpsilonPoint::real(eps2, 0.0), frame)
}

pub(crate) fn matrix_scale(h: &Matrix3<C64>) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

fn argmin(it: impl Iterator<Item = f64>) -> usize {
    it.enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(k, _)| k).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn branch_labels_round_trip() {
        for b in EpBranch::ALL {
            assert_eq!(b.label().parse::<EpBranch>().unwrap(), b);
        }
        assert!("+0".parse::<EpBranch>().is_err());
    }

    #[test]
    fn anchors() {
        assert_eq!(branch_f(c(0.0, 0.0), EpBranch::PP).unwrap(), c(2.0, 0.0));
        assert_eq!(branch_f(c(0.0, 0.0), EpBranch::MP).unwrap(), c(-2.0, 0.0));
        assert!(matches!(branch_f(c(0.0, 0.0), EpBranch::PM), Err(Error::DivergentBranch)));
        assert_eq!(branch_f(c(2.0, 0.0), EpBranch::PM).unwrap(), c(1.0, 0.0));
        assert_eq!(branch_f(c(2.0, 0.0), EpBranch::MM).unwrap(), c(1.0, 0.0));
        let f = branch_f(c(0.0, 1.0 / SQRT_2), EpBranch::PP).unwrap();
        let expected = c(3.0 * 3f64.sqrt(), 1.0) / (2.0 * SQRT_2);
        assert!((f - expected).norm() < 1e-14);
    }

    #[test]
    fn stable_form_matches_direct_formula() {
        for &e in &[c(0.3, 0.0), c(1.7, 0.4), c(-0.2, 2.0), c(4.0, -1.0)] {
            let direct = (e * e * e * e + e * e * 10.0 - 2.0 + (c(1.0, 0.0) + e * e * 2.0).powf(1.5) * 2.0) / (e * e);
            let f_direct = (e + direct.sqrt()) / 2.0;
            assert!((branch_f(e, EpBranch::PP).unwrap() - f_direct).norm() < 1e-12);
        }
    }

    #[test]
    fn coefficients_match_determinant() {
        let ep = EpsilonPoint::new(c(0.7, -0.3), c(1.9, 0.25));
        let k1 = 0.13;
        let co = char_coeffs(k1, ep);
        let h = effective_hamiltonian_eps(k1, ep);
        for &x in &[c(0.0, 0.0), c(1.0, -2.0), c(-0.4, 0.9)] {
            let det = (Matrix3::identity() * x - h).determinant();
            assert!((co.eval(x) - det).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_offsets_coefficients() {
        let co = char_coeffs(0.0, EpsilonPoint::real(0.0, 0.0));
        assert_eq!(co.b, c(0.0, 0.0));
        assert_eq!(co.c, c(-2.0, 0.0));
        assert_eq!(co.d.norm(), 0.0);
        let co = char_coeffs(0.0, EpsilonPoint::real(1.0, 2.0));
        assert!((co.triple_root() - c(0.0, -SQRT_2)).norm() < 1e-15);
        assert!(co.eval(c(0.0, -SQRT_2)).norm() < 1e-14);
    }

    #[test]
    fn discriminant_on_and_off_branch() {
        let f = branch_f(c(1.0, 0.0), EpBranch::PP).unwrap();
        let on = normalized_discriminant(0.0, EpsilonPoint::new(f, c(1.0, 0.0))).unwrap();
        assert!(on.delta.norm() <= 1e-9);
        let off = normalized_discriminant(0.0, EpsilonPoint::real(0.0, 1.0)).unwrap();
        assert!(off.delta.norm() > 1e-3);
        let ep3 = discriminant(&char_coeffs(0.0, EpsilonPoint::real(1.0, 2.0))).unwrap();
        assert!(ep3.v.norm() <= 1e-10 && ep3.w.norm() <= 1e-10);
        let zero = CubicCoefficients { a: c(0.0, 0.0), ..char_coeffs(0.0, EpsilonPoint::real(0.0, 0.0)) };
        assert!(discriminant(&zero).is_err());
    }

    #[test]
    fn branches_solve_quartic() {
        for b in EpBranch::ALL {
            for k in 1..=60 {
                let e = c(0.1 * k as f64, 0.0);
                let f = branch_f(e, b).unwrap();
                let scale = 1.0 + f.norm().powi(4) * e.norm().powi(2) + e.norm().powi(4);
                assert!(quartic_condition(f, e).norm() / scale < 1e-12, "{b} at {e}");
            }
        }
    }

    #[test]
    fn mode_offsets_at_anchors() {
        let (h1, h2) = mode_h(c(0.0, 0.0), EpBranch::PP).unwrap();
        assert!(h1.norm() < 1e-15);
        assert!((h2 - 1.0).norm() < 1e-15);
        let (h1, h2) = mode_h(c(2.0, 0.0), EpBranch::MM).unwrap();
        assert_eq!((h1, h2), (c(1.0, 0.0), c(1.0, 0.0)));
    }

    #[test]
    fn h_reproduces_eigenvalues() {
        let k1 = 1e-3;
        for b in EpBranch::ALL {
            for &e in &[0.5, 1.3, 3.0, 5.5] {
                let e = c(e, 0.0);
                let f = branch_f(e, b).unwrap();
                let (h1, h2) = mode_h(e, b).unwrap();
                let mut expected = [h1, h2, h2].map(|h| h_to_eigenvalue(h, k1));
                let mut ev = eigenvalues3(&effective_hamiltonian_eps(k1, EpsilonPoint::new(f, e))).unwrap();
                let key = |z: &C64| (z.re * 1e3).round() as i64 * 1_000_000 + (z.im * 1e3).round() as i64;
                expected.sort_by_key(key);
                ev.sort_by_key(key);
                for (x, y) in expected.iter().zip(ev.iter()) {
                    // The double root is only resolved to ~sqrt(ε_mach) by the eigensolver.
                    assert!((x - y).norm() < 1e-6, "{b} {e}: {x} vs {y}");
                }
                let co = char_coeffs(k1, EpsilonPoint::new(f, e));
                assert!((co.single_root() - h_to_eigenvalue(h1, k1)).norm() < 1e-8);
                assert!((co.double_root() - h_to_eigenvalue(h2, k1)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn ep2_eigenvalues() {
        let ev = ep_eigenvalues(c(0.0, 0.0), EpBranch::PP, 1e-3, 0.0).unwrap();
        assert!((ev.single[0] - c(-5e-4, 0.0)).norm() < 1e-15);
        assert!((ev.double[0].re + (1e-3 + 2.0 * SQRT_2) / 2.0).abs() < 1e-15);
        let ev = ep_eigenvalues(c(3.0, 0.0), EpBranch::PP, 1e-3, 5000.0).unwrap();
        assert!((ev.single[0].im.abs() - 5000.0).abs() < 1e-9);
        assert_eq!(ev.single[0].im, -ev.single[1].im);
    }

    #[test]
    fn six_ep3_points() {
        let pts = enumerate_ep3(1e-3).unwrap();
        assert_eq!(pts.len(), 6);
        let physical: Vec<_> = pts
            .iter()
            .filter(|p| p.eps3.im == 0.0 && p.eps2.im == 0.0 && p.eps3.re >= 0.0 && p.eps2.re >= 0.0)
            .collect();
        assert_eq!(physical.len(), 1);
        assert_eq!((physical[0].eps3, physical[0].eps2), (c(2.0, 0.0), c(1.0, 0.0)));
        for p in &pts {
            let h = effective_hamiltonian_eps(1e-3, EpsilonPoint::new(p.eps2, p.eps3));
            assert_eq!(classify_ep_default(&h).unwrap(), 3, "{:?}", p);
            assert_eq!(p.h1, p.h2);
        }
    }

    #[test]
    fn classification() {
        let ep2 = effective_hamiltonian_eps(1e-3, EpsilonPoint::real(2.0, 0.0));
        assert_eq!(classify_ep_default(&ep2).unwrap(), 2);
        let generic = effective_hamiltonian_eps(1e-3, EpsilonPoint::real(1.0, 0.0));
        assert_eq!(classify_ep_default(&generic).unwrap(), 1);
        // Degenerate but diagonalizable.
        let scalar = Matrix3::identity() * c(0.5, -0.1);
        assert_eq!(classify_ep_default(&scalar).unwrap(), 1);
        assert!(classify_ep(&generic, 0.0, 1e-8).is_err());
    }

    #[test]
    fn ambiguous_split_is_reported() {
        let mut h = Matrix3::<C64>::zeros();
        h[(0, 1)] = c(1.0, 0.0);
        h[(1, 1)] = c(1e-4, 0.0);
        h[(2, 2)] = c(5.0, 0.0);
        let err = classify_ep(&h, 1e-5, 1e-8).unwrap_err();
        assert!(matches!(err, Error::AmbiguousClassification { lower: 1, upper: 2 }));
    }

    #[test]
    fn effective_rates() {
        let r = effective_mode_rates(4.0 * SQRT_2, 1e-3);
        assert!((r.kappa_pm[0] - 2.0 * SQRT_2).abs() < 1e-7);
        assert!((r.kappa_pm[1] - 2.0 * SQRT_2).abs() < 1e-7);
        assert_eq!(r.delta_pm, [0.0, 0.0]);
        let r = effective_mode_rates(2.0, 1e-3);
        assert!((r.delta_pm[0] - 7f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((r.delta_pm[1] + 7f64.sqrt() / 2.0).abs() < 1e-14);
        let r = effective_mode_rates(1e3, 1e-3);
        assert!((r.kappa_pm[1] * 1e3 / 8.0 - 1.0).abs() < 1e-4);
        assert_eq!(r.kappa_0, 1e-3);
    }

    #[test]
    fn effective_rates_match_eigensolver() {
        for &k2 in &[1.0, 2.0, 5.0, 8.0, 12.0] {
            let p = ep2_family(1e-6, k2, Frame::RotatingAtOmega1).unwrap();
            let rates = normal_mode_rates(&p).unwrap();
            let eff = effective_mode_rates(k2, 1e-6);
            assert!((rates[0].kappa - eff.kappa_0).abs() < 1e-9);
            let mut expected = [eff.kappa_pm[1], eff.kappa_pm[0]];
            expected.sort_by(f64::total_cmp);
            assert!((rates[1].kappa - expected[0]).abs() < 1e-5, "{k2}");
            assert!((rates[2].kappa - expected[1]).abs() < 1e-5, "{k2}");
            let mut deltas = [rates[1].delta.abs(), rates[2].delta.abs()];
            deltas.sort_by(f64::total_cmp);
            assert!((deltas[1] - eff.delta_pm[0].abs()).abs() < 1e-5);
        }
    }

    #[test]
    fn cubic_fallback_agrees_with_schur() {
        let h = effective_hamiltonian_eps(0.1, EpsilonPoint::new(c(0.3, 0.2), c(1.1, -0.4)));
        let mut a = eigenvalues3(&h).unwrap();
        let mut b = cubic_roots(&h).unwrap();
        let key = |z: &C64| (z.re * 1e6).round() as i64;
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn normal_mode_vectors_are_eigenvectors() {
        let h = effective_hamiltonian_eps(0.1, EpsilonPoint::new(c(0.3, 0.2), c(1.1, -0.4)));
        for m in normal_modes(&h).unwrap() {
            assert!((h * m.vector - m.vector * m.eigenvalue).norm() < 1e-12);
            assert!((m.vector.norm() - 1.0).abs() < 1e-12);
        }
    }
}

//! Pure-state containers over truncated Fock spaces and the two input
//! resources: the single-mode squeezed vacuum and the delocalized photon.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed above unit squared norm.
pub const NORM_SLACK: f64 = 1e-12;
/// Default tail mass discarded by the adaptive cutoff.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;
/// Hard ceiling on any single-mode cutoff.
pub const DEFAULT_MAX_CUTOFF: usize = 512;
/// Extra photon levels given to the exponentiation oracle; only amplitudes
/// below `cutoff - ORACLE_BUFFER` are compared.
pub const ORACLE_BUFFER: usize = 8;
/// Largest accepted squeezing parameter.
pub const MAX_SQUEEZE: f64 = 3.0;

const PHOTON_NORM_TOL: f64 = 1e-9;

/// Photon-number parity of a Fock component or of a whole CV state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Real squeezing parameter `r >= 0`, capped at [`MAX_SQUEEZE`].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct SqueezeParam(f64);

impl SqueezeParam {
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || !(0.0..=MAX_SQUEEZE).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "squeezing parameter r_sq = {r} must lie in [0, {MAX_SQUEEZE}]"
            )));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Complex amplitudes of one mode over photon numbers `0..=cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockAmplitudes {
    amps: Vec<C64>,
}

impl FockAmplitudes {
    /// Wraps `amps`, rejecting empty input and squared norms above `1 + NORM_SLACK`.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidParameter("amplitude vector is empty".into()));
        }
        let out = Self { amps };
        let n2 = out.norm_sqr();
        if !n2.is_finite() || n2 > 1.0 + NORM_SLACK {
            return Err(Error::NotNormalized { norm_sqr: n2 });
        }
        Ok(out)
    }

    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        debug_assert!(!amps.is_empty());
        Self { amps }
    }

    pub fn zeros(cutoff: usize) -> Self {
        Self { amps: vec![C64::new(0.0, 0.0); cutoff + 1] }
    }

    /// The number state `|n>` in a space truncated at `cutoff >= n`.
    pub fn number(n: usize, cutoff: usize) -> Self {
        let mut out = Self::zeros(cutoff.max(n));
        out.amps[n] = C64::new(1.0, 0.0);
        out
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    /// Amplitude of `|n>`, zero beyond the cutoff.
    pub fn get(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.iter().all(|a| *a == C64::default())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { amps: self.amps.iter().map(|a| a * c).collect() }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    /// Zero-pads (or truncates) to `cutoff`.
    pub fn padded(&self, cutoff: usize) -> Self {
        let mut amps = self.amps.clone();
        amps.resize(cutoff + 1, C64::default());
        Self { amps }
    }

    /// Largest amplitude magnitude on photon numbers of the given parity.
    pub fn max_abs_on(&self, parity: Parity) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(n, _)| Parity::of(*n) == parity)
            .map(|(_, a)| a.norm())
            .fold(0.0, f64::max)
    }

    /// Phase of the first component whose magnitude is at least `1e-12` of the largest.
    /// Returns `1` for the zero vector.
    pub(crate) fn leading_phase(&self) -> C64 {
        let max = self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return C64::new(1.0, 0.0);
        }
        let lead = self.amps.iter().find(|a| a.norm() >= 1e-12 * max).unwrap();
        lead / lead.norm()
    }
}

/// `<a|b>`; the shorter vector is zero-padded.
pub fn inner_product(a: &FockAmplitudes, b: &FockAmplitudes) -> C64 {
    a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &FockAmplitudes) -> f64 {
    a.norm()
}

/// `|<a|b>|^2 / (|a|^2 |b|^2)`.
pub fn fidelity(a: &FockAmplitudes, b: &FockAmplitudes) -> Result<f64> {
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((inner_product(a, b).norm_sqr() / (na * nb)).min(1.0))
}

/// Squeezed-vacuum amplitudes `b_{2n}` up to `cutoff`, odd entries exactly zero.
///
/// Uses `b_{2(n+1)} = b_{2n} tanh(r) sqrt((2n+1)/(2n+2))` from `b_0 = 1/sqrt(cosh r)`.
pub fn smsv_amplitudes(r_sq: SqueezeParam, cutoff: usize) -> FockAmplitudes {
    let r = r_sq.value();
    let tanh = r.tanh();
    let mut amps = vec![C64::default(); cutoff + 1];
    let mut b = 1.0 / r.cosh().sqrt();
    for n in (0..=cutoff).step_by(2) {
        amps[n] = C64::new(b, 0.0);
        let k = n as f64;
        b *= tanh * ((k + 1.0) / (k + 2.0)).sqrt();
    }
    FockAmplitudes { amps }
}

/// Smallest even cutoff `N >= 4` whose discarded squeezed-vacuum mass is below
/// `tail_eps`, limited to [`DEFAULT_MAX_CUTOFF`].
pub fn choose_cutoff(r_sq: SqueezeParam, tail_eps: f64) -> Result<usize> {
    choose_cutoff_with_max(r_sq, tail_eps, DEFAULT_MAX_CUTOFF)
}

/// As [`choose_cutoff`] with an explicit ceiling.
///
/// Successive squared amplitudes shrink by at least `q = tanh^2 r`, so the
/// mass beyond `2n` is bounded by `|b_{2n}|^2 q / (1 - q)`.
pub fn choose_cutoff_with_max(r_sq: SqueezeParam, tail_eps: f64, max_cutoff: usize) -> Result<usize> {
    if !(tail_eps > 0.0) || !tail_eps.is_finite() {
        return Err(Error::InvalidParameter(format!("tail_eps = {tail_eps} must be positive")));
    }
    let r = r_sq.value();
    let q = r.tanh().powi(2);
    let mut b2 = 1.0 / r.cosh();
    let mut n = 0usize;
    while b2 * q / (1.0 - q) >= tail_eps {
        b2 *= q * (n as f64 + 1.0) / (n as f64 + 2.0);
        n += 2;
        if n > max_cutoff {
            // keep walking (cheaply) so the error reports the actual requirement
            let mut m = n;
            while b2 * q / (1.0 - q) >= tail_eps && m < 1 << 24 {
                b2 *= q * (m as f64 + 1.0) / (m as f64 + 2.0);
                m += 2;
            }
            return Err(Error::CutoffOverflow { required: m, max: max_cutoff });
        }
    }
    let n = n.max(4);
    if n > max_cutoff {
        return Err(Error::CutoffOverflow { required: n, max: max_cutoff });
    }
    Ok(n)
}

/// A single photon shared between two modes, `a0|01> + a1|10>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DelocalizedPhoton {
    #[serde(with = "crate::dump::complex_pair")]
    a0: C64,
    #[serde(with = "crate::dump::complex_pair")]
    a1: C64,
}

impl DelocalizedPhoton {
    /// Validates normalization (to 1e-9, then renormalized) and delocalization.
    pub fn new(a0: C64, a1: C64) -> Result<Self> {
        let n2 = a0.norm_sqr() + a1.norm_sqr();
        if !n2.is_finite() || (n2 - 1.0).abs() > PHOTON_NORM_TOL {
            return Err(Error::NormViolation { norm_sqr: n2 });
        }
        if a0 == C64::default() || a1 == C64::default() {
            return Err(Error::DegenerateDelocalization);
        }
        let s = 1.0 / n2.sqrt();
        Ok(Self { a0: a0 * s, a1: a1 * s })
    }

    /// Real amplitudes with `|a1| = a1_mag` and `a0 = sqrt(1 - a1_mag^2)`.
    pub fn from_magnitude(a1_mag: f64) -> Result<Self> {
        if !a1_mag.is_finite() || !(0.0..=1.0).contains(&a1_mag) {
            return Err(Error::InvalidParameter(format!("|a1| = {a1_mag} must lie in [0, 1]")));
        }
        Self::new(C64::new((1.0 - a1_mag * a1_mag).max(0.0).sqrt(), 0.0), C64::new(a1_mag, 0.0))
    }

    pub fn balanced() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { a0: C64::new(h, 0.0), a1: C64::new(h, 0.0) }
    }

    pub fn a0(&self) -> C64 {
        self.a0
    }

    pub fn a1(&self) -> C64 {
        self.a1
    }
}

/// Constructor spelled after the operation it implements.
pub fn delocalized_photon(a0: C64, a1: C64) -> Result<DelocalizedPhoton> {
    DelocalizedPhoton::new(a0, a1)
}

/// Dense joint amplitudes `[n1][n2]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeAmplitudes {
    dims: [usize; 2],
    amps: Vec<C64>,
}

impl TwoModeAmplitudes {
    pub fn zeros(cutoff1: usize, cutoff2: usize) -> Self {
        let dims = [cutoff1 + 1, cutoff2 + 1];
        Self { dims, amps: vec![C64::default(); dims[0] * dims[1]] }
    }

    /// Row-major input; rejects mismatched lengths and squared norms above `1 + NORM_SLACK`.
    pub fn new(cutoff1: usize, cutoff2: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != (cutoff1 + 1) * (cutoff2 + 1) {
            return Err(Error::InvalidParameter(format!(
                "expected {} amplitudes for cutoffs ({cutoff1}, {cutoff2}), got {}",
                (cutoff1 + 1) * (cutoff2 + 1),
                amps.len()
            )));
        }
        let out = Self { dims: [cutoff1 + 1, cutoff2 + 1], amps };
        let n2 = out.norm_sqr();
        if !n2.is_finite() || n2 > 1.0 + NORM_SLACK {
            return Err(Error::NotNormalized { norm_sqr: n2 });
        }
        Ok(out)
    }

    /// Product state `a ⊗ b`.
    pub fn product(a: &FockAmplitudes, b: &FockAmplitudes) -> Self {
        let mut out = Self::zeros(a.cutoff(), b.cutoff());
        for (n1, x) in a.amps().iter().enumerate() {
            for (n2, y) in b.amps().iter().enumerate() {
                out.amps[n1 * out.dims[1] + n2] = x * y;
            }
        }
        out
    }

    pub fn cutoffs(&self) -> [usize; 2] {
        [self.dims[0] - 1, self.dims[1] - 1]
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    /// Amplitude of `|n1, n2>`, zero outside the truncated space.
    pub fn get(&self, n1: usize, n2: usize) -> C64 {
        if n1 < self.dims[0] && n2 < self.dims[1] {
            self.amps[n1 * self.dims[1] + n2]
        } else {
            C64::default()
        }
    }

    pub(crate) fn set(&mut self, n1: usize, n2: usize, v: C64) {
        let d = self.dims[1];
        self.amps[n1 * d + n2] = v;
    }

    pub(crate) fn add(&mut self, n1: usize, n2: usize, v: C64) {
        let d = self.dims[1];
        self.amps[n1 * d + n2] += v;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { dims: self.dims, amps: self.amps.iter().map(|a| a * c).collect() }
    }

    /// Re-embeds into cutoffs `(c1, c2)`, dropping anything outside.
    pub fn padded(&self, c1: usize, c2: usize) -> Self {
        let mut out = Self::zeros(c1, c2);
        for n1 in 0..self.dims[0].min(c1 + 1) {
            for n2 in 0..self.dims[1].min(c2 + 1) {
                out.set(n1, n2, self.get(n1, n2));
            }
        }
        out
    }

    /// Nonzero components as `(n1, n2, amplitude)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let d = self.dims[1];
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != C64::default())
            .map(move |(i, a)| (i / d, i % d, *a))
    }

    /// Column `n2 = j` as a mode-1 vector.
    pub fn column(&self, j: usize) -> FockAmplitudes {
        FockAmplitudes::from_raw((0..self.dims[0]).map(|n1| self.get(n1, j)).collect())
    }

    /// Row `n1 = i` as a mode-2 vector.
    pub fn row(&self, i: usize) -> FockAmplitudes {
        FockAmplitudes::from_raw((0..self.dims[1]).map(|n2| self.get(i, n2)).collect())
    }
}

/// `<a|b>` for two-mode states of any (zero-padded) shape.
pub fn inner_product_two_mode(a: &TwoModeAmplitudes, b: &TwoModeAmplitudes) -> C64 {
    a.nonzero().map(|(n1, n2, x)| x.conj() * b.get(n1, n2)).sum()
}

/// Fidelity between two unnormalized two-mode states.
pub fn fidelity_two_mode(a: &TwoModeAmplitudes, b: &TwoModeAmplitudes) -> Result<f64> {
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((inner_product_two_mode(a, b).norm_sqr() / (na * nb)).min(1.0))
}

/// Dense joint amplitudes `[n1][n2][n3]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeModeAmplitudes {
    dims: [usize; 3],
    amps: Vec<C64>,
}

impl ThreeModeAmplitudes {
    pub fn zeros(c1: usize, c2: usize, c3: usize) -> Self {
        let dims = [c1 + 1, c2 + 1, c3 + 1];
        Self { dims, amps: vec![C64::default(); dims.iter().product()] }
    }

    pub fn new(cutoffs: [usize; 3], amps: Vec<C64>) -> Result<Self> {
        let dims = cutoffs.map(|c| c + 1);
        if amps.len() != dims.iter().product::<usize>() {
            return Err(Error::InvalidParameter(format!(
                "expected {} amplitudes for cutoffs {cutoffs:?}, got {}",
                dims.iter().product::<usize>(),
                amps.len()
            )));
        }
        let out = Self { dims, amps };
        let n2 = out.norm_sqr();
        if !n2.is_finite() || n2 > 1.0 + NORM_SLACK {
            return Err(Error::NotNormalized { norm_sqr: n2 });
        }
        Ok(out)
    }

    pub fn cutoffs(&self) -> [usize; 3] {
        self.dims.map(|d| d - 1)
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    fn index(&self, n1: usize, n2: usize, n3: usize) -> usize {
        (n1 * self.dims[1] + n2) * self.dims[2] + n3
    }

    pub fn get(&self, n1: usize, n2: usize, n3: usize) -> C64 {
        if n1 < self.dims[0] && n2 < self.dims[1] && n3 < self.dims[2] {
            self.amps[self.index(n1, n2, n3)]
        } else {
            C64::default()
        }
    }

    pub(crate) fn add(&mut self, n1: usize, n2: usize, n3: usize, v: C64) {
        let i = self.index(n1, n2, n3);
        self.amps[i] += v;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn dims(&self) -> [usize; 3] {
        self.dims
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn vacuum_at_zero_squeezing() {
        let v = smsv_amplitudes(SqueezeParam::new(0.0).unwrap(), 8);
        assert_eq!(v.get(0), c(1.0));
        assert!(v.amps()[1..].iter().all(|a| *a == C64::default()));
    }

    #[test]
    fn first_ratio_matches_direct_term() {
        let v = smsv_amplitudes(SqueezeParam::new(0.5).unwrap(), 8);
        let expected = 0.5f64.tanh() * 2f64.sqrt() / 2.0;
        assert!(((v.get(2) / v.get(0)).re - expected).abs() < 1e-15);
        assert!((expected - 0.32677).abs() < 1e-5);
    }

    #[test]
    fn odd_entries_exactly_zero() {
        for r in [0.1, 0.7, 1.9, 3.0] {
            let v = smsv_amplitudes(SqueezeParam::new(r).unwrap(), 101);
            for n in (1..=101).step_by(2) {
                assert_eq!(v.get(n), C64::default());
            }
        }
    }

    #[test]
    fn squeeze_domain() {
        assert!(SqueezeParam::new(-0.1).is_err());
        assert!(SqueezeParam::new(3.01).is_err());
        assert!(SqueezeParam::new(f64::NAN).is_err());
        assert!(SqueezeParam::new(3.0).is_ok());
    }

    #[test]
    fn photon_validation() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(DelocalizedPhoton::new(c(h), c(h)).is_ok());
        assert!(DelocalizedPhoton::new(c(0.6), c(0.8)).is_ok());
        assert!(matches!(DelocalizedPhoton::new(c(1.0), c(0.0)), Err(Error::DegenerateDelocalization)));
        assert!(matches!(DelocalizedPhoton::new(c(0.6), c(0.6)), Err(Error::NormViolation { .. })));
        assert!(matches!(DelocalizedPhoton::from_magnitude(1.0), Err(Error::DegenerateDelocalization)));
        let p = DelocalizedPhoton::new(C64::new(0.0, 0.6), c(0.8)).unwrap();
        assert_eq!(p.a0(), C64::new(0.0, 0.6));
    }

    #[test]
    fn cutoff_for_vacuum_is_four() {
        assert_eq!(choose_cutoff(SqueezeParam::new(0.0).unwrap(), 1e-12).unwrap(), 4);
    }

    #[test]
    fn cutoff_overflow_reports_requirement() {
        match choose_cutoff(SqueezeParam::new(3.0).unwrap(), 1e-12) {
            Err(Error::CutoffOverflow { required, max }) => {
                assert_eq!(max, DEFAULT_MAX_CUTOFF);
                assert!(required > max);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
        assert!(choose_cutoff(SqueezeParam::new(0.5).unwrap(), 0.0).is_err());
    }

    #[test]
    fn inner_products() {
        let zero = FockAmplitudes::number(0, 3);
        let one = FockAmplitudes::number(1, 3);
        assert_eq!(inner_product(&zero, &zero), c(1.0));
        assert_eq!(inner_product(&zero, &one), c(0.0));
        let v = FockAmplitudes::new(vec![c(0.6), C64::new(0.0, 0.8)]).unwrap();
        let w = v.scaled(C64::new(-0.3, 2.0));
        assert!((fidelity(&v, &w).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(fidelity(&v, &FockAmplitudes::zeros(1)), Err(Error::ZeroNorm)));
        // zero padding of the shorter vector
        assert_eq!(inner_product(&FockAmplitudes::number(0, 0), &zero), c(1.0));
    }

    #[test]
    fn containers_reject_bad_input() {
        assert!(FockAmplitudes::new(vec![]).is_err());
        assert!(FockAmplitudes::new(vec![c(1.0), c(0.1)]).is_err());
        assert!(TwoModeAmplitudes::new(1, 1, vec![c(0.5); 3]).is_err());
        assert!(ThreeModeAmplitudes::new([0, 0, 1], vec![c(1.0), c(1.0)]).is_err());
    }
}

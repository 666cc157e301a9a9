//! Beam-splitter action in the photon-number basis.
//!
//! Three independent routes are provided:
//!
//! * the closed forms for `|l>|0>` and `|l>|1>` as printed,
//! * the operator expansion of `a1† -> t a1† - r a2†`, `a2† -> r a1† + t a2†`
//!   (the production path, used by [`apply_bs`]),
//! * numerical exponentiation of `θ(a1† a2 - a1 a2†)` on a truncated space
//!   ([`bs_matrix_oracle`]).

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use parking_lot::RwLock;
use serde::Serialize;

use crate::combinatorics::{ln_binomial, ln_factorial, ln_pow};
use crate::error::{Error, Result};
use crate::fock::{TwoModeAmplitudes, ORACLE_BUFFER};

const BS_NORM_TOL: f64 = 1e-12;
/// Deviation above which a printed form is flagged in a [`ValidationReport`].
pub const FLAG_THRESHOLD: f64 = 1e-9;

/// Lossless real beam splitter `[[t, -r], [r, t]]` with `t, r` strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeamSplitter {
    t_bs: f64,
    r_bs: f64,
}

impl BeamSplitter {
    pub fn new(t_bs: f64, r_bs: f64) -> Result<Self> {
        for (name, v) in [("t_bs", t_bs), ("r_bs", r_bs)] {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must lie strictly inside (0, 1)"
                )));
            }
        }
        if (t_bs * t_bs + r_bs * r_bs - 1.0).abs() > BS_NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "t_bs^2 + r_bs^2 = {} must equal 1",
                t_bs * t_bs + r_bs * r_bs
            )));
        }
        Ok(Self { t_bs, r_bs })
    }

    /// Beam splitter with transmittance `t_bs` and `r_bs = sqrt(1 - t_bs^2)`.
    pub fn from_transmittance(t_bs: f64) -> Result<Self> {
        if !t_bs.is_finite() || t_bs <= 0.0 || t_bs >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "t_bs = {t_bs} must lie strictly inside (0, 1)"
            )));
        }
        Self::new(t_bs, (1.0 - t_bs * t_bs).sqrt())
    }

    pub fn t(&self) -> f64 {
        self.t_bs
    }

    pub fn r(&self) -> f64 {
        self.r_bs
    }

    /// Mixing angle `atan2(r, t)`.
    pub fn theta(&self) -> f64 {
        self.r_bs.atan2(self.t_bs)
    }
}

/// Output amplitudes of `|n1, n2>` as a function of the mode-2 photon number
/// `m2` (mode 1 then holds `n1 + n2 - m2`). `r` may be negative, which gives
/// the inverse transform.
pub(crate) fn expand_mode_transform(n1: usize, n2: usize, t: f64, r: f64) -> Vec<f64> {
    let total = n1 + n2;
    let mut out = vec![0.0; total + 1];
    let (ln_t, ln_r) = (t.abs().ln(), r.abs().ln());
    let (sign_t, sign_r) = (t.signum(), r.signum());
    let ln_norm = -0.5 * (ln_factorial(n1) + ln_factorial(n2));
    for j in 0..=n1 {
        for i in 0..=n2 {
            let m2 = j + i;
            let m1 = total - m2;
            let ln_mag = ln_binomial(n1, j)
                + ln_pow(ln_t, (n1 - j) as i64)
                + ln_pow(ln_r, j as i64)
                + ln_binomial(n2, i)
                + ln_pow(ln_r, (n2 - i) as i64)
                + ln_pow(ln_t, i as i64)
                + 0.5 * (ln_factorial(m1) + ln_factorial(m2))
                + ln_norm;
            // (t)^(n1-j) (-r)^j (r)^(n2-i) (t)^i
            let mut sign = if j % 2 == 1 { -1.0 } else { 1.0 };
            if (j + n2 - i) % 2 == 1 {
                sign *= sign_r;
            }
            if (n1 - j + i) % 2 == 1 {
                sign *= sign_t;
            }
            out[m2] += sign * ln_mag.exp();
        }
    }
    out
}

fn two_mode_from_m2(total: usize, coeffs: &[f64]) -> TwoModeAmplitudes {
    let mut out = TwoModeAmplitudes::zeros(total, total);
    for (m2, c) in coeffs.iter().enumerate() {
        out.set(total - m2, m2, C64::new(*c, 0.0));
    }
    out
}

/// Closed form for `BS|l>|0>` term by term:
/// `sum_k (-1)^k t^(l-k) r^k sqrt(C(l,k)) |l-k>|k>`.
pub fn bs_on_fock_vacuum(l: usize, bs: BeamSplitter) -> TwoModeAmplitudes {
    two_mode_from_m2(l, &printed_vacuum_coeffs(l, bs))
}

fn printed_vacuum_coeffs(l: usize, bs: BeamSplitter) -> Vec<f64> {
    let (ln_t, ln_r) = (bs.t().ln(), bs.r().ln());
    (0..=l)
        .map(|k| {
            let ln_mag = ln_pow(ln_t, (l - k) as i64) + ln_pow(ln_r, k as i64) + 0.5 * ln_binomial(l, k);
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            sign * ln_mag.exp()
        })
        .collect()
}

/// `BS|l>|1>` from the operator expansion
/// `(t a1† - r a2†)^l (r a1† + t a2†)|00> / sqrt(l!)`.
pub fn bs_on_fock_single(l: usize, bs: BeamSplitter) -> TwoModeAmplitudes {
    two_mode_from_m2(l + 1, &expand_mode_transform(l, 1, bs.t(), bs.r()))
}

/// Printed closed form for `BS|l>|1>`. The summand's mode-2 ket is read as
/// `|k+1>`, the only reading that conserves photon number; with it the
/// printed coefficients reproduce the operator expansion.
fn printed_single_coeffs(l: usize, bs: BeamSplitter) -> Vec<f64> {
    let (t, r) = (bs.t(), bs.r());
    let (ln_t, ln_r) = (t.ln(), r.ln());
    let mut out = vec![0.0; l + 2];
    out[0] = ((l as f64 + 1.0).sqrt().ln() + ln_pow(ln_t, l as i64) + ln_r).exp();
    for k in 0..=l {
        let ln_mag = ln_pow(ln_t, l as i64 - k as i64 - 1) + ln_pow(ln_r, k as i64) - ln_factorial(k)
            + 0.5 * (ln_factorial(k + 1) + ln_factorial(l) - ln_factorial(l - k));
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        let bracket = t * t - (l - k) as f64 / (k as f64 + 1.0) * r * r;
        out[k + 1] += sign * ln_mag.exp() * bracket;
    }
    out
}

fn check_capacity(state: &TwoModeAmplitudes) -> Result<()> {
    let [c1, c2] = state.cutoffs();
    let cap = c1.min(c2);
    if let Some((n1, n2, _)) = state.nonzero().find(|(n1, n2, _)| n1 + n2 > cap) {
        return Err(Error::CutoffOverflow { required: n1 + n2, max: cap });
    }
    Ok(())
}

fn apply_rotation(state: &TwoModeAmplitudes, t: f64, r: f64) -> Result<TwoModeAmplitudes> {
    check_capacity(state)?;
    let [c1, c2] = state.cutoffs();
    let mut out = TwoModeAmplitudes::zeros(c1, c2);
    for (n1, n2, a) in state.nonzero() {
        let total = n1 + n2;
        for (m2, c) in expand_mode_transform(n1, n2, t, r).into_iter().enumerate() {
            if c != 0.0 {
                out.add(total - m2, m2, a * c);
            }
        }
    }
    Ok(out)
}

/// Applies the beam splitter to an arbitrary two-mode state.
///
/// Every nonzero component `|n1, n2>` must satisfy `n1 + n2 <= min(cutoff1, cutoff2)`
/// so its image fits; otherwise [`Error::CutoffOverflow`].
pub fn apply_bs(state: &TwoModeAmplitudes, bs: BeamSplitter) -> Result<TwoModeAmplitudes> {
    apply_rotation(state, bs.t(), bs.r())
}

/// Inverse of [`apply_bs`] (the rotation by `-θ`).
pub fn apply_bs_inverse(state: &TwoModeAmplitudes, bs: BeamSplitter) -> Result<TwoModeAmplitudes> {
    apply_rotation(state, bs.t(), -bs.r())
}

/// `exp(θ(a1† a2 - a1 a2†))` on the space `n1, n2 <= cutoff`, as a dense
/// real matrix indexed by `n1 * (cutoff + 1) + n2`.
#[derive(Debug)]
pub struct BsOracle {
    cutoff: usize,
    matrix: DMatrix<f64>,
}

impl BsOracle {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.cutoff + 1) + n2
    }

    /// `<out1, out2| U |in1, in2>`.
    pub fn element(&self, out: (usize, usize), inp: (usize, usize)) -> f64 {
        self.matrix[(self.index(out.0, out.1), self.index(inp.0, inp.1))]
    }

    /// `max |(U^T U - I)_{ij}|` over basis states with `n1 + n2 <= cutoff - ORACLE_BUFFER`.
    pub fn interior_unitarity_error(&self) -> f64 {
        let interior = self.interior_indices();
        let mut worst = 0.0f64;
        for &i in &interior {
            for &j in &interior {
                let dot = self.matrix.column(i).dot(&self.matrix.column(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    fn interior_indices(&self) -> Vec<usize> {
        let limit = self.cutoff.saturating_sub(ORACLE_BUFFER);
        let mut out = Vec::new();
        for n1 in 0..=self.cutoff {
            for n2 in 0..=self.cutoff {
                if n1 + n2 <= limit {
                    out.push(self.index(n1, n2));
                }
            }
        }
        out
    }

    /// Applies the matrix to a state with the same cutoffs.
    pub fn apply(&self, state: &TwoModeAmplitudes) -> Result<TwoModeAmplitudes> {
        if state.cutoffs() != [self.cutoff, self.cutoff] {
            return Err(Error::InvalidParameter(format!(
                "oracle cutoff {} does not match state cutoffs {:?}",
                self.cutoff,
                state.cutoffs()
            )));
        }
        let mut out = TwoModeAmplitudes::zeros(self.cutoff, self.cutoff);
        for (n1, n2, a) in state.nonzero() {
            let col = self.matrix.column(self.index(n1, n2));
            for m1 in 0..=self.cutoff {
                for m2 in 0..=self.cutoff {
                    let u = col[self.index(m1, m2)];
                    if u != 0.0 {
                        out.add(m1, m2, a * u);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn build_oracle(theta: f64, cutoff: usize) -> BsOracle {
    let d = cutoff + 1;
    let mut matrix = DMatrix::<f64>::zeros(d * d, d * d);
    // the generator conserves n1 + n2, so each total is exponentiated on its own
    for total in 0..=2 * cutoff {
        let states: Vec<(usize, usize)> = (0..=total.min(cutoff))
            .filter(|n1| total - n1 <= cutoff)
            .map(|n1| (n1, total - n1))
            .collect();
        let pos: HashMap<(usize, usize), usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut gen = DMatrix::<f64>::zeros(states.len(), states.len());
        for (col, &(n1, n2)) in states.iter().enumerate() {
            // a1† a2
            if n2 > 0 {
                if let Some(&row) = pos.get(&(n1 + 1, n2 - 1)) {
                    gen[(row, col)] += theta * (((n1 + 1) * n2) as f64).sqrt();
                }
            }
            // -a1 a2†
            if n1 > 0 {
                if let Some(&row) = pos.get(&(n1 - 1, n2 + 1)) {
                    gen[(row, col)] -= theta * ((n1 * (n2 + 1)) as f64).sqrt();
                }
            }
        }
        let block = gen.exp();
        for (i, &(a1, a2)) in states.iter().enumerate() {
            for (j, &(b1, b2)) in states.iter().enumerate() {
                matrix[(a1 * d + a2, b1 * d + b2)] = block[(i, j)];
            }
        }
    }
    BsOracle { cutoff, matrix }
}

type OracleKey = (u64, u64, usize);

fn oracle_cache() -> &'static RwLock<HashMap<OracleKey, Arc<BsOracle>>> {
    static CACHE: OnceLock<RwLock<HashMap<OracleKey, Arc<BsOracle>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Exponentiation oracle for `bs` on the space truncated at `cutoff` per mode.
/// Results are memoized per `(t, r, cutoff)`.
pub fn bs_matrix_oracle(bs: BeamSplitter, cutoff: usize) -> Arc<BsOracle> {
    let key = (bs.t().to_bits(), bs.r().to_bits(), cutoff);
    if let Some(hit) = oracle_cache().read().get(&key) {
        return Arc::clone(hit);
    }
    let built = Arc::new(build_oracle(bs.theta(), cutoff));
    Arc::clone(oracle_cache().write().entry(key).or_insert(built))
}

/// Which printed closed form an entry refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrintedForm {
    Eq5,
    Eq6,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationEntry {
    pub l: usize,
    pub form: PrintedForm,
    pub max_dev: f64,
    pub flagged: bool,
}

/// Per-`(l, form)` maximum deviation between the printed form, the operator
/// expansion and the oracle. Serializes as a JSON array of entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn max_dev(&self) -> f64 {
        self.entries.iter().map(|e| e.max_dev).fold(0.0, f64::max)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compares the printed forms against the operator expansion and the
/// exponentiation oracle for every `l <= l_max`. Deviations above
/// [`FLAG_THRESHOLD`] are flagged, never fatal.
pub fn validate_printed_forms(bs: BeamSplitter, l_max: usize) -> ValidationReport {
    let cutoff = l_max + 1 + ORACLE_BUFFER;
    let oracle = bs_matrix_oracle(bs, cutoff);
    let mut entries = Vec::with_capacity(2 * (l_max + 1));
    for l in 0..=l_max {
        for (form, n2) in [(PrintedForm::Eq5, 0usize), (PrintedForm::Eq6, 1usize)] {
            let total = l + n2;
            let printed = match form {
                PrintedForm::Eq5 => printed_vacuum_coeffs(l, bs),
                PrintedForm::Eq6 => printed_single_coeffs(l, bs),
            };
            let expanded = expand_mode_transform(l, n2, bs.t(), bs.r());
            let from_oracle: Vec<f64> = (0..=total).map(|m2| oracle.element((total - m2, m2), (l, n2))).collect();
            // anything the oracle puts outside the fixed-total shell counts too
            let mut leak = 0.0f64;
            for m1 in 0..=cutoff {
                for m2 in 0..=cutoff {
                    if m1 + m2 != total {
                        leak = leak.max(oracle.element((m1, m2), (l, n2)).abs());
                    }
                }
            }
            let max_dev = max_abs_diff(&printed, &expanded)
                .max(max_abs_diff(&printed, &from_oracle))
                .max(max_abs_diff(&expanded, &from_oracle))
                .max(leak);
            entries.push(ValidationEntry { l, form, max_dev, flagged: max_dev > FLAG_THRESHOLD });
        }
    }
    ValidationReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(t: f64) -> BeamSplitter {
        BeamSplitter::from_transmittance(t).unwrap()
    }

    #[test]
    fn splitter_domain() {
        assert!(BeamSplitter::from_transmittance(0.0).is_err());
        assert!(BeamSplitter::from_transmittance(1.0).is_err());
        assert!(BeamSplitter::new(0.6, 0.7).is_err());
        assert!(BeamSplitter::new(0.6, 0.8).is_ok());
        assert!((bs(0.6).theta() - 0.8f64.atan2(0.6)).abs() < 1e-15);
    }

    #[test]
    fn vacuum_input_examples() {
        let b = bs(0.6);
        let out = bs_on_fock_vacuum(0, b);
        assert_eq!(out.get(0, 0), C64::new(1.0, 0.0));
        let out = bs_on_fock_vacuum(1, b);
        assert!((out.get(1, 0).re - 0.6).abs() < 1e-15);
        assert!((out.get(0, 1).re + 0.8).abs() < 1e-15);
        let (t, r) = (0.6, 0.8);
        let out = bs_on_fock_vacuum(2, b);
        assert!((out.get(2, 0).re - t * t).abs() < 1e-15);
        assert!((out.get(1, 1).re + 2f64.sqrt() * t * r).abs() < 1e-15);
        assert!((out.get(0, 2).re - r * r).abs() < 1e-15);
    }

    #[test]
    fn single_photon_input_examples() {
        let (t, r) = (0.6, 0.8);
        let out = bs_on_fock_single(0, bs(t));
        assert!((out.get(1, 0).re - r).abs() < 1e-15);
        assert!((out.get(0, 1).re - t).abs() < 1e-15);
        let out = bs_on_fock_single(1, bs(t));
        assert!((out.get(2, 0).re - 2f64.sqrt() * t * r).abs() < 1e-15);
        assert!((out.get(1, 1).re - (t * t - r * r)).abs() < 1e-15);
        assert!((out.get(0, 2).re + 2f64.sqrt() * t * r).abs() < 1e-15);
        for l in 0..40 {
            assert!((bs_on_fock_single(l, bs(0.37)).norm_sqr() - 1.0).abs() < 1e-13, "l={l}");
            assert!((bs_on_fock_vacuum(l, bs(0.37)).norm_sqr() - 1.0).abs() < 1e-13, "l={l}");
        }
    }

    #[test]
    fn printed_single_photon_form_at_l0() {
        let c = printed_single_coeffs(0, bs(0.6));
        assert!((c[0] - 0.8).abs() < 1e-15);
        assert!((c[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn identity_at_zero_angle() {
        let o = build_oracle(0.0, 4);
        assert!((o.matrix() - DMatrix::<f64>::identity(25, 25)).amax() == 0.0);
    }

    #[test]
    fn oracle_column_matches_single_photon_split() {
        let o = bs_matrix_oracle(bs(0.6), 10);
        assert!((o.element((1, 0), (1, 0)) - 0.6).abs() < 1e-14);
        assert!((o.element((0, 1), (1, 0)) + 0.8).abs() < 1e-14);
        assert!(o.interior_unitarity_error() < 1e-11);
    }

    #[test]
    fn cache_returns_shared_matrix() {
        let a = bs_matrix_oracle(bs(0.3), 6);
        let b = bs_matrix_oracle(bs(0.3), 6);
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn apply_reports_overflow() {
        let mut s = TwoModeAmplitudes::zeros(3, 3);
        s.set(2, 2, C64::new(1.0, 0.0));
        assert!(matches!(apply_bs(&s, bs(0.5)), Err(Error::CutoffOverflow { .. })));
        let vac = TwoModeAmplitudes::product(
            &crate::fock::FockAmplitudes::number(0, 3),
            &crate::fock::FockAmplitudes::number(0, 3),
        );
        assert_eq!(apply_bs(&vac, bs(0.5)).unwrap(), vac);
    }

    #[test]
    fn validation_is_clean_and_deterministic() {
        let a = validate_printed_forms(bs(0.42), 12);
        assert_eq!(a.entries.len(), 26);
        assert!(a.max_dev() < 1e-10, "{}", a.max_dev());
        assert_eq!(a, validate_printed_forms(bs(0.42), 12));
        let json = serde_json::to_string(&a.entries[0]).unwrap();
        assert!(json.starts_with(r#"{"l":0,"form":"eq5","max_dev":"#));
    }
}

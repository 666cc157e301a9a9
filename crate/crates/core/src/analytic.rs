//! Closed-form conditional states.
//!
//! For outcome `p` the heralded state is `N_p (a0 |Ψ_p>|1> ± a1 B_p |Φ_p>|0>)`
//! with the plus sign only for `p = 0`. The series for `Ψ_p`, `Φ_p`, their
//! normalizers `L_p`, `K_p`, the weight `B_p` and the success probability
//! `P_p` are evaluated in log space on the same truncated squeezed vacuum as
//! the numeric pipeline, so both paths see identical input.
//!
//! The odd-outcome `Φ` series as printed draws its squeezed-vacuum weight
//! from `b_{2(k+m+1)}`; the pipeline shows the weight is `b_{2(k+m)}` (with
//! the matching factorial). [`SeriesForm::Printed`] keeps the printed series
//! so the discrepancy can be reported; everything else uses
//! [`SeriesForm::Resolved`].

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::combinatorics::{ln_factorial, ln_pow, log_sum_exp};
use crate::error::{Error, Result};
use crate::fock::{fidelity, smsv_amplitudes, DelocalizedPhoton, FockAmplitudes, Parity, SqueezeParam};
use crate::herald::{HeraldSimulator, HybridState, PipelineConfig};
use crate::interferometer::BeamSplitter;

/// Deviation above which a printed closed form is listed as an erratum.
pub const ERRATA_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesForm {
    Printed,
    Resolved,
}

#[derive(Clone, Copy, Debug)]
struct Term {
    n: usize,
    ln_mag: f64,
    sign: f64,
}

/// A real Fock-space series stored term by term in log magnitude.
#[derive(Clone, Debug, Default)]
struct Series {
    terms: Vec<Term>,
}

impl Series {
    fn push(&mut self, n: usize, ln_mag: f64, sign: f64) {
        self.terms.push(Term { n, ln_mag, sign });
    }

    /// `ln` of the Euclidean norm.
    fn ln_norm(&self) -> f64 {
        0.5 * log_sum_exp(self.terms.iter().map(|t| 2.0 * t.ln_mag))
    }

    fn normalized_state(&self, cutoff: usize) -> Result<FockAmplitudes> {
        let ln_norm = self.ln_norm();
        if ln_norm == f64::NEG_INFINITY {
            return Err(Error::ZeroNorm);
        }
        let mut out = vec![C64::default(); cutoff + 1];
        for t in &self.terms {
            out[t.n] += C64::new(t.sign * (t.ln_mag - ln_norm).exp(), 0.0);
        }
        Ok(FockAmplitudes::new(out).expect("normalized series"))
    }
}

/// Shared inputs of all series: `ln b_{2j}` for `2j <= cutoff` and the splitter.
struct SeriesInput {
    ln_b: Vec<f64>,
    cutoff: usize,
    t: f64,
    r: f64,
}

impl SeriesInput {
    fn new(r_sq: SqueezeParam, bs: BeamSplitter, cutoff: usize) -> Self {
        let smsv = smsv_amplitudes(r_sq, cutoff);
        let ln_b = (0..=cutoff / 2).map(|j| smsv.get(2 * j).re.ln()).collect();
        Self { ln_b, cutoff, t: bs.t(), r: bs.r() }
    }

    fn half_max(&self) -> usize {
        self.ln_b.len() - 1
    }

    fn ln_t(&self) -> f64 {
        self.t.ln()
    }

    fn psi(&self, p: usize) -> Series {
        let mut s = Series::default();
        let h = self.half_max();
        let lt = self.ln_t();
        if p == 0 {
            for k in 0..=h {
                s.push(2 * k, self.ln_b[k] + ln_pow(lt, 2 * k as i64), 1.0);
            }
        } else if p % 2 == 0 {
            let m = p / 2;
            for k in 0..=h.saturating_sub(m) {
                if k + m > h {
                    break;
                }
                let ln = self.ln_b[k + m]
                    + ln_pow(lt, 2 * k as i64)
                    + 0.5 * (ln_factorial(2 * (k + m)) - ln_factorial(2 * k));
                s.push(2 * k, ln, 1.0);
            }
        } else {
            let m = (p - 1) / 2;
            for k in 0..=h {
                if k + m + 1 > h {
                    break;
                }
                let ln = self.ln_b[k + m + 1]
                    + ln_pow(lt, 2 * k as i64)
                    + 0.5 * (ln_factorial(2 * (k + m + 1)) - ln_factorial(2 * k + 1));
                s.push(2 * k + 1, ln, 1.0);
            }
        }
        s
    }

    fn phi(&self, p: usize, form: SeriesForm) -> Series {
        let mut s = Series::default();
        let h = self.half_max();
        let lt = self.ln_t();
        let (t2, r2) = (self.t * self.t, self.r * self.r);
        if p == 0 {
            for k in 0..=h {
                let ln = self.ln_b[k] + ln_pow(lt, 2 * k as i64) + 0.5 * (2.0 * k as f64 + 1.0).ln();
                s.push(2 * k + 1, ln, 1.0);
            }
        } else if p % 2 == 0 {
            let m = p / 2;
            for k in 0..=h {
                if k + m > h {
                    break;
                }
                let f = t2 - (2 * k + 1) as f64 / (2 * m) as f64 * r2;
                let ln = self.ln_b[k + m]
                    + ln_pow(lt, 2 * k as i64)
                    + 0.5 * (ln_factorial(2 * (k + m)) - ln_factorial(2 * k + 1))
                    + f.abs().ln();
                s.push(2 * k + 1, ln, f.signum());
            }
        } else {
            let m = (p - 1) / 2;
            // printed: weight b_{2(k+m+1)}; resolved: b_{2(k+m)}
            let shift = match form {
                SeriesForm::Printed => m + 1,
                SeriesForm::Resolved => m,
            };
            for k in 0..=h {
                if k + shift > h {
                    break;
                }
                let f = t2 - (2 * k) as f64 / (2 * m + 1) as f64 * r2;
                let ln = self.ln_b[k + shift]
                    + ln_pow(lt, 2 * k as i64 - 2)
                    + 0.5 * (ln_factorial(2 * (k + shift)) - ln_factorial(2 * k))
                    + f.abs().ln();
                s.push(2 * k, ln, f.signum());
            }
        }
        s
    }

    fn state_cutoff(&self) -> usize {
        self.cutoff + 1
    }
}

/// `+1` for `p = 0`, `-1` otherwise: the sign between the two hybrid branches.
pub fn relative_sign(p: usize) -> f64 {
    if p == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Normalizers and weights for outcome `p`, held in log space where they can overflow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedFormFactors {
    pub p: usize,
    /// `ln L_p` (`+inf` when the `Ψ_p` series vanishes identically).
    pub ln_l: f64,
    /// `ln K_p`.
    pub ln_k: f64,
    /// `B_p`.
    pub b: f64,
    /// `ln` of the outcome prefactor of `P_p`.
    ln_prefactor: f64,
    /// `ln` of the constant in front of `L_p / K_p` inside `B_p`.
    ln_b_constant: f64,
}

impl ClosedFormFactors {
    pub fn l(&self) -> f64 {
        self.ln_l.exp()
    }

    pub fn k(&self) -> f64 {
        self.ln_k.exp()
    }

    /// `N_p = (|a0|^2 + |a1|^2 B_p^2)^(-1/2)`.
    pub fn n(&self, photon: &DelocalizedPhoton) -> f64 {
        (photon.a0().norm_sqr() + photon.a1().norm_sqr() * self.b * self.b).powf(-0.5)
    }

    /// `P_p = prefactor / (L_p^2 N_p^2)`, expanded as
    /// `prefactor (|a0|^2 / L_p^2 + |a1|^2 B_p^2 / L_p^2)` so that a vanishing
    /// `Ψ_p` branch stays finite.
    pub fn probability(&self, photon: &DelocalizedPhoton) -> f64 {
        let psi_part = (self.ln_prefactor - 2.0 * self.ln_l).exp();
        let phi_part = (self.ln_prefactor + 2.0 * self.ln_b_constant - 2.0 * self.ln_k).exp();
        photon.a0().norm_sqr() * psi_part + photon.a1().norm_sqr() * phi_part
    }

    /// Relative weight `±B_p` of the `Φ` branch, or the branch weights
    /// `(a0 / L_p, ± a1 B_p / L_p)` up to a common factor.
    fn branch_weights(&self, photon: &DelocalizedPhoton) -> (C64, C64) {
        let psi = (-self.ln_l).exp();
        let phi = (self.ln_b_constant - self.ln_k).exp();
        (photon.a0() * psi, photon.a1() * relative_sign(self.p) * phi)
    }
}

fn build_factors(input: &SeriesInput, p: usize, form: SeriesForm) -> ClosedFormFactors {
    let ln_l = -input.psi(p).ln_norm();
    let ln_k = -input.phi(p, form).ln_norm();
    let (ln_r, ln_t) = (input.r.ln(), input.t.ln());
    let (ln_prefactor, ln_b_constant) = if p == 0 {
        (0.0, ln_r)
    } else if p % 2 == 0 {
        (2.0 * p as f64 * ln_r - ln_factorial(p), (p as f64).ln() - ln_r)
    } else {
        (2.0 * p as f64 * ln_r + 2.0 * ln_t - ln_factorial(p), (p as f64).ln() - ln_r)
    };
    let b = (ln_b_constant + ln_l - ln_k).exp();
    ClosedFormFactors { p, ln_l, ln_k, b, ln_prefactor, ln_b_constant }
}

/// `(|Ψ_p>, L_p)` on the squeezed vacuum truncated at `cutoff`.
pub fn psi_closed(p: usize, r_sq: SqueezeParam, bs: BeamSplitter, cutoff: usize) -> Result<(FockAmplitudes, f64)> {
    let input = SeriesInput::new(r_sq, bs, cutoff);
    let s = input.psi(p);
    Ok((s.normalized_state(input.state_cutoff())?, (-s.ln_norm()).exp()))
}

/// `(|Φ_p>, K_p)` on the squeezed vacuum truncated at `cutoff`.
pub fn phi_closed(p: usize, r_sq: SqueezeParam, bs: BeamSplitter, cutoff: usize) -> Result<(FockAmplitudes, f64)> {
    phi_closed_with(p, r_sq, bs, cutoff, SeriesForm::Resolved)
}

/// [`phi_closed`] with an explicit choice of printed or resolved series.
pub fn phi_closed_with(
    p: usize,
    r_sq: SqueezeParam,
    bs: BeamSplitter,
    cutoff: usize,
    form: SeriesForm,
) -> Result<(FockAmplitudes, f64)> {
    let input = SeriesInput::new(r_sq, bs, cutoff);
    let s = input.phi(p, form);
    Ok((s.normalized_state(input.state_cutoff())?, (-s.ln_norm()).exp()))
}

pub fn factors(p: usize, r_sq: SqueezeParam, bs: BeamSplitter, cutoff: usize) -> ClosedFormFactors {
    factors_with(p, r_sq, bs, cutoff, SeriesForm::Resolved)
}

pub fn factors_with(p: usize, r_sq: SqueezeParam, bs: BeamSplitter, cutoff: usize, form: SeriesForm) -> ClosedFormFactors {
    build_factors(&SeriesInput::new(r_sq, bs, cutoff), p, form)
}

pub fn success_probability_closed(
    p: usize,
    r_sq: SqueezeParam,
    bs: BeamSplitter,
    photon: &DelocalizedPhoton,
    cutoff: usize,
) -> f64 {
    factors(p, r_sq, bs, cutoff).probability(photon)
}

/// The full heralded state `N_p (a0 |Ψ_p>|1> ± a1 B_p |Φ_p>|0>)` in canonical form.
pub fn hybrid_closed(
    p: usize,
    r_sq: SqueezeParam,
    bs: BeamSplitter,
    photon: &DelocalizedPhoton,
    cutoff: usize,
) -> Result<HybridState> {
    hybrid_closed_with(p, r_sq, bs, photon, cutoff, SeriesForm::Resolved)
}

fn hybrid_closed_with(
    p: usize,
    r_sq: SqueezeParam,
    bs: BeamSplitter,
    photon: &DelocalizedPhoton,
    cutoff: usize,
    form: SeriesForm,
) -> Result<HybridState> {
    let input = SeriesInput::new(r_sq, bs, cutoff);
    let f = build_factors(&input, p, form);
    let (w_psi, w_phi) = f.branch_weights(photon);
    let dim = input.state_cutoff();
    let psi = input.psi(p).normalized_state(dim).unwrap_or_else(|_| FockAmplitudes::zeros(dim));
    let phi = input.phi(p, form).normalized_state(dim).unwrap_or_else(|_| FockAmplitudes::zeros(dim));
    HybridState::from_branches(w_psi, &psi, w_phi, &phi)
}

/// `(parity of Ψ_p, parity of Φ_p)`.
pub fn parity_of(p: usize) -> (Parity, Parity) {
    let psi = Parity::of(p);
    (psi, psi.flip())
}

/// Phase shifter on the single-photon arm: `|1> -> -|1>`, i.e. `c_psi -> -c_psi`.
pub fn apply_phase_flip(h: &HybridState) -> HybridState {
    HybridState { c_psi: -h.c_psi, ..h.clone() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrataParams {
    pub r_sq: f64,
    pub t_bs: f64,
    pub a1_mag: f64,
    /// Second-stage squeezing, for cascade entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_sq2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_bs2: Option<f64>,
}

/// One printed closed form that disagrees with the numeric pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrataEntry {
    pub equation: String,
    pub p: usize,
    pub params: ErrataParams,
    pub deviation: f64,
}

fn equation_labels(p: usize) -> [&'static str; 5] {
    // [state, psi series, phi series, B factor, probability]
    if p == 0 {
        ["eq7", "eq8", "eq9", "eq10", "eq11"]
    } else if p % 2 == 0 {
        ["eq12", "eq13", "eq14", "eq15", "eq16"]
    } else {
        ["eq17", "eq18", "eq19", "eq20", "eq21"]
    }
}

/// Compares every printed closed form for `p = 0..=p_max` with the numeric
/// pipeline at one parameter point and lists the deviations above
/// [`ERRATA_THRESHOLD`]. Outcomes of zero probability are skipped.
pub fn closed_form_errata(
    r_sq: SqueezeParam,
    bs: BeamSplitter,
    photon: &DelocalizedPhoton,
    p_max: usize,
    config: &PipelineConfig,
) -> Result<Vec<ErrataEntry>> {
    let sim = HeraldSimulator::new(r_sq, bs, *photon, config)?;
    let cutoff = sim.cutoff();
    let input = SeriesInput::new(r_sq, bs, cutoff);
    let params = ErrataParams { r_sq: r_sq.value(), t_bs: bs.t(), a1_mag: photon.a1().norm(), r_sq2: None, t_bs2: None };
    let mut out = Vec::new();
    for p in 0..=p_max.min(sim.max_outcome()) {
        let rec = sim.record(p)?;
        if rec.zero_probability || rec.state.c_psi.norm() == 0.0 || rec.state.c_phi.norm() == 0.0 {
            continue;
        }
        let labels = equation_labels(p);
        let f = build_factors(&input, p, SeriesForm::Printed);
        let dim = input.state_cutoff();
        let mut deviations = Vec::with_capacity(5);
        let printed = hybrid_closed_with(p, r_sq, bs, photon, cutoff, SeriesForm::Printed)?;
        deviations.push((labels[0], 1.0 - printed.fidelity(&rec.state)));
        let psi = input.psi(p).normalized_state(dim)?;
        deviations.push((labels[1], 1.0 - fidelity(&psi, &rec.state.psi)?));
        let phi = input.phi(p, SeriesForm::Printed).normalized_state(dim)?;
        deviations.push((labels[2], 1.0 - fidelity(&phi, &rec.state.phi)?));
        let b_numeric = rec.state.weight_ratio() * photon.a0().norm() / photon.a1().norm();
        deviations.push((labels[3], (f.b - b_numeric).abs()));
        deviations.push((labels[4], (f.probability(photon) - rec.probability).abs()));
        for (equation, deviation) in deviations {
            if !(deviation <= ERRATA_THRESHOLD) {
                out.push(ErrataEntry { equation: equation.to_string(), p, params, deviation });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> SqueezeParam {
        SqueezeParam::new(x).unwrap()
    }

    fn bs(t: f64) -> BeamSplitter {
        BeamSplitter::from_transmittance(t).unwrap()
    }

    #[test]
    fn unsqueezed_series_are_single_terms() {
        let (psi, l) = psi_closed(0, r(0.0), bs(0.4), 4).unwrap();
        assert_eq!(psi.get(0), C64::new(1.0, 0.0));
        assert_eq!(l, 1.0);
        let (phi, k) = phi_closed(0, r(0.0), bs(0.4), 4).unwrap();
        assert_eq!(phi.get(1), C64::new(1.0, 0.0));
        assert_eq!(k, 1.0);
        let f = factors(0, r(0.0), bs(0.4), 4);
        assert!((f.b - bs(0.4).r()).abs() < 1e-15);
    }

    #[test]
    fn vacuum_outcome_ratios() {
        let (t, cutoff) = (0.55, 40);
        let smsv = smsv_amplitudes(r(0.7), cutoff);
        let (psi, _) = psi_closed(0, r(0.7), bs(t), cutoff).unwrap();
        let (phi, _) = phi_closed(0, r(0.7), bs(t), cutoff).unwrap();
        for k in 1..6 {
            let want = (smsv.get(2 * k) / smsv.get(0)).re * t.powi(2 * k as i32);
            assert!(((psi.get(2 * k) / psi.get(0)).re - want).abs() < 1e-13 * want.abs().max(1.0));
            let want = (smsv.get(2 * k) / smsv.get(0)).re * t.powi(2 * k as i32) * (2.0 * k as f64 + 1.0).sqrt();
            assert!(((phi.get(2 * k + 1) / phi.get(1)).re - want).abs() < 1e-13 * want.abs().max(1.0));
        }
    }

    #[test]
    fn b_vanishes_as_transmittance_approaches_one() {
        let bs_values: Vec<f64> = [0.9, 0.99, 0.999, 0.99999]
            .iter()
            .map(|t| factors(0, r(0.5), bs(*t), 60).b)
            .collect();
        assert!(bs_values.windows(2).all(|w| w[1] < w[0]));
        assert!(bs_values[3] < 1e-2);
    }

    #[test]
    fn unsqueezed_probability() {
        let photon = DelocalizedPhoton::new(C64::new(0.6, 0.0), C64::new(0.8, 0.0)).unwrap();
        let b = bs(0.3);
        let p0 = success_probability_closed(0, r(0.0), b, &photon, 4);
        assert!((p0 - (0.36 + 0.64 * b.r().powi(2))).abs() < 1e-15);
        let p1 = success_probability_closed(1, r(0.0), b, &photon, 4);
        assert!((p1 - 0.64 * 0.09).abs() < 1e-15);
        assert_eq!(success_probability_closed(2, r(0.0), b, &photon, 4), 0.0);
    }

    #[test]
    fn parity_table() {
        assert_eq!(parity_of(0), (Parity::Even, Parity::Odd));
        assert_eq!(parity_of(3), (Parity::Odd, Parity::Even));
        for m in 0..5 {
            assert_eq!(parity_of(2 * m), parity_of(2 * m + 2));
        }
    }

    #[test]
    fn phase_flip_is_involution() {
        let photon = DelocalizedPhoton::balanced();
        let h = hybrid_closed(2, r(0.5), bs(0.6), &photon, 40).unwrap();
        let flipped = apply_phase_flip(&h);
        assert_eq!(apply_phase_flip(&flipped), h);
        assert_eq!(flipped.psi, h.psi);
        assert_eq!(flipped.c_psi.norm(), h.c_psi.norm());
    }

    #[test]
    fn printed_odd_phi_series_is_flagged() {
        let photon = DelocalizedPhoton::from_magnitude(0.8).unwrap();
        let errata = closed_form_errata(r(0.6), bs(0.55), &photon, 6, &PipelineConfig::default()).unwrap();
        let labels: Vec<&str> = errata.iter().map(|e| e.equation.as_str()).collect();
        for eq in ["eq19", "eq20", "eq21", "eq17"] {
            assert!(labels.contains(&eq), "{eq} missing from {labels:?}");
        }
        for eq in ["eq8", "eq9", "eq10", "eq11", "eq13", "eq14", "eq15", "eq16", "eq18", "eq7", "eq12"] {
            assert!(!labels.contains(&eq), "{eq} unexpectedly flagged");
        }
    }
}

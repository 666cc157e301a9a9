//! Numeric heralding pipeline.
//!
//! The squeezed vacuum (mode 1) meets mode 2 of the delocalized photon on
//! the beam splitter; the photon number of mode 2 is then measured. What is
//! left in modes 1 and 3 is returned as a [`HybridState`]: a CV branch
//! paired with `|1>_3` and another paired with `|0>_3`.

use num_complex::Complex64 as C64;
use serde::{Serialize, Serializer};

use crate::dump::{complex_pair, StateDump};
use crate::entanglement::schmidt_negativity;
use crate::error::{Error, Result};
use crate::fock::{
    choose_cutoff_with_max, inner_product, smsv_amplitudes, DelocalizedPhoton, FockAmplitudes, Parity,
    SqueezeParam, ThreeModeAmplitudes, TwoModeAmplitudes, DEFAULT_MAX_CUTOFF, DEFAULT_TAIL_EPS,
};
use crate::interferometer::{apply_bs, BeamSplitter};

/// Largest tolerated amplitude on the wrong photon-number parity of a branch.
pub const PARITY_TOL: f64 = 1e-13;

/// Truncation settings shared by all numeric paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub tail_eps: f64,
    pub cutoff_override: Option<usize>,
    pub max_cutoff: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { tail_eps: DEFAULT_TAIL_EPS, cutoff_override: None, max_cutoff: DEFAULT_MAX_CUTOFF }
    }
}

impl PipelineConfig {
    /// Squeezed-vacuum cutoff for `r_sq`.
    pub fn cutoff_for(&self, r_sq: SqueezeParam) -> Result<usize> {
        match self.cutoff_override {
            Some(c) if c > self.max_cutoff => Err(Error::CutoffOverflow { required: c, max: self.max_cutoff }),
            Some(c) => Ok(c),
            None => choose_cutoff_with_max(r_sq, self.tail_eps, self.max_cutoff),
        }
    }
}

/// `c_psi |psi> |1> + c_phi |phi> |0>` with normalized CV branches.
///
/// Conventions: each branch's first significant amplitude is real positive,
/// `c_psi` is real non-negative and the relative phase sits in `c_phi`.
/// A branch with zero weight is stored as the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    pub c_psi: C64,
    pub psi: FockAmplitudes,
    pub c_phi: C64,
    pub phi: FockAmplitudes,
}

fn split_branch(v: &FockAmplitudes) -> (C64, FockAmplitudes) {
    let n = v.norm();
    if n == 0.0 {
        return (C64::default(), v.clone());
    }
    let phase = v.leading_phase();
    (phase * n, v.scaled(phase.conj() / n))
}

impl HybridState {
    /// Builds the canonical form of `c_psi |psi>|1> + c_phi |phi>|0>` from
    /// arbitrary (unnormalized) branch vectors and weights.
    pub fn from_branches(c_psi: C64, psi: &FockAmplitudes, c_phi: C64, phi: &FockAmplitudes) -> Result<Self> {
        let cutoff = psi.cutoff().max(phi.cutoff());
        let (w_psi, psi) = split_branch(&psi.scaled(c_psi).padded(cutoff));
        let (w_phi, phi) = split_branch(&phi.scaled(c_phi).padded(cutoff));
        let total = (w_psi.norm_sqr() + w_phi.norm_sqr()).sqrt();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let anchor = if w_psi != C64::default() { w_psi } else { w_phi };
        let g = anchor.conj() / anchor.norm() / total;
        Ok(Self { c_psi: w_psi * g, psi, c_phi: w_phi * g, phi })
    }

    /// Splits a normalized conditional state indexed `[n_cv][n_dv]`.
    pub fn from_conditional(cond: &TwoModeAmplitudes) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        Self::from_branches(one, &cond.column(1), one, &cond.column(0))
    }

    pub fn cutoff(&self) -> usize {
        self.psi.cutoff()
    }

    /// Joint amplitudes indexed `[n_cv][n_dv]`.
    pub fn to_two_mode(&self) -> TwoModeAmplitudes {
        let mut out = TwoModeAmplitudes::zeros(self.cutoff(), 1);
        for n in 0..=self.cutoff() {
            out.set(n, 1, self.c_psi * self.psi.get(n));
            out.set(n, 0, self.c_phi * self.phi.get(n));
        }
        out
    }

    /// `<self|other>` over the full CV ⊗ DV state.
    pub fn overlap(&self, other: &HybridState) -> C64 {
        self.c_psi.conj() * other.c_psi * inner_product(&self.psi, &other.psi)
            + self.c_phi.conj() * other.c_phi * inner_product(&self.phi, &other.phi)
    }

    pub fn fidelity(&self, other: &HybridState) -> f64 {
        self.overlap(other).norm_sqr().min(1.0)
    }

    /// `|c_phi / c_psi|`.
    pub fn weight_ratio(&self) -> f64 {
        self.c_phi.norm() / self.c_psi.norm()
    }

    /// Checks that `psi` has the parity `psi_parity` and `phi` the opposite one.
    pub fn check_parity(&self, psi_parity: Parity) -> Result<()> {
        for (name, v, parity) in [("psi", &self.psi, psi_parity), ("phi", &self.phi, psi_parity.flip())] {
            let wrong = v.max_abs_on(parity.flip());
            if wrong >= PARITY_TOL {
                return Err(Error::ParityViolation(format!(
                    "{name} branch carries amplitude {wrong:e} on {:?} photon numbers",
                    parity.flip()
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one heralding event.
#[derive(Clone, Debug, PartialEq)]
pub struct HeraldRecord {
    pub p: usize,
    pub state: HybridState,
    pub probability: f64,
    pub negativity: f64,
    /// Set when the outcome has zero probability at machine level; the state is then empty.
    pub zero_probability: bool,
    /// Squeezed-vacuum cutoff used to produce the record.
    pub cutoff: usize,
}

#[derive(Serialize)]
struct HeraldRecordJson {
    p: usize,
    probability: f64,
    negativity: f64,
    #[serde(with = "complex_pair")]
    c_psi: C64,
    #[serde(with = "complex_pair")]
    c_phi: C64,
    psi: StateDump,
    phi: StateDump,
}

impl Serialize for HeraldRecord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HeraldRecordJson {
            p: self.p,
            probability: self.probability,
            negativity: self.negativity,
            c_psi: self.state.c_psi,
            c_phi: self.state.c_phi,
            psi: StateDump::from(&self.state.psi),
            phi: StateDump::from(&self.state.phi),
        }
        .serialize(s)
    }
}

/// Result of a photon-number projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection<S> {
    /// Renormalized conditional state (all zeros when `zero_probability`).
    pub state: S,
    pub probability: f64,
    pub zero_probability: bool,
}

/// States whose modes can be projected onto a Fock state.
pub trait Projectable {
    type Reduced;

    fn project_photon_number(&self, mode: usize, p: usize) -> Result<Projection<Self::Reduced>>;
}

fn renormalize<T>(probability: f64, state: T, scale: impl Fn(&T, C64) -> T) -> Projection<T> {
    if probability < f64::MIN_POSITIVE {
        let empty = scale(&state, C64::default());
        return Projection { state: empty, probability, zero_probability: true };
    }
    let s = scale(&state, C64::new(1.0 / probability.sqrt(), 0.0));
    Projection { state: s, probability, zero_probability: false }
}

impl Projectable for TwoModeAmplitudes {
    type Reduced = FockAmplitudes;

    fn project_photon_number(&self, mode: usize, p: usize) -> Result<Projection<FockAmplitudes>> {
        let cutoffs = self.cutoffs();
        let cutoff = *cutoffs.get(mode).ok_or_else(|| Error::InvalidParameter(format!("mode {mode} out of range")))?;
        if p > cutoff {
            return Err(Error::OutcomeBeyondCutoff { p, cutoff });
        }
        let slice = if mode == 0 { self.row(p) } else { self.column(p) };
        Ok(renormalize(slice.norm_sqr(), slice, |s, c| s.scaled(c)))
    }
}

impl Projectable for ThreeModeAmplitudes {
    type Reduced = TwoModeAmplitudes;

    fn project_photon_number(&self, mode: usize, p: usize) -> Result<Projection<TwoModeAmplitudes>> {
        let cutoffs = self.cutoffs();
        let cutoff = *cutoffs.get(mode).ok_or_else(|| Error::InvalidParameter(format!("mode {mode} out of range")))?;
        if p > cutoff {
            return Err(Error::OutcomeBeyondCutoff { p, cutoff });
        }
        let rest: Vec<usize> = (0..3).filter(|m| *m != mode).collect();
        let dims = self.dims();
        let mut slice = TwoModeAmplitudes::zeros(cutoffs[rest[0]], cutoffs[rest[1]]);
        for i in 0..dims[rest[0]] {
            for j in 0..dims[rest[1]] {
                let mut idx = [0usize; 3];
                idx[mode] = p;
                idx[rest[0]] = i;
                idx[rest[1]] = j;
                slice.set(i, j, self.get(idx[0], idx[1], idx[2]));
            }
        }
        Ok(renormalize(slice.norm_sqr(), slice, |s, c| s.scaled(c)))
    }
}

/// Projects `mode` of `state` onto `|p>`.
pub fn project_photon_number<S: Projectable>(state: &S, mode: usize, p: usize) -> Result<Projection<S::Reduced>> {
    state.project_photon_number(mode, p)
}

/// `BS(|smsv> ⊗ |n2>)` for `n2` in {0, 1}, padded to `cutoff + 1` photons per mode.
pub(crate) fn mixed_with_smsv(r_sq: SqueezeParam, cutoff: usize, bs: BeamSplitter, n2: usize) -> Result<TwoModeAmplitudes> {
    let pad = cutoff + 1;
    let smsv = smsv_amplitudes(r_sq, cutoff).padded(pad);
    let input = TwoModeAmplitudes::product(&smsv, &FockAmplitudes::number(n2, pad));
    apply_bs(&input, bs)
}

/// The three-mode state after the beam splitter, ready for repeated projection.
#[derive(Clone, Debug)]
pub struct HeraldSimulator {
    cutoff: usize,
    joint: ThreeModeAmplitudes,
}

impl HeraldSimulator {
    pub fn new(r_sq: SqueezeParam, bs: BeamSplitter, photon: DelocalizedPhoton, config: &PipelineConfig) -> Result<Self> {
        let cutoff = config.cutoff_for(r_sq)?;
        let with_vacuum = mixed_with_smsv(r_sq, cutoff, bs, 0)?;
        let with_photon = mixed_with_smsv(r_sq, cutoff, bs, 1)?;
        let pad = cutoff + 1;
        let mut joint = ThreeModeAmplitudes::zeros(pad, pad, 1);
        for (n1, n2, a) in with_vacuum.nonzero() {
            joint.add(n1, n2, 1, photon.a0() * a);
        }
        for (n1, n2, a) in with_photon.nonzero() {
            joint.add(n1, n2, 0, photon.a1() * a);
        }
        Ok(Self { cutoff, joint })
    }

    /// Squeezed-vacuum cutoff in use.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Largest outcome representable in the auxiliary mode.
    pub fn max_outcome(&self) -> usize {
        self.cutoff + 1
    }

    /// Modes (1, 2, 3) just before the measurement.
    pub fn joint(&self) -> &ThreeModeAmplitudes {
        &self.joint
    }

    pub fn record(&self, p: usize) -> Result<HeraldRecord> {
        let proj = project_photon_number(&self.joint, 1, p)?;
        if proj.zero_probability {
            let empty = FockAmplitudes::zeros(self.cutoff + 1);
            let state = HybridState { c_psi: C64::default(), psi: empty.clone(), c_phi: C64::default(), phi: empty };
            return Ok(HeraldRecord {
                p,
                state,
                probability: proj.probability,
                negativity: 0.0,
                zero_probability: true,
                cutoff: self.cutoff,
            });
        }
        let state = HybridState::from_conditional(&proj.state)?;
        state.check_parity(Parity::of(p))?;
        let negativity = schmidt_negativity(&state)?.value;
        Ok(HeraldRecord { p, state, probability: proj.probability, negativity, zero_probability: false, cutoff: self.cutoff })
    }

    pub fn distribution(&self, p_max: usize) -> Result<HeraldDistribution> {
        if p_max > self.max_outcome() {
            return Err(Error::OutcomeBeyondCutoff { p: p_max, cutoff: self.max_outcome() });
        }
        let records = (0..=p_max).map(|p| self.record(p)).collect::<Result<Vec<_>>>()?;
        let total_probability = records.iter().map(|r| r.probability).sum();
        Ok(HeraldDistribution { records, total_probability, deficit: 1.0 - total_probability })
    }
}

/// Records for `p = 0..=p_max` with their summed probability.
#[derive(Clone, Debug, Serialize)]
pub struct HeraldDistribution {
    pub records: Vec<HeraldRecord>,
    pub total_probability: f64,
    pub deficit: f64,
}

/// Runs the full pipeline for one outcome `p`.
pub fn herald_hybrid_numeric(
    r_sq: SqueezeParam,
    bs: BeamSplitter,
    photon: DelocalizedPhoton,
    p: usize,
    config: &PipelineConfig,
) -> Result<HeraldRecord> {
    HeraldSimulator::new(r_sq, bs, photon, config)?.record(p)
}

/// Records for every outcome up to `p_max`.
pub fn herald_distribution(
    r_sq: SqueezeParam,
    bs: BeamSplitter,
    photon: DelocalizedPhoton,
    p_max: usize,
    config: &PipelineConfig,
) -> Result<HeraldDistribution> {
    HeraldSimulator::new(r_sq, bs, photon, config)?.distribution(p_max)
}

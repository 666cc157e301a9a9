//! Second heralding stage.
//!
//! A fresh squeezed vacuum (mode 2) meets the DV mode (mode 3) of a hybrid
//! state heralded on the vacuum outcome. Measuring mode 3 leaves two CV modes
//! in a superposition of two parity-separated products:
//!
//! `w1 |Ψ0>_1 |Φ_p>_2 + w2 |Φ0>_1 |Ψ_p>_2`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Serialize, Serializer};

use crate::analytic::{
    factors, factors_with, phi_closed, phi_closed_with, psi_closed, relative_sign, ErrataEntry, ErrataParams,
    SeriesForm, ERRATA_THRESHOLD,
};
use crate::dump::{complex_pair, StateDump};
use crate::entanglement::Bipartite;
use crate::error::{Error, Result};
use crate::fock::{
    fidelity_two_mode, DelocalizedPhoton, FockAmplitudes, Parity, SqueezeParam, ThreeModeAmplitudes,
    TwoModeAmplitudes,
};
use crate::herald::{mixed_with_smsv, HeraldRecord, HeraldSimulator, PipelineConfig};
use crate::interferometer::BeamSplitter;

/// Largest singular value tolerated beyond the two parity branches.
pub const FACTORIZATION_TOL: f64 = 1e-9;

/// Which CV family a branch component belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchLabel {
    Psi,
    Phi,
}

/// A product `|mode1> ⊗ |mode2>` of normalized (or zero) single-mode states.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub mode1: FockAmplitudes,
    pub mode2: FockAmplitudes,
}

/// `w1 |Ψ0>|Φ_p> + w2 |Φ0>|Ψ_p>`.
///
/// Same conventions as the hybrid state: every non-zero branch component has
/// its first significant amplitude real positive, `w1` is real non-negative
/// and `|w1|^2 + |w2|^2 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CVEntangledState {
    pub p: usize,
    pub w1: C64,
    pub branch1: Branch,
    pub w2: C64,
    pub branch2: Branch,
}

fn canonical(v: &FockAmplitudes) -> (C64, FockAmplitudes) {
    let n = v.norm();
    if n == 0.0 {
        return (C64::default(), v.clone());
    }
    let phase = v.leading_phase();
    (phase * n, v.scaled(phase.conj() / n))
}

impl CVEntangledState {
    /// Builds the canonical state from unnormalized branch data.
    pub fn from_branches(p: usize, w1: C64, branch1: (&FockAmplitudes, &FockAmplitudes), w2: C64, branch2: (&FockAmplitudes, &FockAmplitudes)) -> Result<Self> {
        let (g11, u1) = canonical(branch1.0);
        let (g12, v1) = canonical(branch1.1);
        let (g21, u2) = canonical(branch2.0);
        let (g22, v2) = canonical(branch2.1);
        let mut w1 = w1 * g11 * g12;
        let mut w2 = w2 * g21 * g22;
        let total = (w1.norm_sqr() + w2.norm_sqr()).sqrt();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let global = if w1.norm() > 0.0 { w1.conj() / w1.norm() } else { w2.conj() / w2.norm() };
        w1 = w1 * global / total;
        w2 = w2 * global / total;
        Ok(Self { p, w1, branch1: Branch { mode1: u1, mode2: v1 }, w2, branch2: Branch { mode1: u2, mode2: v2 } })
    }

    pub fn cutoffs(&self) -> [usize; 2] {
        [self.branch1.mode1.cutoff(), self.branch1.mode2.cutoff()]
    }

    pub fn to_two_mode(&self) -> TwoModeAmplitudes {
        let [c1, c2] = self.cutoffs();
        let mut out = TwoModeAmplitudes::zeros(c1, c2);
        for (w, b) in [(self.w1, &self.branch1), (self.w2, &self.branch2)] {
            for (i, x) in b.mode1.amps().iter().enumerate() {
                if *x == C64::default() {
                    continue;
                }
                for (j, y) in b.mode2.amps().iter().enumerate() {
                    out.add(i, j, w * x * y);
                }
            }
        }
        out
    }

    pub fn fidelity(&self, other: &CVEntangledState) -> Result<f64> {
        fidelity_two_mode(&self.to_two_mode(), &other.to_two_mode())
    }

    /// `|w2| / |w1|`, i.e. `|a1| B' / |a0|`.
    pub fn weight_ratio(&self) -> f64 {
        self.w2.norm() / self.w1.norm()
    }
}

impl Bipartite for CVEntangledState {
    fn coefficient_matrix(&self) -> DMatrix<C64> {
        self.to_two_mode().coefficient_matrix()
    }
}

#[derive(Serialize)]
struct Labels {
    mode1: BranchLabel,
    mode2: BranchLabel,
}

#[derive(Serialize)]
struct BranchJson {
    labels: Labels,
    mode1: StateDump,
    mode2: StateDump,
}

#[derive(Serialize)]
struct CvJson {
    p: usize,
    #[serde(with = "complex_pair")]
    w1: C64,
    branch1: BranchJson,
    #[serde(with = "complex_pair")]
    w2: C64,
    branch2: BranchJson,
}

impl Serialize for CVEntangledState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let branch = |b: &Branch, l1, l2| BranchJson {
            labels: Labels { mode1: l1, mode2: l2 },
            mode1: StateDump::from(&b.mode1),
            mode2: StateDump::from(&b.mode2),
        };
        CvJson {
            p: self.p,
            w1: self.w1,
            branch1: branch(&self.branch1, BranchLabel::Psi, BranchLabel::Phi),
            w2: self.w2,
            branch2: branch(&self.branch2, BranchLabel::Phi, BranchLabel::Psi),
        }
        .serialize(s)
    }
}

/// First-stage parameters. The first stage is always heralded on vacuum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage1Params {
    pub r_sq: SqueezeParam,
    pub bs: BeamSplitter,
    pub photon: DelocalizedPhoton,
}

impl Stage1Params {
    pub fn herald(&self, config: &PipelineConfig) -> Result<HeraldRecord> {
        HeraldSimulator::new(self.r_sq, self.bs, self.photon, config)?.record(0)
    }
}

/// Second-stage state before measuring mode 3.
#[derive(Clone, Debug)]
pub struct CascadeSimulator {
    stage1: HeraldRecord,
    cutoff2: usize,
    with_photon: TwoModeAmplitudes,
    with_vacuum: TwoModeAmplitudes,
}

impl CascadeSimulator {
    pub fn new(stage1: &HeraldRecord, r_sq2: SqueezeParam, bs2: BeamSplitter, config: &PipelineConfig) -> Result<Self> {
        if stage1.p != 0 {
            return Err(Error::InvalidParameter(format!("first stage must be heralded on p = 0, got {}", stage1.p)));
        }
        if stage1.zero_probability {
            return Err(Error::ZeroNorm);
        }
        let cutoff2 = config.cutoff_for(r_sq2)?;
        Ok(Self {
            stage1: stage1.clone(),
            cutoff2,
            with_photon: mixed_with_smsv(r_sq2, cutoff2, bs2, 1)?,
            with_vacuum: mixed_with_smsv(r_sq2, cutoff2, bs2, 0)?,
        })
    }

    /// Squeezed-vacuum cutoff of the second stage.
    pub fn cutoff(&self) -> usize {
        self.cutoff2
    }

    pub fn max_outcome(&self) -> usize {
        self.cutoff2 + 1
    }

    /// Modes (1, 2, 3) after the second beam splitter.
    pub fn joint(&self) -> ThreeModeAmplitudes {
        let h = &self.stage1.state;
        let c1 = h.cutoff();
        let [c2, c3] = self.with_photon.cutoffs();
        let mut joint = ThreeModeAmplitudes::zeros(c1, c2, c3);
        for (w, cv, mixed) in [(h.c_psi, &h.psi, &self.with_photon), (h.c_phi, &h.phi, &self.with_vacuum)] {
            for (n1, x) in cv.amps().iter().enumerate() {
                if *x == C64::default() {
                    continue;
                }
                for (n2, n3, y) in mixed.nonzero() {
                    joint.add(n1, n2, n3, w * x * y);
                }
            }
        }
        joint
    }

    /// Unnormalized conditional state of modes (1, 2) for outcome `p`.
    fn conditional(&self, p: usize) -> Result<TwoModeAmplitudes> {
        if p > self.max_outcome() {
            return Err(Error::OutcomeBeyondCutoff { p, cutoff: self.max_outcome() });
        }
        let h = &self.stage1.state;
        let x_psi = self.with_photon.column(p).scaled(h.c_psi);
        let x_phi = self.with_vacuum.column(p).scaled(h.c_phi);
        let mut out = TwoModeAmplitudes::product(&h.psi, &x_psi);
        for (n1, n2, v) in TwoModeAmplitudes::product(&h.phi, &x_phi).nonzero() {
            out.add(n1, n2, v);
        }
        Ok(out)
    }

    pub fn probability(&self, p: usize) -> Result<f64> {
        Ok(self.conditional(p)?.norm_sqr())
    }

    /// Outcome probabilities for `p = 0..=p_max`.
    pub fn probabilities(&self, p_max: usize) -> Result<Vec<f64>> {
        (0..=p_max).map(|p| self.probability(p)).collect()
    }

    /// Conditional state for outcome `p`, factored into its two parity branches.
    pub fn outcome(&self, p: usize) -> Result<(CVEntangledState, f64)> {
        let cond = self.conditional(p)?;
        let probability = cond.norm_sqr();
        if probability < f64::MIN_POSITIVE {
            return Err(Error::ZeroNorm);
        }
        let cond = cond.scaled(C64::new(probability.sqrt().recip(), 0.0));
        check_rank_two(&cond)?;
        let (w1, u1, v1) = parity_block(&cond, Parity::Even, Parity::of(p).flip())?;
        let (w2, u2, v2) = parity_block(&cond, Parity::Odd, Parity::of(p))?;
        let state = CVEntangledState::from_branches(p, w1, (&u1, &v1), w2, (&u2, &v2))?;
        Ok((state, probability))
    }
}

fn check_rank_two(cond: &TwoModeAmplitudes) -> Result<()> {
    let s = cond.coefficient_matrix().singular_values();
    let mut s: Vec<f64> = s.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    match s.get(2) {
        Some(x) if *x > FACTORIZATION_TOL => {
            Err(Error::BranchFactorizationFailure(format!("third singular value {x:e}")))
        }
        _ => Ok(()),
    }
}

/// Rank-one factorization of the rows of `cond` with mode-1 parity `rows`.
/// Returns `(weight, mode-1 vector, mode-2 vector)`, zero when the block is empty.
fn parity_block(cond: &TwoModeAmplitudes, rows: Parity, mode2: Parity) -> Result<(C64, FockAmplitudes, FockAmplitudes)> {
    let [c1, c2] = cond.cutoffs();
    let idx: Vec<usize> = (0..=c1).filter(|n| Parity::of(*n) == rows).collect();
    let block = DMatrix::from_fn(idx.len(), c2 + 1, |i, j| cond.get(idx[i], j));
    let weight = block.norm();
    if weight == 0.0 {
        return Ok((C64::default(), FockAmplitudes::zeros(c1), FockAmplitudes::zeros(c2)));
    }
    let svd = block.svd(true, true);
    let (u, v_t) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    if let Some(k) = order.get(1) {
        let s = svd.singular_values[*k];
        if s > FACTORIZATION_TOL {
            return Err(Error::BranchFactorizationFailure(format!("{rows:?} block has second singular value {s:e}")));
        }
    }
    let k = order[0];
    let mut a = vec![C64::default(); c1 + 1];
    for (i, n) in idx.iter().enumerate() {
        a[*n] = u[(i, k)];
    }
    let b = FockAmplitudes::from_raw((0..=c2).map(|j| v_t[(k, j)]).collect());
    let wrong = b.max_abs_on(mode2.flip());
    if wrong > FACTORIZATION_TOL {
        return Err(Error::BranchFactorizationFailure(format!("mode-2 component has {wrong:e} on the wrong parity")));
    }
    Ok((C64::new(svd.singular_values[k], 0.0), FockAmplitudes::from_raw(a), b))
}

/// Runs the second stage on a vacuum-heralded first stage and measures `p`.
pub fn cascade_numeric(
    stage1: &HeraldRecord,
    r_sq2: SqueezeParam,
    bs2: BeamSplitter,
    p: usize,
    config: &PipelineConfig,
) -> Result<(CVEntangledState, f64)> {
    CascadeSimulator::new(stage1, r_sq2, bs2, config)?.outcome(p)
}

/// `B'_p = B_0 / B_p`, first-stage `B_0` over second-stage `B_p`.
pub fn b_prime(p: usize, stage1: &Stage1Params, r_sq2: SqueezeParam, bs2: BeamSplitter, config: &PipelineConfig) -> Result<f64> {
    let b0 = factors(0, stage1.r_sq, stage1.bs, config.cutoff_for(stage1.r_sq)?).b;
    let bp = factors(p, r_sq2, bs2, config.cutoff_for(r_sq2)?).b;
    Ok(b0 / bp)
}

fn closed_with(
    p: usize,
    stage1: &Stage1Params,
    r_sq2: SqueezeParam,
    bs2: BeamSplitter,
    config: &PipelineConfig,
    form: SeriesForm,
    b_prime: f64,
) -> Result<CVEntangledState> {
    let (n1, n2) = (config.cutoff_for(stage1.r_sq)?, config.cutoff_for(r_sq2)?);
    let (psi0, _) = psi_closed(0, stage1.r_sq, stage1.bs, n1)?;
    let (phi0, _) = phi_closed(0, stage1.r_sq, stage1.bs, n1)?;
    let dim = n2 + 1;
    let psi_p = psi_closed(p, r_sq2, bs2, n2).map(|x| x.0).unwrap_or_else(|_| FockAmplitudes::zeros(dim));
    let phi_p = phi_closed_with(p, r_sq2, bs2, n2, form).map(|x| x.0).unwrap_or_else(|_| FockAmplitudes::zeros(dim));
    let a0 = stage1.photon.a0();
    let a1 = stage1.photon.a1();
    let b_prime = if b_prime.is_finite() { b_prime } else { 0.0 };
    let (w1, w2) = if phi_p.is_zero() {
        (C64::default(), C64::new(1.0, 0.0))
    } else {
        (a0, a1 * relative_sign(p) * b_prime)
    };
    CVEntangledState::from_branches(p, w1, (&psi0, &phi_p), w2, (&phi0, &psi_p))
}

/// `N' (a0 |Ψ0>|Φ_p> ± a1 B'_p |Φ0>|Ψ_p>)` in canonical form.
pub fn cascade_closed(
    p: usize,
    stage1: &Stage1Params,
    r_sq2: SqueezeParam,
    bs2: BeamSplitter,
    config: &PipelineConfig,
) -> Result<CVEntangledState> {
    let b = b_prime(p, stage1, r_sq2, bs2, config)?;
    closed_with(p, stage1, r_sq2, bs2, config, SeriesForm::Resolved, b)
}

/// Compares the printed cascade forms with the numeric second stage for
/// `p = 0..=p_max` and lists the deviations above [`ERRATA_THRESHOLD`].
pub fn cascade_errata(
    stage1: &Stage1Params,
    r_sq2: SqueezeParam,
    bs2: BeamSplitter,
    p_max: usize,
    config: &PipelineConfig,
) -> Result<Vec<ErrataEntry>> {
    let record = stage1.herald(config)?;
    let sim = CascadeSimulator::new(&record, r_sq2, bs2, config)?;
    let (n1, n2) = (config.cutoff_for(stage1.r_sq)?, config.cutoff_for(r_sq2)?);
    let b0 = factors(0, stage1.r_sq, stage1.bs, n1).b;
    let photon = stage1.photon;
    let params = ErrataParams {
        r_sq: stage1.r_sq.value(),
        t_bs: stage1.bs.t(),
        a1_mag: photon.a1().norm(),
        r_sq2: Some(r_sq2.value()),
        t_bs2: Some(bs2.t()),
    };
    let mut out = Vec::new();
    for p in 0..=p_max.min(sim.max_outcome()) {
        if sim.probability(p)? < f64::MIN_POSITIVE {
            continue;
        }
        let (numeric, _) = sim.outcome(p)?;
        if numeric.w1.norm() == 0.0 || numeric.w2.norm() == 0.0 {
            continue;
        }
        let b_numeric = numeric.weight_ratio() * photon.a0().norm() / photon.a1().norm();
        let mut deviations = Vec::new();
        if p == 0 {
            let printed = closed_with(p, stage1, r_sq2, bs2, config, SeriesForm::Printed, 1.0)?;
            deviations.push(("eq23", 1.0 - printed.fidelity(&numeric)?));
        } else if p % 2 == 0 {
            let fp = factors_with(p, r_sq2, bs2, n2, SeriesForm::Printed);
            let printed = closed_with(p, stage1, r_sq2, bs2, config, SeriesForm::Printed, b0 / fp.b)?;
            deviations.push(("eq24", 1.0 - printed.fidelity(&numeric)?));
            deviations.push(("eq24_b_prime", (b0 / fp.b - b_numeric).abs()));
        } else {
            let fp = factors_with(p, r_sq2, bs2, n2, SeriesForm::Printed);
            let printed = closed_with(p, stage1, r_sq2, bs2, config, SeriesForm::Printed, b0 / fp.b)?;
            deviations.push(("eq25", 1.0 - printed.fidelity(&numeric)?));
            let f = factors(p, r_sq2, bs2, n2);
            let prose = b0 * bs2.r() * f.k() / (p as f64 * factors(p - 1, r_sq2, bs2, n2).l());
            deviations.push(("eq25_prose", (prose - b_numeric).abs()));
        }
        for (equation, deviation) in deviations {
            if !(deviation <= ERRATA_THRESHOLD) {
                out.push(ErrataEntry { equation: equation.to_string(), p, params, deviation });
            }
        }
    }
    Ok(out)
}

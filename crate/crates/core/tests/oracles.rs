//! Cross-checks against independently built references: the matrix
//! exponential of the beam-splitter generator and the partial transpose of
//! the density matrix.

use heralded_hybrid::cascade::{CascadeSimulator, Stage1Params};
use heralded_hybrid::entanglement::{negativity_closed, schmidt_negativity, Bipartite};
use heralded_hybrid::fock::{
    fidelity_two_mode, smsv_amplitudes, DelocalizedPhoton, FockAmplitudes, SqueezeParam, TwoModeAmplitudes,
};
use heralded_hybrid::herald::{HeraldSimulator, PipelineConfig};
use heralded_hybrid::interferometer::{bs_matrix_oracle, BeamSplitter};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

fn sq(r: f64) -> SqueezeParam {
    SqueezeParam::new(r).unwrap()
}

fn bs(t: f64) -> BeamSplitter {
    BeamSplitter::from_transmittance(t).unwrap()
}

/// `2 * sum |negative eigenvalues|` of the partial transpose of `|v><v|`.
fn ppt_negativity(m: &DMatrix<C64>) -> f64 {
    let (da, db) = m.shape();
    let n = da * db;
    let mut rho_pt = DMatrix::<C64>::zeros(n, n);
    for i in 0..da {
        for j in 0..db {
            for k in 0..da {
                for l in 0..db {
                    // <i j|rho|k l> = m[i,j] conj(m[k,l]); transpose on the second party swaps j and l
                    rho_pt[(i * db + l, k * db + j)] = m[(i, j)] * m[(k, l)].conj();
                }
            }
        }
    }
    let eig = rho_pt.symmetric_eigenvalues();
    2.0 * eig.iter().filter(|x| **x < 0.0).map(|x| -x).sum::<f64>()
}

fn nonzero_block(m: &DMatrix<C64>) -> DMatrix<C64> {
    let rows: Vec<usize> = (0..m.nrows()).filter(|i| m.row(*i).iter().any(|x| x.norm() > 1e-14)).collect();
    let cols: Vec<usize> = (0..m.ncols()).filter(|j| m.column(*j).iter().any(|x| x.norm() > 1e-14)).collect();
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

#[test]
fn hybrid_negativity_matches_partial_transpose() {
    let cfg = PipelineConfig::default();
    for (r, t, a1) in [(0.2, 0.4, 0.6), (0.5, 0.7, 0.8), (0.3, 0.2, std::f64::consts::FRAC_1_SQRT_2)] {
        let photon = DelocalizedPhoton::from_magnitude(a1).unwrap();
        let sim = HeraldSimulator::new(sq(r), bs(t), photon, &cfg).unwrap();
        for p in 0..4 {
            let rec = sim.record(p).unwrap();
            let ppt = ppt_negativity(&rec.state.coefficient_matrix());
            assert!((ppt - rec.negativity).abs() < 1e-10, "p={p}: {ppt} vs {}", rec.negativity);
        }
    }
}

#[test]
fn cascade_negativity_matches_partial_transpose() {
    let cfg = PipelineConfig { tail_eps: 1e-10, ..PipelineConfig::default() };
    let stage1 = Stage1Params { r_sq: sq(0.1), bs: bs(0.5), photon: DelocalizedPhoton::from_magnitude(0.6).unwrap() };
    let rec = stage1.herald(&cfg).unwrap();
    let sim = CascadeSimulator::new(&rec, sq(0.15), bs(0.4), &cfg).unwrap();
    for p in 0..3 {
        let (state, _) = sim.outcome(p).unwrap();
        let m = nonzero_block(&state.coefficient_matrix());
        let ppt = ppt_negativity(&m);
        let schmidt = schmidt_negativity(&state).unwrap().value;
        assert!((ppt - schmidt).abs() < 1e-9, "p={p}: {ppt} vs {schmidt}");
    }
}

#[test]
fn closed_negativity_of_balanced_qubit_pair() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(h, 0.0), C64::new(0.0, 0.0)]);
    assert!((ppt_negativity(&m) - 1.0).abs() < 1e-14);
    assert!((negativity_closed(C64::new(h, 0.0), C64::new(h, 0.0), 1.0) - 1.0).abs() < 1e-15);
}

/// The herald pipeline rebuilt on the exponentiation oracle instead of the
/// combinatorial beam splitter.
#[test]
fn herald_pipeline_matches_exponentiation_oracle() {
    let cfg = PipelineConfig::default();
    for (r, t, a1) in [(0.25, 0.35, 0.6), (0.4, 0.8, 0.75)] {
        let photon = DelocalizedPhoton::from_magnitude(a1).unwrap();
        let sim = HeraldSimulator::new(sq(r), bs(t), photon, &cfg).unwrap();
        let n = sim.cutoff();
        let oc = n + 1 + 8;
        let oracle = bs_matrix_oracle(bs(t), oc);
        let smsv = smsv_amplitudes(sq(r), n).padded(oc);
        let out_vac = oracle.apply(&TwoModeAmplitudes::product(&smsv, &FockAmplitudes::number(0, oc))).unwrap();
        let out_one = oracle.apply(&TwoModeAmplitudes::product(&smsv, &FockAmplitudes::number(1, oc))).unwrap();
        for p in 0..5 {
            // modes (1, 3) after registering p in mode 2
            let mut amps = vec![C64::default(); (oc + 1) * 2];
            for n1 in 0..=oc {
                amps[n1 * 2 + 1] = photon.a0() * out_vac.get(n1, p);
                amps[n1 * 2] = photon.a1() * out_one.get(n1, p);
            }
            let cond = TwoModeAmplitudes::new(oc, 1, amps).unwrap();
            let rec = sim.record(p).unwrap();
            assert!((cond.norm_sqr() - rec.probability).abs() < 1e-12, "p={p}");
            assert!(fidelity_two_mode(&cond, &rec.state.to_two_mode()).unwrap() > 1.0 - 1e-12);
        }
    }
}

/// Builds the full three-mode state and applies the exponentiation oracle to
/// modes 2-3 slice by slice.
#[test]
fn cascade_matches_three_mode_oracle() {
    let cfg = PipelineConfig::default();
    let stage1 = Stage1Params { r_sq: sq(0.2), bs: bs(0.45), photon: DelocalizedPhoton::from_magnitude(0.7).unwrap() };
    let rec = stage1.herald(&cfg).unwrap();
    let (r2, t2) = (sq(0.3), bs(0.6));
    let sim = CascadeSimulator::new(&rec, r2, t2, &cfg).unwrap();
    let n2 = sim.cutoff();
    let oc = n2 + 1 + 8;
    let oracle = bs_matrix_oracle(t2, oc);
    let smsv = smsv_amplitudes(r2, n2).padded(oc);
    let with_one = oracle.apply(&TwoModeAmplitudes::product(&smsv, &FockAmplitudes::number(1, oc))).unwrap();
    let with_zero = oracle.apply(&TwoModeAmplitudes::product(&smsv, &FockAmplitudes::number(0, oc))).unwrap();
    let h = &rec.state;
    for p in 0..5 {
        let d1 = h.psi.cutoff() + 1;
        let mut m = DMatrix::<C64>::zeros(d1, oc + 1);
        for n1 in 0..d1 {
            for k in 0..=oc {
                m[(n1, k)] = h.c_psi * h.psi.get(n1) * with_one.get(k, p) + h.c_phi * h.phi.get(n1) * with_zero.get(k, p);
            }
        }
        let prob: f64 = m.iter().map(|x| x.norm_sqr()).sum();
        let (state, probability) = sim.outcome(p).unwrap();
        assert!((prob - probability).abs() < 1e-12, "p={p}: {prob} vs {probability}");
        let v = state.coefficient_matrix();
        let mut overlap = C64::default();
        for i in 0..v.nrows().min(m.nrows()) {
            for j in 0..v.ncols().min(m.ncols()) {
                overlap += v[(i, j)].conj() * m[(i, j)];
            }
        }
        assert!(overlap.norm_sqr() / prob > 1.0 - 1e-12, "p={p}");
    }
}

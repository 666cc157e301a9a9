//! Entanglement of bipartite pure states.
//!
//! Two routes: the two-branch closed form in terms of `a0`, `a1` and the
//! branch weight `B`, and the general Schmidt route. For a pure state with
//! Schmidt coefficients `s_i` the trace norm of the partial transpose is
//! `(sum s_i)^2`, so the negativity (scaled so a two-qubit Bell state scores
//! 1) is `(sum s_i)^2 - 1`, which is `2 s0 s1` at Schmidt rank 2.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::TwoModeAmplitudes;
use crate::herald::HybridState;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NegativityResult {
    pub value: f64,
    /// Descending, squares summing to one.
    pub schmidt_coeffs: Vec<f64>,
}

impl NegativityResult {
    pub fn schmidt_rank(&self, floor: f64) -> usize {
        self.schmidt_coeffs.iter().filter(|s| **s > floor).count()
    }
}

/// Anything with a bipartite coefficient matrix `C[i][j]`, `|ψ> = Σ C_ij |i>|j>`.
pub trait Bipartite {
    fn coefficient_matrix(&self) -> DMatrix<C64>;
}

impl Bipartite for TwoModeAmplitudes {
    fn coefficient_matrix(&self) -> DMatrix<C64> {
        let [c1, c2] = self.cutoffs();
        DMatrix::from_fn(c1 + 1, c2 + 1, |i, j| self.get(i, j))
    }
}

/// CV mode × DV mode, an `(cutoff + 1) × 2` matrix.
impl Bipartite for HybridState {
    fn coefficient_matrix(&self) -> DMatrix<C64> {
        self.to_two_mode().coefficient_matrix()
    }
}

impl Bipartite for DMatrix<C64> {
    fn coefficient_matrix(&self) -> DMatrix<C64> {
        self.clone()
    }
}

/// Schmidt coefficients of a normalized bipartite state, descending.
pub fn schmidt_coefficients<B: Bipartite + ?Sized>(state: &B) -> Result<Vec<f64>> {
    let m = state.coefficient_matrix();
    let norm_sqr: f64 = m.iter().map(|c| c.norm_sqr()).sum();
    if (norm_sqr - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { norm_sqr });
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let scale = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(s.into_iter().map(|x| x / scale).collect())
}

/// Negativity from the Schmidt decomposition.
pub fn schmidt_negativity<B: Bipartite + ?Sized>(state: &B) -> Result<NegativityResult> {
    let schmidt_coeffs = schmidt_coefficients(state)?;
    let sum: f64 = schmidt_coeffs.iter().sum();
    Ok(NegativityResult { value: (sum * sum - 1.0).max(0.0), schmidt_coeffs })
}

/// `2|a0||a1||B| / (|a0|^2 + |a1|^2 |B|^2)`; an infinite `B` gives the limit 0.
pub fn negativity_closed(a0: C64, a1: C64, b: f64) -> f64 {
    if !b.is_finite() {
        return 0.0;
    }
    let (x, y) = (a0.norm(), a1.norm() * b.abs());
    let denom = x * x + y * y;
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * x * y / denom
}

/// `|a0| - |a1||B|`; zero exactly on the maximal-negativity locus.
pub fn max_negativity_residual(a0: C64, a1: C64, b: f64) -> f64 {
    a0.norm() - a1.norm() * b.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockAmplitudes;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn closed_form_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((negativity_closed(c(h), c(h), 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(negativity_closed(c(0.6), c(0.8), 0.0), 0.0);
        assert!((negativity_closed(c(0.6), c(0.8), 0.75) - 1.0).abs() < 1e-15);
        assert_eq!(negativity_closed(c(0.6), c(0.8), f64::INFINITY), 0.0);
    }

    #[test]
    fn residual_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(max_negativity_residual(c(h), c(h), 1.0).abs() < 1e-16);
        assert!(max_negativity_residual(c(0.6), c(0.8), 0.75).abs() < 1e-15);
        let r: Vec<f64> = [0.5, 0.7, 0.75, 0.8, 1.0].iter().map(|b| max_negativity_residual(c(0.6), c(0.8), *b)).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(r[0] > 0.0 && r[4] < 0.0);
    }

    #[test]
    fn product_and_bell_states() {
        let prod = TwoModeAmplitudes::product(&FockAmplitudes::number(0, 2), &FockAmplitudes::number(1, 2));
        assert!(schmidt_negativity(&prod).unwrap().value < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = TwoModeAmplitudes::new(1, 1, vec![c(0.0), c(h), c(h), c(0.0)]).unwrap();
        let n = schmidt_negativity(&bell).unwrap();
        assert!((n.value - 1.0).abs() < 1e-14);
        assert_eq!(n.schmidt_rank(1e-10), 2);
        let sum: f64 = n.schmidt_coeffs.iter().sum();
        assert!((n.value - (sum * sum - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized() {
        let s = TwoModeAmplitudes::new(1, 1, vec![c(0.5), c(0.0), c(0.0), c(0.5)]).unwrap();
        assert!(matches!(schmidt_negativity(&s), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn branch_relabeling_symmetry() {
        for (a0, b) in [(0.3, 0.2), (0.6, 1.7), (0.9, 4.0)] {
            let a1 = (1.0f64 - a0 * a0).sqrt();
            let lhs = negativity_closed(c(a0), c(a1), b);
            let rhs = negativity_closed(c(a1), c(a0), 1.0 / b);
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn higher_rank_reported_as_is() {
        let third = (1.0f64 / 3.0).sqrt();
        let mut s = TwoModeAmplitudes::zeros(2, 2);
        for i in 0..3 {
            s.set(i, i, c(third));
        }
        assert!((schmidt_negativity(&s).unwrap().value - 2.0).abs() < 1e-13);
    }
}

//! Log-space factorials and binomials.
//!
//! Factorials up to 170! are tabulated as `ln` of exact-ish products; beyond
//! that `lgamma` takes over. Raw factorials are only ever formed for n <= 20.

use std::sync::OnceLock;

const TABLE_LEN: usize = 171;

fn table() -> &'static [f64; TABLE_LEN] {
    static TABLE: OnceLock<[f64; TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = [0.0; TABLE_LEN];
        let mut exact: u64 = 1;
        let mut running = 1.0f64;
        for n in 1..TABLE_LEN {
            if n <= 20 {
                exact *= n as u64;
                running = exact as f64;
                out[n] = running.ln();
            } else {
                running *= n as f64;
                out[n] = running.ln();
            }
        }
        out
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        table()[n]
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `k * ln(x)` with the convention `0 * ln(0) = 0`, so `x^0 = 1` even for `x = 0`.
pub(crate) fn ln_pow(ln_x: f64, k: i64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_x
    }
}

/// `ln(sum(exp(v)))` over the finite entries; `-inf` for an empty or all-`-inf` input.
pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().filter(|v| *v > f64::NEG_INFINITY).collect();
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return f64::NEG_INFINITY;
    };
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

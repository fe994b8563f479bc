//! Deterministic reductions and small finite-difference helpers.
//!
//! Every summation that feeds a reported value goes through pairwise
//! summation over a fixed index order, so results do not depend on the
//! number of worker threads.

use num_complex::Complex64;

/// Below this length a straight left-to-right sum is used.
const PAIRWISE_LEAF: usize = 32;

/// Pairwise (cascade) summation of real values in slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise summation of complex values in slice order.
pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// Observed convergence order between two error samples when the step (or
/// resolution) halves: `log2(coarse / fine)`.
pub fn observed_order(err_coarse: f64, err_fine: f64) -> f64 {
    (err_coarse / err_fine).log2()
}

//! Order-fixed reductions over trajectory-indexed data.
//!
//! Every ensemble statistic in the crate is accumulated through these
//! helpers. The summation tree depends only on the slice length, so results
//! are bit-identical however the per-trajectory values were scheduled.

use num_complex::Complex64;
use std::ops::Add;

const LEAF: usize = 8;

/// Pairwise (cascade) summation with a fixed split at `len / 2`.
pub fn pairwise_sum<T>(values: &[T]) -> T
where
    T: Copy + Add<Output = T> + Default,
{
    if values.len() <= LEAF {
        return values.iter().fold(T::default(), |acc, &v| acc + v);
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

pub fn mean_c(values: &[Complex64]) -> Complex64 {
    if values.is_empty() {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    pairwise_sum(values) / values.len() as f64
}

/// Standard error of the mean (unbiased variance).
pub fn stderr(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&sq) / (n as f64 - 1.0) / n as f64).sqrt()
}

/// Estimate with a delete-one jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Delete-one jackknife for a statistic of several per-trajectory means.
///
/// `columns[c][i]` is the i-th trajectory's sample of quantity `c`; the
/// statistic receives the column means. Leave-one-out means are formed
/// from the pairwise totals, so the cost is linear in the sample count.
pub fn jackknife<F>(columns: &[&[Complex64]], statistic: F) -> Estimate
where
    F: Fn(&[Complex64]) -> f64,
{
    let n = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == n));
    let totals: Vec<Complex64> = columns.iter().map(|c| pairwise_sum(c)).collect();
    let full: Vec<Complex64> = totals.iter().map(|t| t / n as f64).collect();
    let value = statistic(&full);
    if n < 2 {
        return Estimate {
            value,
            stderr: f64::NAN,
        };
    }
    let mut scratch = vec![Complex64::default(); columns.len()];
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            for (c, col) in columns.iter().enumerate() {
                scratch[c] = (totals[c] - col[i]) / (n - 1) as f64;
            }
            statistic(&scratch)
        })
        .collect();
    let loo_mean = mean(&loo);
    let sq: Vec<f64> = loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).collect();
    let var = pairwise_sum(&sq) * (n as f64 - 1.0) / n as f64;
    Estimate {
        value,
        stderr: var.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_for_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }

    #[test]
    fn jackknife_of_mean_equals_standard_error() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let cs: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let est = jackknife(&[&cs], |m| m[0].re);
        assert!((est.value - mean(&xs)).abs() < 1e-12);
        assert!((est.stderr - stderr(&xs)).abs() < 1e-12 * stderr(&xs).max(1.0));
    }
}

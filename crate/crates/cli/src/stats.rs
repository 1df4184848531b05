//! Summary statistics over per-run objective values.
//!
//! Quartiles follow the median-of-halves rule: sort the values, split them
//! into a lower and an upper half (the middle element of an odd-length
//! sample belongs to neither half), and take the median of each half. A
//! single value is its own first and third quartile.

use serde::{Deserialize, Serialize};
use sofcma::io::float_sentinel;

/// Median of an already sorted slice. Empty slices yield `inf`.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::INFINITY;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// `(q1, median, q3)` of an already sorted slice.
pub fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let n = sorted.len();
    if n <= 1 {
        let m = median(sorted);
        return (m, m, m);
    }
    let half = n / 2;
    (
        median(&sorted[..half]),
        median(sorted),
        median(&sorted[n - half..]),
    )
}

/// Sample standard deviation (divisor `n - 1`); zero for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::INFINITY;
    }
    if n == 1 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Statistics of the feasible runs of one problem. With no feasible run
/// every statistic is `inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub runs: usize,
    pub successes: usize,
    #[serde(with = "float_sentinel")]
    pub best: f64,
    #[serde(with = "float_sentinel")]
    pub q1: f64,
    #[serde(with = "float_sentinel")]
    pub median: f64,
    #[serde(with = "float_sentinel")]
    pub q3: f64,
    #[serde(with = "float_sentinel")]
    pub worst: f64,
    #[serde(with = "float_sentinel")]
    pub mean: f64,
    #[serde(with = "float_sentinel")]
    pub std: f64,
}

impl Summary {
    /// `objectives` holds the objective of every feasible run.
    pub fn from_objectives(problem: &str, runs: usize, objectives: &[f64]) -> Self {
        let mut sorted = objectives.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (q1, median, q3) = quartiles(&sorted);
        let n = sorted.len();
        let (best, worst, mean) = if n == 0 {
            (f64::INFINITY, f64::INFINITY, f64::INFINITY)
        } else {
            (
                sorted[0],
                sorted[n - 1],
                sorted.iter().sum::<f64>() / n as f64,
            )
        };
        Self {
            problem: problem.to_string(),
            runs,
            successes: n,
            best,
            q1,
            median,
            q3,
            worst,
            mean,
            std: sample_std(&sorted),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_halves() {
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0]), (1.5, 2.5, 3.5));
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), (1.5, 3.0, 4.5));
        assert_eq!(quartiles(&[7.0]), (7.0, 7.0, 7.0));
        assert_eq!(quartiles(&[1.0, 3.0]), (1.0, 2.0, 3.0));
    }

    #[test]
    fn single_run_is_degenerate() {
        let s = Summary::from_objectives("p", 1, &[0.25]);
        assert_eq!((s.best, s.median, s.worst, s.std), (0.25, 0.25, 0.25, 0.0));
    }

    #[test]
    fn no_success_uses_sentinel() {
        let s = Summary::from_objectives("p", 3, &[]);
        assert_eq!(s.successes, 0);
        assert!(s.best.is_infinite() && s.median.is_infinite() && s.std.is_infinite());
    }

    #[test]
    fn std_matches_hand_value() {
        assert!(
            (sample_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - (32.0f64 / 7.0).sqrt()).abs()
                < 1e-15
        );
    }
}

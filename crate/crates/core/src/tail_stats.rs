//! Order statistics and Hill estimation of a Pareto upper tail.
//!
//! The Hill estimator uses the top `k` order statistics of a sample,
//! with `X_(1)` the largest observation:
//!
//! ```text
//! 1/alpha = (1/k) * sum_{n=1..k} log(X_(n) / X_(k))
//! ```
//!
//! and the usual standard error `alpha / sqrt(k)`.

use thiserror::Error;

/// Default share of the sample treated as the tail.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.05;

/// Default minimum number of positive observations for a batch cell.
pub const DEFAULT_MIN_OBS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error("no positive observations in sample")]
    EmptySample,
    #[error("tail count {k} from n = {n} is below 2")]
    TooFewTailObs { n: usize, k: usize },
    #[error("tail count {k} outside [2, {n}]")]
    InvalidTailCount { n: usize, k: usize },
    #[error("top {k} observations all equal the threshold; exponent is unbounded")]
    DegenerateTail { k: usize },
    #[error("tail fraction {0} must lie in (0, 1)")]
    InvalidFraction(f64),
}

/// A cleaned sample of strictly positive values sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSample {
    values: Vec<f64>,
    n_raw: usize,
}

impl TailSample {
    /// Drops missing (`None`), NaN and non-positive entries, then sorts the
    /// rest in descending order. The sort is stable, so tied values keep their
    /// input order.
    pub fn clean<I>(raw: I) -> Result<Self, TailError>
    where
        I: IntoIterator<Item = Option<f64>>,
    {
        let mut n_raw = 0;
        let mut values: Vec<f64> = raw
            .into_iter()
            .inspect(|_| n_raw += 1)
            .flatten()
            .filter(|x| *x > 0.0)
            .collect();
        if values.is_empty() {
            return Err(TailError::EmptySample);
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values, n_raw })
    }

    /// Convenience wrapper for data without missing markers.
    pub fn from_values(raw: &[f64]) -> Result<Self, TailError> {
        Self::clean(raw.iter().map(|&x| Some(x)))
    }

    /// Values, largest first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_raw(&self) -> usize {
        self.n_raw
    }

    /// Number of positive observations retained.
    pub fn n_pos(&self) -> usize {
        self.values.len()
    }

    /// The `n`-th largest observation, 1-based.
    pub fn order_stat(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// Multiplies every value by `c > 0`. Order is preserved.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0, "scale factor must be positive");
        Self {
            values: self.values.iter().map(|x| x * c).collect(),
            n_raw: self.n_raw,
        }
    }
}

/// Hill estimate of the tail exponent at tail count `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillEstimate {
    pub alpha: f64,
    pub se: f64,
    pub k: usize,
    /// The threshold order statistic `X_(k)`.
    pub threshold: f64,
    pub inverse_gamma: f64,
}

/// `floor(fraction * n)`, rejecting counts below 2.
pub fn tail_count(n: usize, fraction: f64) -> Result<usize, TailError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TailError::InvalidFraction(fraction));
    }
    // The nudge keeps exact products such as 0.05 * 1000 from flooring down.
    let k = (fraction * n as f64 + 1e-9).floor() as usize;
    if k < 2 {
        return Err(TailError::TooFewTailObs { n, k });
    }
    Ok(k)
}

/// Inverse Hill estimate `(1/m) * sum_{n<=m} log(X_(n)/X_(m))` from the
/// cumulative log sum of the top `m` values. Shared with the inverse Hill path.
pub(crate) fn inverse_hill_from_logs(log_sum_top: f64, log_threshold: f64, m: usize) -> f64 {
    let g = log_sum_top / m as f64 - log_threshold;
    // Rounding can leave a tiny negative value when all top values tie.
    g.max(0.0)
}

pub fn hill(sample: &TailSample, k: usize) -> Result<HillEstimate, TailError> {
    let n = sample.n_pos();
    if k < 2 || k > n {
        return Err(TailError::InvalidTailCount { n, k });
    }
    let threshold = sample.order_stat(k);
    if sample.values[0] == threshold {
        return Err(TailError::DegenerateTail { k });
    }
    // Same accumulation order as the inverse Hill path, so the two agree bit for bit.
    let log_sum = sample.values[..k].iter().fold(0.0, |acc, x| acc + x.ln());
    let inverse_gamma = inverse_hill_from_logs(log_sum, threshold.ln(), k);
    if inverse_gamma <= 0.0 {
        return Err(TailError::DegenerateTail { k });
    }
    let alpha = 1.0 / inverse_gamma;
    Ok(HillEstimate {
        alpha,
        se: alpha / (k as f64).sqrt(),
        k,
        threshold,
        inverse_gamma,
    })
}

/// Hill estimate with `k = floor(fraction * n_pos)`.
pub fn hill_with_fraction(sample: &TailSample, fraction: f64) -> Result<HillEstimate, TailError> {
    let k = tail_count(sample.n_pos(), fraction)?;
    hill(sample, k)
}

/// `(log X_(i), log i)` for every rank `i`, for log-rank/log-size plots.
pub fn log_rank_points(sample: &TailSample) -> Vec<(f64, f64)> {
    sample
        .values
        .iter()
        .enumerate()
        .map(|(i, x)| (x.ln(), ((i + 1) as f64).ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clean_drops_missing_and_nonpositive() {
        let s = TailSample::clean([Some(3.0), Some(-1.0), None, Some(7.0), Some(0.0)]).unwrap();
        assert_eq!(s.values(), &[7.0, 3.0]);
        assert_eq!(s.n_raw(), 5);
        assert_eq!(s.n_pos(), 2);
    }

    #[test]
    fn clean_keeps_ties() {
        let s = TailSample::from_values(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.n_pos(), 3);
    }

    #[test]
    fn clean_rejects_all_nonpositive() {
        assert_eq!(
            TailSample::from_values(&[0.0, -2.0, -0.5]),
            Err(TailError::EmptySample)
        );
        assert_eq!(
            TailSample::clean([None, Some(f64::NAN)]),
            Err(TailError::EmptySample)
        );
    }

    #[test]
    fn tail_count_floors() {
        assert_eq!(tail_count(1000, 0.05), Ok(50));
        assert_eq!(tail_count(59, 0.05), Ok(2));
        assert_eq!(
            tail_count(19, 0.05),
            Err(TailError::TooFewTailObs { n: 19, k: 0 })
        );
        assert!(matches!(
            tail_count(100, 1.5),
            Err(TailError::InvalidFraction(_))
        ));
    }

    #[test]
    fn hill_hand_example() {
        let s = TailSample::from_values(&[8.0, 4.0, 2.0, 1.0]).unwrap();
        let h = hill(&s, 3).unwrap();
        assert_relative_eq!(h.inverse_gamma, 2f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(h.alpha, std::f64::consts::LOG2_E, max_relative = 1e-12);
        assert_relative_eq!(h.se, 0.8329403702157812, max_relative = 1e-12);
        assert_eq!(h.threshold, 2.0);
        assert_eq!(h.k, 3);
    }

    #[test]
    fn hill_scale_invariant() {
        let s = TailSample::from_values(&[8.0, 4.0, 2.0, 1.0]).unwrap();
        let a = hill(&s, 3).unwrap();
        let b = hill(&s.scaled(37.5), 3).unwrap();
        assert_relative_eq!(a.alpha, b.alpha, max_relative = 1e-14);
    }

    #[test]
    fn hill_degenerate_tail() {
        let s = TailSample::from_values(&[5.0, 5.0, 5.0, 1.0]).unwrap();
        assert_eq!(hill(&s, 3), Err(TailError::DegenerateTail { k: 3 }));
    }

    #[test]
    fn hill_rejects_bad_k() {
        let s = TailSample::from_values(&[8.0, 4.0, 2.0, 1.0]).unwrap();
        assert!(matches!(hill(&s, 1), Err(TailError::InvalidTailCount { .. })));
        assert!(matches!(hill(&s, 5), Err(TailError::InvalidTailCount { .. })));
    }

    #[test]
    fn log_rank_definition() {
        let e = std::f64::consts::E;
        let s = TailSample::from_values(&[1.0, e * e, e]).unwrap();
        let pts = log_rank_points(&s);
        let expect = [(2.0, 0.0), (1.0, 2f64.ln()), (0.0, 3f64.ln())];
        for (p, q) in pts.iter().zip(expect) {
            assert_relative_eq!(p.0, q.0, epsilon = 1e-15);
            assert_relative_eq!(p.1, q.1, epsilon = 1e-15);
        }
        let single = TailSample::from_values(&[1.0]).unwrap();
        assert_eq!(log_rank_points(&single), vec![(0.0, 0.0)]);
    }
}

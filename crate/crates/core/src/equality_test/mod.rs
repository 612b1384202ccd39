//! Self-normalized test of equal tail exponents for two samples drawn from the
//! same households.
//!
//! Each sample contributes an inverse Hill path `gamma(t)`, the inverse Hill
//! estimate computed from the top `floor(k t)` observations. With the
//! difference `d(t) = gamma_lab(t) - gamma_cap(t)`, the statistic is
//!
//! ```text
//! T = d(1)^2 / integral_{t0}^{1} t^2 (d(t) - d(1))^2 dt
//! ```
//!
//! Under equal exponents `T` converges to `W(1)^2 / integral_{t0}^1 (W(t) - t W(1))^2 dt`
//! for a standard Brownian motion `W`. The tail covariance between the two
//! samples cancels, so paired data need no dependence model.

mod critical;

pub use critical::{
    simulate_critical_value, simulate_functional_draws, CriticalValueEntry, CriticalValueTable,
    Provenance, PUBLISHED_CRITICAL_VALUE,
};

use thiserror::Error;

use crate::tail_stats::{inverse_hill_from_logs, tail_count, TailError, TailSample};

/// Default lower limit of the integral in the test statistic.
pub const DEFAULT_T0: f64 = 0.2;
/// Default significance level.
pub const DEFAULT_LEVEL: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestError {
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error("floor(k * t0) = {m0} < 2 for k = {k}, t0 = {t0}")]
    TailTooShort { k: usize, t0: f64, m0: usize },
    #[error("t0 = {0} must lie in (0, 1)")]
    InvalidT0(f64),
    #[error("level = {0} must lie in (0, 1)")]
    InvalidLevel(f64),
    #[error("paths built with different k or t0")]
    PathMismatch,
    #[error("no critical value for t0 = {t0}, level = {level}")]
    MissingCriticalValue { t0: f64, level: f64 },
    #[error("critical value table line {line}: {msg}")]
    TableParse { line: usize, msg: String },
    #[error("critical value table io: {0}")]
    Io(String),
}

/// Inverse Hill estimates at the breakpoints `t = m/k`, `m = floor(k t0)..=k`.
///
/// The path is a step function: on `[m/k, (m+1)/k)` it equals the value at
/// `m/k`, and on `[t0, (m0+1)/k)` it equals the value at the first breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseHillPath {
    k: usize,
    t0: f64,
    first_m: usize,
    gamma: Vec<f64>,
}

impl InverseHillPath {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Smallest tail count on the path, `floor(k t0)`.
    pub fn first_m(&self) -> usize {
        self.first_m
    }

    /// Breakpoints `m/k`, increasing, ending at 1.
    pub fn t_grid(&self) -> Vec<f64> {
        (self.first_m..=self.k)
            .map(|m| m as f64 / self.k as f64)
            .collect()
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma
    }

    /// Inverse Hill estimate using the top `m` observations.
    pub fn gamma_m(&self, m: usize) -> f64 {
        self.gamma[m - self.first_m]
    }

    /// `gamma(1)`, the inverse Hill estimate at `k`.
    pub fn at_one(&self) -> f64 {
        *self.gamma.last().expect("path is never empty")
    }

    /// Evaluates the step function at `t` in `[t0, 1]`.
    pub fn gamma_at(&self, t: f64) -> f64 {
        let m = floor_count(self.k, t).clamp(self.first_m, self.k);
        self.gamma_m(m)
    }
}

/// `floor(k t)` with a small nudge so that `t = m/k` recovers `m` exactly.
fn floor_count(k: usize, t: f64) -> usize {
    (k as f64 * t + 1e-9).floor() as usize
}

fn check_t0(t0: f64) -> Result<(), TestError> {
    if t0 > 0.0 && t0 < 1.0 {
        Ok(())
    } else {
        Err(TestError::InvalidT0(t0))
    }
}

pub fn inverse_hill_path(
    sample: &TailSample,
    k: usize,
    t0: f64,
) -> Result<InverseHillPath, TestError> {
    check_t0(t0)?;
    let n = sample.n_pos();
    if k > n {
        return Err(TailError::InvalidTailCount { n, k }.into());
    }
    let m0 = floor_count(k, t0);
    if m0 < 2 {
        return Err(TestError::TailTooShort { k, t0, m0 });
    }
    let values = sample.values();
    let top = values[0];
    let mut gamma = Vec::with_capacity(k - m0 + 1);
    let mut log_sum = 0.0;
    for (i, &x) in values[..k].iter().enumerate() {
        log_sum += x.ln();
        let m = i + 1;
        if m >= m0 {
            let g = if x == top {
                0.0
            } else {
                inverse_hill_from_logs(log_sum, x.ln(), m)
            };
            gamma.push(g);
        }
    }
    Ok(InverseHillPath {
        k,
        t0,
        first_m: m0,
        gamma,
    })
}

/// Why a statistic could not be formed as a finite ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// Numerator and integral both vanish; reported as `T = 0`.
    ZeroOverZero,
    /// The integral vanishes but the numerator does not; reported as `T = inf`.
    ZeroDenominator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogaStatistic {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub degeneracy: Option<Degeneracy>,
}

/// Exact value of `integral_{t0}^{1} t^2 (d(t) - d(1))^2 dt` for the step
/// functions of two paths. Each constant piece on `[lo, hi)` contributes
/// `c^2 (hi^3 - lo^3) / 3`.
fn step_integral(lab: &InverseHillPath, cap: &InverseHillPath) -> f64 {
    let k = lab.k as f64;
    let d_one = lab.at_one() - cap.at_one();
    let mut total = 0.0;
    for m in lab.first_m..lab.k {
        let lo = if m == lab.first_m {
            lab.t0
        } else {
            m as f64 / k
        };
        let hi = (m + 1) as f64 / k;
        let c = (lab.gamma_m(m) - cap.gamma_m(m)) - d_one;
        total += c * c * (hi.powi(3) - lo.powi(3)) / 3.0;
    }
    total
}

pub fn hoga_statistic(
    lab: &InverseHillPath,
    cap: &InverseHillPath,
    t0: f64,
) -> Result<HogaStatistic, TestError> {
    if lab.k != cap.k || lab.t0 != t0 || cap.t0 != t0 {
        return Err(TestError::PathMismatch);
    }
    let d_one = lab.at_one() - cap.at_one();
    let numerator = d_one * d_one;
    let denominator = step_integral(lab, cap);
    let (value, degeneracy) = if denominator > 0.0 {
        (numerator / denominator, None)
    } else if numerator == 0.0 {
        (0.0, Some(Degeneracy::ZeroOverZero))
    } else {
        (f64::INFINITY, Some(Degeneracy::ZeroDenominator))
    };
    Ok(HogaStatistic {
        value,
        numerator,
        denominator,
        degeneracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub t0: f64,
    pub level: f64,
    pub tail_fraction: f64,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            t0: DEFAULT_T0,
            level: DEFAULT_LEVEL,
            tail_fraction: crate::tail_stats::DEFAULT_TAIL_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualityTestResult {
    pub statistic: f64,
    pub degeneracy: Option<Degeneracy>,
    pub t0: f64,
    pub level: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub k_used: usize,
    pub alpha_lab: f64,
    pub alpha_cap: f64,
}

/// Tests equal exponents with the shared tail count `k = floor(fraction * n_cap)`.
///
/// The labor sample is usually the larger one, so its exponent is estimated
/// further into the tail.
pub fn test_equality(
    lab: &TailSample,
    cap: &TailSample,
    opts: &TestOptions,
    table: &CriticalValueTable,
) -> Result<EqualityTestResult, TestError> {
    check_t0(opts.t0)?;
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(TestError::InvalidLevel(opts.level));
    }
    let critical_value =
        table
            .get(opts.t0, opts.level)
            .ok_or(TestError::MissingCriticalValue {
                t0: opts.t0,
                level: opts.level,
            })?;
    let k = tail_count(cap.n_pos(), opts.tail_fraction)?;
    let path_lab = inverse_hill_path(lab, k, opts.t0)?;
    let path_cap = inverse_hill_path(cap, k, opts.t0)?;
    let stat = hoga_statistic(&path_lab, &path_cap, opts.t0)?;
    Ok(EqualityTestResult {
        statistic: stat.value,
        degeneracy: stat.degeneracy,
        t0: opts.t0,
        level: opts.level,
        critical_value,
        reject: stat.value > critical_value,
        k_used: k,
        alpha_lab: 1.0 / path_lab.at_one(),
        alpha_cap: 1.0 / path_cap.at_one(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail_stats::hill;
    use approx::assert_relative_eq;

    fn hand_sample() -> TailSample {
        TailSample::from_values(&[8.0, 4.0, 2.0, 1.0]).unwrap()
    }

    #[test]
    fn path_hand_example() {
        // floor(3 * 0.5) = 1 is too short; t0 = 2/3 starts the path at m = 2.
        assert!(matches!(
            inverse_hill_path(&hand_sample(), 3, 0.5),
            Err(TestError::TailTooShort { m0: 1, .. })
        ));
        let p = inverse_hill_path(&hand_sample(), 3, 2.0 / 3.0).unwrap();
        assert_eq!(p.first_m(), 2);
        assert_eq!(p.t_grid(), vec![2.0 / 3.0, 1.0]);
        assert_relative_eq!(p.gamma_m(2), 2f64.ln() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(p.gamma_m(3), 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn path_endpoint_is_hill() {
        let s = TailSample::from_values(&[9.1, 7.3, 5.0, 4.4, 3.9, 2.2, 1.7, 1.1, 1.0]).unwrap();
        for k in 4..=9 {
            let p = inverse_hill_path(&s, k, 0.5).unwrap();
            assert_eq!(p.at_one(), hill(&s, k).unwrap().inverse_gamma);
        }
    }

    #[test]
    fn path_rejects_oversized_k() {
        assert!(matches!(
            inverse_hill_path(&hand_sample(), 5, 0.5),
            Err(TestError::Tail(TailError::InvalidTailCount { .. }))
        ));
        assert!(matches!(
            inverse_hill_path(&hand_sample(), 3, 1.0),
            Err(TestError::InvalidT0(_))
        ));
    }

    #[test]
    fn gamma_at_follows_floor() {
        let s = TailSample::from_values(&(1..=20).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let p = inverse_hill_path(&s, 10, 0.25).unwrap();
        assert_eq!(p.first_m(), 2);
        assert_eq!(p.gamma_at(0.25), p.gamma_m(2));
        assert_eq!(p.gamma_at(0.3), p.gamma_m(3));
        assert_eq!(p.gamma_at(0.39), p.gamma_m(3));
        assert_eq!(p.gamma_at(1.0), p.at_one());
    }

    #[test]
    fn identical_paths_are_degenerate() {
        let p = inverse_hill_path(&hand_sample(), 3, 2.0 / 3.0).unwrap();
        let s = hoga_statistic(&p, &p, 2.0 / 3.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.degeneracy, Some(Degeneracy::ZeroOverZero));
    }

    #[test]
    fn shifted_paths_have_infinite_statistic() {
        // Two-point paths over [t0, 1): a single step piece, so a shift of the
        // whole path leaves the integrand zero.
        let a = InverseHillPath {
            k: 4,
            t0: 0.75,
            first_m: 3,
            gamma: vec![0.5, 0.75],
        };
        let b = InverseHillPath {
            gamma: vec![0.25, 0.5],
            ..a.clone()
        };
        let s = hoga_statistic(&a, &b, 0.75).unwrap();
        assert_eq!(s.value, f64::INFINITY);
        assert_eq!(s.degeneracy, Some(Degeneracy::ZeroDenominator));
    }

    #[test]
    fn mismatched_paths_rejected() {
        let s = TailSample::from_values(&(1..=20).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let a = inverse_hill_path(&s, 10, 0.3).unwrap();
        let b = inverse_hill_path(&s, 12, 0.3).unwrap();
        assert_eq!(hoga_statistic(&a, &b, 0.3), Err(TestError::PathMismatch));
    }

    #[test]
    fn step_integral_by_hand() {
        // k = 4, t0 = 0.5: pieces [0.5, 0.75) with m = 2 and [0.75, 1) with m = 3.
        let lab = InverseHillPath {
            k: 4,
            t0: 0.5,
            first_m: 2,
            gamma: vec![1.0, 2.0, 4.0],
        };
        let cap = InverseHillPath {
            gamma: vec![0.0, 0.0, 0.0],
            ..lab.clone()
        };
        let s = hoga_statistic(&lab, &cap, 0.5).unwrap();
        let expect = 9.0 * (0.75f64.powi(3) - 0.125) / 3.0 + 4.0 * (1.0 - 0.75f64.powi(3)) / 3.0;
        assert_relative_eq!(s.denominator, expect, max_relative = 1e-14);
        assert_relative_eq!(s.numerator, 16.0);
    }

    #[test]
    fn same_data_does_not_reject() {
        let s = TailSample::from_values(&(1..=2000).map(|i| 1.0 / i as f64).collect::<Vec<_>>())
            .unwrap();
        let r = test_equality(&s, &s, &TestOptions::default(), &CriticalValueTable::new()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
        assert_eq!(r.k_used, 100);
    }

    #[test]
    fn small_capital_sample_rejected() {
        let s = TailSample::from_values(&(1..=30).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let big =
            TailSample::from_values(&(1..=3000).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            test_equality(&big, &s, &TestOptions::default(), &CriticalValueTable::new()),
            Err(TestError::Tail(TailError::TooFewTailObs { n: 30, k: 1 }))
        ));
    }

    #[test]
    fn missing_critical_value() {
        let s = TailSample::from_values(&(1..=3000).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let opts = TestOptions {
            level: 0.1,
            ..TestOptions::default()
        };
        assert!(matches!(
            test_equality(&s, &s, &opts, &CriticalValueTable::new()),
            Err(TestError::MissingCriticalValue { .. })
        ));
    }
}

//! Theoretical Pareto exponents of income and wealth in the income
//! fluctuation model.
//!
//! - Income exponent `alpha_Y`: the positive root of `v E[G^z] = 1`.
//! - Normalized wealth exponent `alpha_tilde`: the positive root of
//!   `v E[H^z] = 1` with `H = rho R / G` and
//!   `rho = min{(E[beta R^(1-gamma)])^(1/gamma), 1}`.
//! - Wealth and capital income exponent: `min{alpha_tilde, alpha_Y}`.
//!
//! Both moment functions are log-convex in `z` and start below one at `z = 0`,
//! so a scan for the first sign change followed by bisection finds the unique
//! positive root.

use std::fmt;

use thiserror::Error;

use crate::roots::{bisect, scan_positive_crossing};
use crate::shocks::{ModelError, ShockModel, ShockProcess};

/// Roots are accepted once `|v E[X^z] - 1|` falls below this.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("v E[X^z] < 1 on the whole search range; no positive root")]
    NoRoot,
    #[error("moment E[X^z] is infinite")]
    Unbounded,
    #[error("-eta + r (1 - gamma) = {0} is not negative")]
    AssumptionViolated(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A Pareto exponent, or the reason the tail has none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailExponent {
    Finite(f64),
    /// Tail thinner than any power law.
    Infinite,
    /// Distribution with bounded support.
    Bounded,
}

impl TailExponent {
    /// Numeric value, `+inf` unless finite.
    pub fn value(self) -> f64 {
        match self {
            TailExponent::Finite(a) => a,
            _ => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            TailExponent::Finite(a) => Some(a),
            _ => None,
        }
    }

    pub fn min(self, other: TailExponent) -> TailExponent {
        match (self, other) {
            (TailExponent::Finite(a), TailExponent::Finite(b)) => TailExponent::Finite(a.min(b)),
            (TailExponent::Finite(_), _) => self,
            (_, TailExponent::Finite(_)) => other,
            (TailExponent::Bounded, TailExponent::Bounded) => TailExponent::Bounded,
            _ => TailExponent::Infinite,
        }
    }
}

impl fmt::Display for TailExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailExponent::Finite(a) => write!(f, "{}", crate::format::sig6(*a)),
            TailExponent::Infinite => f.write_str("inf"),
            TailExponent::Bounded => f.write_str("bounded"),
        }
    }
}

/// Moments behind the sufficient condition for a unique solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Existence {
    /// `beta E[G^(1-gamma)]`.
    pub discounted_growth: f64,
    /// `beta E[R G^(-gamma)]`.
    pub discounted_return: f64,
    pub holds: bool,
}

pub fn check_existence<M: ShockProcess + ?Sized>(model: &M) -> Existence {
    let beta = model.beta();
    let gamma = model.gamma();
    let discounted_growth = beta * model.mixed_moment(0.0, 1.0 - gamma);
    let discounted_return = beta * model.mixed_moment(1.0, -gamma);
    Existence {
        discounted_growth,
        discounted_return,
        holds: discounted_growth < 1.0 && discounted_return < 1.0,
    }
}

/// Positive root of `log v + log_moment(z) = 0`.
fn solve_moment_root<F: Fn(f64) -> f64>(log_v: f64, log_moment: F) -> Result<f64, TheoryError> {
    let f = |z: f64| log_v + log_moment(z);
    let (lo, hi) = match scan_positive_crossing(|z| {
        let fz = f(z);
        if fz.is_nan() {
            f64::INFINITY
        } else {
            fz
        }
    }) {
        Some(b) => b,
        None => return Err(TheoryError::NoRoot),
    };
    if f(hi) == f64::INFINITY {
        return Err(TheoryError::Unbounded);
    }
    let root = bisect(f, lo, hi, |_, fz| fz.exp_m1().abs() < 0.01 * ROOT_RESIDUAL_TOL);
    Ok(root)
}

/// Income exponent: positive root of `v E[G^z] = 1`.
pub fn solve_income_exponent<M: ShockProcess + ?Sized>(model: &M) -> Result<f64, TheoryError> {
    if !model.income_can_grow() {
        return Err(TheoryError::NoRoot);
    }
    solve_moment_root(model.survival().ln(), |z| model.log_mixed_moment(0.0, z))
}

/// `E[beta R^(1-gamma)]`.
pub fn return_discount_moment<M: ShockProcess + ?Sized>(model: &M) -> f64 {
    model.beta() * model.mixed_moment(1.0 - model.gamma(), 0.0)
}

/// `rho = min{(E[beta R^(1-gamma)])^(1/gamma), 1}`.
pub fn asymptotic_slope_factor<M: ShockProcess + ?Sized>(model: &M) -> f64 {
    return_discount_moment(model).powf(1.0 / model.gamma()).min(1.0)
}

/// Limit of `c(a)/a` as wealth grows: `1 - (E[beta R^(1-gamma)])^(1/gamma)`
/// when the moment is below one, otherwise 0.
pub fn asymptotic_mpc<M: ShockProcess + ?Sized>(model: &M) -> f64 {
    let m = return_discount_moment(model);
    if m < 1.0 {
        1.0 - m.powf(1.0 / model.gamma())
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentReport {
    pub alpha_income: TailExponent,
    pub alpha_tilde: TailExponent,
    /// `min{alpha_tilde, alpha_income}`: the wealth and capital income exponent.
    pub alpha_wealth: TailExponent,
    pub rho: f64,
    pub mpc: f64,
    /// `v E[G^alpha_Y] - 1` at the income root.
    pub income_residual: Option<f64>,
    /// `v E[H^alpha_tilde] - 1` at the wealth root.
    pub tilde_residual: Option<f64>,
}

/// `v E[H^z] - 1` with `H = rho R / G`.
pub fn wealth_moment_residual<M: ShockProcess + ?Sized>(model: &M, rho: f64, z: f64) -> f64 {
    (model.survival().ln() + z * rho.ln() + model.log_mixed_moment(z, -z)).exp_m1()
}

pub fn income_moment_residual<M: ShockProcess + ?Sized>(model: &M, z: f64) -> f64 {
    (model.survival().ln() + model.log_mixed_moment(0.0, z)).exp_m1()
}

pub fn solve_wealth_exponent<M: ShockProcess + ?Sized>(
    model: &M,
) -> Result<ExponentReport, TheoryError> {
    let rho = asymptotic_slope_factor(model);
    let mpc = asymptotic_mpc(model);
    let (alpha_income, income_residual) = match solve_income_exponent(model) {
        Ok(z) => (
            TailExponent::Finite(z),
            Some(income_moment_residual(model, z)),
        ),
        Err(TheoryError::NoRoot) => (TailExponent::Infinite, None),
        Err(e) => return Err(e),
    };
    let (alpha_tilde, tilde_residual) = if model.scaled_relative_return_can_exceed_one(rho) {
        let log_v = model.survival().ln();
        match solve_moment_root(log_v, |z| z * rho.ln() + model.log_mixed_moment(z, -z)) {
            Ok(z) => (
                TailExponent::Finite(z),
                Some(wealth_moment_residual(model, rho, z)),
            ),
            Err(TheoryError::NoRoot) => (TailExponent::Bounded, None),
            Err(e) => return Err(e),
        }
    } else {
        (TailExponent::Bounded, None)
    };
    Ok(ExponentReport {
        alpha_income,
        alpha_tilde,
        alpha_wealth: alpha_tilde.min(alpha_income),
        rho,
        mpc,
        income_residual,
        tilde_residual,
    })
}

fn check_unit_interval(name: &str, x: f64) -> Result<(), TheoryError> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(TheoryError::InvalidParameter(format!(
            "{name} = {x} outside (0, 1]"
        )))
    }
}

/// Closed-form income exponent of the promotion model:
/// `alpha_Y = (1/g) log((1 - v + v p) / (v p))`.
pub fn promotion_exponent_closed_form(v: f64, p: f64, g: f64) -> Result<f64, TheoryError> {
    check_unit_interval("v", v)?;
    check_unit_interval("p", p)?;
    if !(g > 0.0) {
        return Err(TheoryError::InvalidParameter(format!("g = {g} must be positive")));
    }
    Ok(((1.0 - v + v * p) / (v * p)).ln() / g)
}

/// Promotion growth `g` that yields income exponent `alpha`.
pub fn promotion_growth_for_exponent(v: f64, p: f64, alpha: f64) -> f64 {
    ((1.0 - v + v * p) / (v * p)).ln() / alpha
}

/// Two-point growth model with constant return, matching the promotion closed form.
pub fn promotion_model(
    v: f64,
    p: f64,
    g: f64,
    ret: f64,
    beta: f64,
    gamma: f64,
    period: f64,
) -> Result<ShockModel, TheoryError> {
    use crate::shocks::ShockState;
    Ok(ShockModel::new(
        vec![
            ShockState {
                ret,
                growth: 1.0,
                prob: 1.0 - p,
            },
            ShockState {
                ret,
                growth: g.exp(),
                prob: p,
            },
        ],
        v,
        beta,
        gamma,
        period,
    )?)
}

/// Exponents `(alpha_cap, alpha_lab)` of the deterministic growth and
/// risk-free return example with death rate `eta`, return `r` and growth `g`
/// (annual rates).
///
/// ```text
/// alpha_cap = alpha_lab = eta/g                      if r <= eta + 2 g gamma
/// alpha_cap = eta gamma / (r - eta - g gamma) < eta/g  otherwise
/// ```
pub fn example1_exponents(
    gamma: f64,
    eta: f64,
    r: f64,
    g: f64,
) -> Result<(TailExponent, TailExponent), TheoryError> {
    let slack = -eta + r * (1.0 - gamma);
    if slack >= 0.0 {
        return Err(TheoryError::AssumptionViolated(slack));
    }
    if !(g >= 0.0 && eta > 0.0 && gamma > 0.0) {
        return Err(TheoryError::InvalidParameter(
            "need g >= 0, eta > 0, gamma > 0".into(),
        ));
    }
    let alpha_lab = if g > 0.0 {
        TailExponent::Finite(eta / g)
    } else {
        TailExponent::Infinite
    };
    if r <= eta + 2.0 * g * gamma {
        return Ok((alpha_lab, alpha_lab));
    }
    let denom = r - eta - g * gamma;
    let alpha_cap = if denom > 0.0 {
        TailExponent::Finite(eta * gamma / denom)
    } else {
        TailExponent::Infinite
    };
    Ok((alpha_cap, alpha_lab))
}

/// Degenerate shock model for the closed-form example: `R = e^(r dt)`,
/// `G = e^(g dt)`, `v = e^(-eta dt)`, and a discount factor equal to survival,
/// `beta = e^(-eta dt)`.
pub fn example1_model(
    period: f64,
    gamma: f64,
    eta: f64,
    r: f64,
    g: f64,
) -> Result<ShockModel, TheoryError> {
    let v = (-eta * period).exp();
    Ok(ShockModel::deterministic(
        (r * period).exp(),
        (g * period).exp(),
        v,
        v,
        gamma,
        period,
    )?)
}

/// One row of an income-growth sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub g: f64,
    pub alpha_income: f64,
    pub alpha_tilde: TailExponent,
    pub alpha_wealth: TailExponent,
}

/// Exponents over `steps` evenly spaced promotion growth rates in
/// `[g_min, g_max]`, other parameters fixed, using exact lognormal moments.
pub fn sweep_growth(
    cal: &crate::shocks::Calibration,
    g_min: f64,
    g_max: f64,
    steps: usize,
) -> Result<Vec<SweepPoint>, TheoryError> {
    if !(g_min > 0.0 && g_max > g_min && steps >= 2) {
        return Err(TheoryError::InvalidParameter(
            "sweep needs 0 < g_min < g_max and at least 2 steps".into(),
        ));
    }
    (0..steps)
        .map(|i| {
            let g = g_min + (g_max - g_min) * i as f64 / (steps - 1) as f64;
            let model = cal.with_growth(g).lognormal();
            let alpha_income =
                promotion_exponent_closed_form(model.survival, model.promotion_prob, g)?;
            let report = solve_wealth_exponent(&model)?;
            Ok(SweepPoint {
                g,
                alpha_income,
                alpha_tilde: report.alpha_tilde,
                alpha_wealth: report.alpha_wealth,
            })
        })
        .collect()
}

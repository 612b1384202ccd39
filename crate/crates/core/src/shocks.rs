//! Return and income-growth shock processes.
//!
//! Agents face i.i.d. pairs `(R, G)` of gross asset return and gross income
//! growth, survive each period with probability `v`, and have CRRA preferences
//! with discount factor `beta` and relative risk aversion `gamma`. Exponent
//! calculations only need the mixed moments `E[R^a G^b]`, so both the discrete
//! model used by the solver and the exact lognormal model implement
//! [`ShockProcess`].

use thiserror::Error;

use crate::quadrature::discretize_returns;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid shock model: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError::Invalid(msg.into()))
}

/// Moments and primitives of an i.i.d. shock process.
pub trait ShockProcess {
    /// Survival probability `v`.
    fn survival(&self) -> f64;
    fn beta(&self) -> f64;
    fn gamma(&self) -> f64;
    /// `log E[R^a G^b]`.
    fn log_mixed_moment(&self, a: f64, b: f64) -> f64;
    /// Whether `Pr(G > 1) > 0`.
    fn income_can_grow(&self) -> bool;
    /// Whether `Pr(scale * R / G > 1) > 0`.
    fn scaled_relative_return_can_exceed_one(&self, scale: f64) -> bool;

    fn mixed_moment(&self, a: f64, b: f64) -> f64 {
        self.log_mixed_moment(a, b).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockState {
    /// Gross return `R`.
    pub ret: f64,
    /// Gross income growth `G`.
    pub growth: f64,
    pub prob: f64,
}

/// Joint discrete distribution of `(R, G)` with preference and survival
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockModel {
    states: Vec<ShockState>,
    survival: f64,
    beta: f64,
    gamma: f64,
    period: f64,
}

impl ShockModel {
    pub fn new(
        states: Vec<ShockState>,
        survival: f64,
        beta: f64,
        gamma: f64,
        period: f64,
    ) -> Result<Self, ModelError> {
        if states.is_empty() {
            return invalid("no shock states");
        }
        if states
            .iter()
            .any(|s| !(s.ret > 0.0 && s.growth > 0.0 && s.prob >= 0.0) || !s.ret.is_finite())
        {
            return invalid("returns and growth must be positive, probabilities nonnegative");
        }
        let total: f64 = states.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("probabilities sum to {total}, not 1"));
        }
        if !(survival > 0.0 && survival < 1.0) {
            return invalid(format!("survival probability {survival} outside (0, 1)"));
        }
        if !(beta > 0.0 && gamma > 0.0 && period > 0.0) {
            return invalid("beta, gamma and period must be positive");
        }
        Ok(Self {
            states,
            survival,
            beta,
            gamma,
            period,
        })
    }

    /// Single-state model with constant `R` and `G`.
    pub fn deterministic(
        ret: f64,
        growth: f64,
        survival: f64,
        beta: f64,
        gamma: f64,
        period: f64,
    ) -> Result<Self, ModelError> {
        Self::new(
            vec![ShockState {
                ret,
                growth,
                prob: 1.0,
            }],
            survival,
            beta,
            gamma,
            period,
        )
    }

    pub fn states(&self) -> &[ShockState] {
        &self.states
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// `E[f(state)]`.
    pub fn expect<F: Fn(&ShockState) -> f64>(&self, f: F) -> f64 {
        self.states.iter().map(|s| s.prob * f(s)).sum()
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

impl ShockProcess for ShockModel {
    fn survival(&self) -> f64 {
        self.survival
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn log_mixed_moment(&self, a: f64, b: f64) -> f64 {
        log_sum_exp(
            self.states
                .iter()
                .filter(|s| s.prob > 0.0)
                .map(|s| s.prob.ln() + a * s.ret.ln() + b * s.growth.ln()),
        )
    }

    fn income_can_grow(&self) -> bool {
        self.states.iter().any(|s| s.prob > 0.0 && s.growth > 1.0)
    }

    fn scaled_relative_return_can_exceed_one(&self, scale: f64) -> bool {
        self.states
            .iter()
            .any(|s| s.prob > 0.0 && scale * s.ret / s.growth > 1.0)
    }
}

/// Lognormal return, `log R ~ N((mu - sigma^2/2) dt, sigma^2 dt)`, independent
/// of two-point promotion growth: `G = e^g` with probability `p`, else 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalPromotion {
    pub mu: f64,
    pub sigma: f64,
    pub period: f64,
    pub promotion_prob: f64,
    pub promotion_growth: f64,
    pub survival: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ShockProcess for LognormalPromotion {
    fn survival(&self) -> f64 {
        self.survival
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn log_mixed_moment(&self, a: f64, b: f64) -> f64 {
        let m = (self.mu - 0.5 * self.sigma * self.sigma) * self.period;
        let s2 = self.sigma * self.sigma * self.period;
        let p = self.promotion_prob;
        let log_r = a * m + 0.5 * a * a * s2;
        let log_g = log_sum_exp([(1.0 - p).ln(), p.ln() + b * self.promotion_growth].into_iter());
        log_r + log_g
    }

    fn income_can_grow(&self) -> bool {
        self.promotion_prob > 0.0 && self.promotion_growth > 0.0
    }

    fn scaled_relative_return_can_exceed_one(&self, scale: f64) -> bool {
        // Lognormal support is unbounded.
        scale > 0.0
    }
}

/// Parameters of the promotion economy in annual units.
///
/// Field names follow the parameter-file keys: `delta_t`, `delta`, `gamma`,
/// `eta`, `mu`, `sigma`, `L`, `alpha_Y` and optionally `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Period length in years.
    pub delta_t: f64,
    /// Discount rate.
    pub delta: f64,
    /// Relative risk aversion.
    pub gamma: f64,
    /// Death rate.
    pub eta: f64,
    /// Expected return.
    pub mu: f64,
    /// Return volatility.
    pub sigma: f64,
    /// Expected years to promotion.
    pub promotion_time: f64,
    /// Target labor income exponent, used to back out `g` when `g` is unset.
    pub alpha_y: f64,
    /// Log income growth on promotion; derived from `alpha_y` when `None`.
    pub g: Option<f64>,
}

impl Calibration {
    /// The quarterly calibration with a labor income exponent of 3.
    pub fn baseline() -> Self {
        Self {
            delta_t: 0.25,
            delta: 0.04,
            gamma: 2.0,
            eta: 0.025,
            mu: 0.07,
            sigma: 0.15,
            promotion_time: 5.0,
            alpha_y: 3.0,
            g: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("delta_t", self.delta_t),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("sigma", self.sigma),
            ("L", self.promotion_time),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return invalid(format!("{name} must be positive, got {value}"));
            }
        }
        if !self.delta.is_finite() || !self.mu.is_finite() {
            return invalid("delta and mu must be finite");
        }
        match self.g {
            Some(g) if !(g > 0.0) => invalid(format!("g must be positive, got {g}")),
            None if !(self.alpha_y > 0.0) => {
                invalid(format!("alpha_Y must be positive, got {}", self.alpha_y))
            }
            _ => Ok(()),
        }
    }

    /// `v = exp(-eta dt)`.
    pub fn survival(&self) -> f64 {
        (-self.eta * self.delta_t).exp()
    }

    /// `beta = exp(-delta dt)`.
    pub fn beta(&self) -> f64 {
        (-self.delta * self.delta_t).exp()
    }

    /// `p = 1 - exp(-dt / L)`.
    pub fn promotion_prob(&self) -> f64 {
        -(-self.delta_t / self.promotion_time).exp_m1()
    }

    /// Log growth on promotion: the configured `g`, or the value that makes
    /// the labor income exponent equal `alpha_y`.
    pub fn promotion_growth(&self) -> f64 {
        self.g.unwrap_or_else(|| {
            crate::exponent_theory::promotion_growth_for_exponent(
                self.survival(),
                self.promotion_prob(),
                self.alpha_y,
            )
        })
    }

    pub fn with_growth(&self, g: f64) -> Self {
        Self { g: Some(g), ..*self }
    }

    /// Exact lognormal-return model.
    pub fn lognormal(&self) -> LognormalPromotion {
        LognormalPromotion {
            mu: self.mu,
            sigma: self.sigma,
            period: self.delta_t,
            promotion_prob: self.promotion_prob(),
            promotion_growth: self.promotion_growth(),
            survival: self.survival(),
            beta: self.beta(),
            gamma: self.gamma,
        }
    }

    /// Discrete model: `n_nodes` Gauss–Hermite return nodes crossed with the
    /// two growth states.
    pub fn discretized(&self, n_nodes: usize) -> Result<ShockModel, ModelError> {
        self.validate()?;
        let quad = discretize_returns(self.mu, self.sigma, self.delta_t, n_nodes);
        let p = self.promotion_prob();
        let growth = self.promotion_growth().exp();
        let mut states = Vec::with_capacity(2 * n_nodes);
        for (g, pg) in [(1.0, 1.0 - p), (growth, p)] {
            for (x, w) in quad.log_nodes.iter().zip(&quad.weights) {
                states.push(ShockState {
                    ret: x.exp(),
                    growth: g,
                    prob: w * pg,
                });
            }
        }
        // Absorb rounding so the probabilities sum to one.
        let total: f64 = states.iter().map(|s| s.prob).sum();
        for s in &mut states {
            s.prob /= total;
        }
        ShockModel::new(states, self.survival(), self.beta(), self.gamma, self.delta_t)
    }
}

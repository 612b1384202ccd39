//! Policy function iteration for the detrended income fluctuation problem.
//!
//! Dividing wealth and consumption by current income leaves one state, the
//! wealth-income ratio `a`, with law of motion `a' = R~ (a - c(a)) + 1` where
//! `R~ = R/G`, and an effective discount factor `beta~ = beta G^(1-gamma)`.
//! The Euler equation
//!
//! ```text
//! c(a)^(-gamma) = max{ E[beta~ R~ c(a')^(-gamma)], a^(-gamma) }
//! ```
//!
//! is solved on a [`WealthGrid`] by iterating
//! `c <- min{ (E[beta~ R~ c(a')^(-gamma)])^(-1/gamma), a }` with `a'`
//! computed from the current iterate. That map avoids root finding but is not
//! guaranteed to converge, so [`solve_policy`] falls back to time iteration,
//! which solves the Euler equation for `c` at every grid point.
//!
//! Off-grid consumption is linear between nodes and, above the top node,
//! linear with the theoretical asymptotic marginal propensity to consume.

mod grid;

pub use grid::{
    build_grid, WealthGrid, DEFAULT_GRID_COUNT, DEFAULT_GRID_MAX, DEFAULT_GRID_MEDIAN,
};

use std::io::Write;

use thiserror::Error;

use crate::exponent_theory::{asymptotic_mpc, check_existence, return_discount_moment, Existence};
use crate::format::sig6;
use crate::shocks::ShockModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("infeasible grid: {0}")]
    InfeasibleGrid(String),
    #[error(
        "model has no well-defined consumption policy: beta E[G^(1-gamma)] = {discounted_growth}, \
         E[beta R^(1-gamma)] = {return_discount}"
    )]
    Precondition {
        discounted_growth: f64,
        return_discount: f64,
    },
    #[error("no convergence after {iterations} iterations (sup change {sup_change:e})")]
    NoConvergence { iterations: usize, sup_change: f64 },
    #[error("policy export: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm change at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Iteration cap for the time-iteration fallback.
    pub fallback_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            fallback_max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// The root-free policy map.
    PolicyMap,
    /// Time iteration with a root solve per grid point.
    TimeIteration,
}

/// Normalized consumption on a wealth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySolution {
    pub grid: WealthGrid,
    pub consumption: Vec<f64>,
    pub iterations: usize,
    pub sup_change: f64,
    pub converged: bool,
    pub method: SolveMethod,
    /// Theoretical asymptotic MPC, also the slope used above the grid.
    pub mpc_theoretical: f64,
    pub existence: Existence,
}

impl PolicySolution {
    /// Consumption at any `a >= 0`.
    pub fn consumption_at(&self, a: f64) -> f64 {
        interpolate(self.grid.points(), &self.consumption, self.mpc_theoretical, a)
    }

    /// Slope between the two highest grid points.
    pub fn top_slope(&self) -> f64 {
        let p = self.grid.points();
        let c = &self.consumption;
        let n = p.len();
        (c[n - 1] - c[n - 2]) / (p[n - 1] - p[n - 2])
    }

    /// Writes `a_tilde,c_tilde` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SolverError> {
        let io = |e: std::io::Error| SolverError::Io(e.to_string());
        writeln!(w, "a_tilde,c_tilde").map_err(io)?;
        for (a, c) in self.grid.points().iter().zip(&self.consumption) {
            writeln!(w, "{},{}", sig6(*a), sig6(*c)).map_err(io)?;
        }
        Ok(())
    }
}

/// Linear interpolation on `points`, extended above the last node with `slope`.
fn interpolate(points: &[f64], values: &[f64], slope: f64, a: f64) -> f64 {
    let n = points.len();
    if a >= points[n - 1] {
        return values[n - 1] + slope * (a - points[n - 1]);
    }
    if a <= points[0] {
        return values[0];
    }
    let j = points.partition_point(|&p| p <= a);
    let (x0, x1) = (points[j - 1], points[j]);
    let (y0, y1) = (values[j - 1], values[j]);
    y0 + (y1 - y0) * (a - x0) / (x1 - x0)
}

/// Per-state data of the detrended problem: the Euler weight
/// `prob * beta~ * R~ = prob * beta * R * G^(-gamma)` and `R~ = R / G`.
struct Detrended {
    weight: Vec<f64>,
    rel_return: Vec<f64>,
    gamma: f64,
}

impl Detrended {
    fn new(model: &ShockModel) -> Self {
        use crate::shocks::ShockProcess;
        let (beta, gamma) = (model.beta(), model.gamma());
        let states = model.states();
        Self {
            weight: states
                .iter()
                .map(|s| s.prob * beta * s.ret * s.growth.powf(-gamma))
                .collect(),
            rel_return: states.iter().map(|s| s.ret / s.growth).collect(),
            gamma,
        }
    }

    /// `E[beta~ R~ c(R~ savings + 1)^(-gamma)]` under the policy `c`.
    fn expected_marginal_utility<C: Fn(f64) -> f64>(&self, savings: f64, c: C) -> f64 {
        self.weight
            .iter()
            .zip(&self.rel_return)
            .map(|(w, r)| w * c(r * savings + 1.0).powf(-self.gamma))
            .sum()
    }
}

fn check_preconditions(model: &ShockModel) -> Result<Existence, SolverError> {
    let existence = check_existence(model);
    let return_discount = return_discount_moment(model);
    if existence.discounted_growth >= 1.0 || return_discount >= 1.0 {
        return Err(SolverError::Precondition {
            discounted_growth: existence.discounted_growth,
            return_discount,
        });
    }
    if !existence.holds {
        log::debug!(
            "beta E[R G^-gamma] = {} >= 1; the sufficient condition for uniqueness fails",
            existence.discounted_return
        );
    }
    Ok(existence)
}

/// Starting policy `c(a) = min{a, 1 + m a}` with `m` the asymptotic MPC.
fn initial_policy(grid: &WealthGrid, mpc: f64) -> Vec<f64> {
    grid.points().iter().map(|&a| a.min(1.0 + mpc * a)).collect()
}

fn sup_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs the root-free policy map until the sup-norm change drops below `tol`
/// or `max_iter` updates have been made. Never fails on non-convergence; the
/// result's `converged` flag reports it.
pub fn iterate_policy(
    model: &ShockModel,
    grid: &WealthGrid,
    opts: &SolverOptions,
) -> Result<PolicySolution, SolverError> {
    let existence = check_preconditions(model)?;
    let mpc = asymptotic_mpc(model);
    let det = Detrended::new(model);
    let points = grid.points();
    let mut c = initial_policy(grid, mpc);
    let mut next = vec![0.0; c.len()];
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        for (i, &a) in points.iter().enumerate() {
            next[i] = if a == 0.0 {
                0.0
            } else {
                let e = det.expected_marginal_utility(a - c[i], |x| interpolate(points, &c, mpc, x));
                e.powf(-1.0 / det.gamma).min(a)
            };
        }
        change = sup_change(&c, &next);
        std::mem::swap(&mut c, &mut next);
        iterations += 1;
        if !change.is_finite() || change < opts.tol {
            break;
        }
    }
    Ok(PolicySolution {
        grid: grid.clone(),
        consumption: c,
        iterations,
        sup_change: change,
        converged: change < opts.tol,
        method: SolveMethod::PolicyMap,
        mpc_theoretical: mpc,
        existence,
    })
}

/// Time iteration: at each grid point solve
/// `c^(-gamma) = max{E[beta~ R~ c_old(R~ (a - c) + 1)^(-gamma)], a^(-gamma)}`
/// for `c` by bisection, starting from the same initial policy.
pub fn time_iteration(
    model: &ShockModel,
    grid: &WealthGrid,
    opts: &SolverOptions,
) -> Result<PolicySolution, SolverError> {
    let existence = check_preconditions(model)?;
    let mpc = asymptotic_mpc(model);
    let det = Detrended::new(model);
    let points = grid.points();
    let mut c = initial_policy(grid, mpc);
    let mut next = vec![0.0; c.len()];
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.fallback_max_iter {
        for (i, &a) in points.iter().enumerate() {
            if a == 0.0 {
                next[i] = 0.0;
                continue;
            }
            let old = |x: f64| interpolate(points, &c, mpc, x);
            // Excess of current over expected marginal utility, decreasing in c.
            let excess = |ci: f64| ci.powf(-det.gamma) - det.expected_marginal_utility(a - ci, old);
            next[i] = if excess(a) >= 0.0 {
                a
            } else {
                crate::roots::bisect(excess, 0.0, a, |_, _| false)
            };
        }
        change = sup_change(&c, &next);
        std::mem::swap(&mut c, &mut next);
        iterations += 1;
        if !change.is_finite() || change < opts.tol {
            break;
        }
    }
    Ok(PolicySolution {
        grid: grid.clone(),
        consumption: c,
        iterations,
        sup_change: change,
        converged: change < opts.tol,
        method: SolveMethod::TimeIteration,
        mpc_theoretical: mpc,
        existence,
    })
}

/// Solves with the policy map, falling back to time iteration when the map
/// does not converge.
pub fn solve_policy(
    model: &ShockModel,
    grid: &WealthGrid,
    opts: &SolverOptions,
) -> Result<PolicySolution, SolverError> {
    let fast = iterate_policy(model, grid, opts)?;
    if fast.converged {
        return Ok(fast);
    }
    log::info!(
        "policy map stopped after {} iterations (sup change {:e}); falling back to time iteration",
        fast.iterations,
        fast.sup_change
    );
    let slow = time_iteration(model, grid, opts)?;
    if slow.converged {
        Ok(slow)
    } else {
        Err(SolverError::NoConvergence {
            iterations: slow.iterations,
            sup_change: slow.sup_change,
        })
    }
}

/// Relative Euler equation error at each grid point, in consumption units:
/// `|c - min{E[beta~ R~ c(a')^(-gamma)]^(-1/gamma), a}| / c`. Zero at `a = 0`
/// and wherever the borrowing constraint binds.
pub fn euler_residuals(solution: &PolicySolution, model: &ShockModel) -> Vec<f64> {
    let det = Detrended::new(model);
    let points = solution.grid.points();
    points
        .iter()
        .zip(&solution.consumption)
        .map(|(&a, &c)| {
            if a == 0.0 {
                return 0.0;
            }
            let e = det.expected_marginal_utility(a - c, |x| solution.consumption_at(x));
            let implied = e.powf(-1.0 / det.gamma).min(a);
            (c - implied).abs() / c
        })
        .collect()
}

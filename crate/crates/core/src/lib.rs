//! Estimation and theory tools for comparing the Pareto tails of labor and
//! capital income.
//!
//! * [`tail_stats`]: cleaning samples and the Hill estimator.
//! * [`equality_test`]: a self-normalized test that two tail indices are equal.
//! * [`exponent_theory`]: tail exponents implied by an income fluctuation model.
//! * [`ifp_solver`]: the model's consumption policy.
//! * [`panel_sim`]: simulating a stationary cross-section of households.
//! * [`pipeline`]: panel ingestion, per-cell estimation and reports.

pub mod equality_test;
pub mod exponent_theory;
pub mod format;
pub mod ifp_solver;
pub mod panel_sim;
pub mod pipeline;
pub mod quadrature;
mod roots;
pub mod shocks;
pub mod tail_stats;

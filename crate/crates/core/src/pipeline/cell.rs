//! Estimation and testing for one country-year cell.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use super::ingest::{CellKey, PanelRecord};
use crate::equality_test::{test_equality, CriticalValueTable, TestOptions, DEFAULT_LEVEL, DEFAULT_T0};
use crate::tail_stats::{hill_with_fraction, TailSample, DEFAULT_MIN_OBS, DEFAULT_TAIL_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOptions {
    pub tail_fraction: f64,
    pub t0: f64,
    pub level: f64,
    /// Positive capital income observations needed to test a cell.
    pub n_min: usize,
    /// Test against labor income of households with positive capital
    /// income only (those are the households the capital sample covers).
    pub restrict_labor: bool,
    /// Run the equality test; when off, only exponents are estimated.
    pub run_test: bool,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            t0: DEFAULT_T0,
            level: DEFAULT_LEVEL,
            n_min: DEFAULT_MIN_OBS,
            restrict_labor: true,
            run_test: true,
        }
    }
}

/// Why a cell has no test decision.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    /// Labor exponent could not be estimated.
    LaborTail(String),
    /// Fewer positive capital income observations than `n_min`.
    TooFewCapital { n_cap: usize, n_min: usize },
    /// Capital exponent could not be estimated.
    CapitalTail(String),
    /// The equality test itself failed.
    Test(String),
}

impl SkipReason {
    /// Stable token for tables.
    pub fn code(&self) -> &'static str {
        match self {
            SkipReason::LaborTail(_) => "labor_tail",
            SkipReason::TooFewCapital { .. } => "too_few_capital",
            SkipReason::CapitalTail(_) => "capital_tail",
            SkipReason::Test(_) => "test_failed",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::LaborTail(e) => write!(f, "labor income: {e}"),
            SkipReason::TooFewCapital { n_cap, n_min } => {
                write!(f, "{n_cap} positive capital incomes, need {n_min}")
            }
            SkipReason::CapitalTail(e) => write!(f, "capital income: {e}"),
            SkipReason::Test(e) => write!(f, "equality test: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub key: CellKey,
    /// Positive labor income observations.
    pub n_lab: usize,
    /// Positive capital income observations.
    pub n_cap: usize,
    pub k_lab: Option<usize>,
    pub alpha_lab: Option<f64>,
    pub se_lab: Option<f64>,
    pub k_cap: Option<usize>,
    pub alpha_cap: Option<f64>,
    pub se_cap: Option<f64>,
    /// Labor exponent at the shared tail count used by the test.
    pub alpha_lab_joint: Option<f64>,
    pub statistic: Option<f64>,
    pub critical_value: Option<f64>,
    pub reject: Option<bool>,
    pub skip_reason: Option<SkipReason>,
}

impl CellReport {
    fn empty(key: CellKey, n_lab: usize, n_cap: usize) -> Self {
        Self {
            key,
            n_lab,
            n_cap,
            k_lab: None,
            alpha_lab: None,
            se_lab: None,
            k_cap: None,
            alpha_cap: None,
            se_cap: None,
            alpha_lab_joint: None,
            statistic: None,
            critical_value: None,
            reject: None,
            skip_reason: None,
        }
    }

    pub fn tested(&self) -> bool {
        self.reject.is_some()
    }
}

fn positive(x: Option<f64>) -> Option<f64> {
    x.filter(|v| *v > 0.0)
}

/// Labor exponent on every positive labor income; capital exponent and the
/// equality test when the cell has at least `n_min` positive capital incomes.
/// Failures are recorded in `skip_reason`, never raised.
pub fn run_cell(
    key: CellKey,
    records: &[PanelRecord],
    opts: &CellOptions,
    table: &CriticalValueTable,
) -> CellReport {
    let n_lab = records.iter().filter(|r| positive(r.labor_income).is_some()).count();
    let n_cap = records.iter().filter(|r| positive(r.capital_income).is_some()).count();
    let mut report = CellReport::empty(key, n_lab, n_cap);

    let lab = match TailSample::clean(records.iter().map(|r| r.labor_income))
        .and_then(|s| hill_with_fraction(&s, opts.tail_fraction).map(|h| (s, h)))
    {
        Ok((sample, h)) => {
            report.k_lab = Some(h.k);
            report.alpha_lab = Some(h.alpha);
            report.se_lab = Some(h.se);
            sample
        }
        Err(e) => {
            report.skip_reason = Some(SkipReason::LaborTail(e.to_string()));
            return report;
        }
    };

    if n_cap < opts.n_min {
        report.skip_reason = Some(SkipReason::TooFewCapital {
            n_cap,
            n_min: opts.n_min,
        });
        return report;
    }
    let cap = match TailSample::clean(records.iter().map(|r| r.capital_income))
        .and_then(|s| hill_with_fraction(&s, opts.tail_fraction).map(|h| (s, h)))
    {
        Ok((sample, h)) => {
            report.k_cap = Some(h.k);
            report.alpha_cap = Some(h.alpha);
            report.se_cap = Some(h.se);
            sample
        }
        Err(e) => {
            report.skip_reason = Some(SkipReason::CapitalTail(e.to_string()));
            return report;
        }
    };

    if !opts.run_test {
        return report;
    }
    let lab_joint = if opts.restrict_labor {
        let restricted = records
            .iter()
            .filter(|r| positive(r.capital_income).is_some())
            .map(|r| r.labor_income);
        match TailSample::clean(restricted) {
            Ok(s) => s,
            Err(e) => {
                report.skip_reason = Some(SkipReason::Test(e.to_string()));
                return report;
            }
        }
    } else {
        lab
    };
    let test_opts = TestOptions {
        t0: opts.t0,
        level: opts.level,
        tail_fraction: opts.tail_fraction,
    };
    match test_equality(&lab_joint, &cap, &test_opts, table) {
        Ok(r) => {
            report.alpha_lab_joint = Some(r.alpha_lab);
            report.statistic = Some(r.statistic);
            report.critical_value = Some(r.critical_value);
            report.reject = Some(r.reject);
        }
        Err(e) => report.skip_reason = Some(SkipReason::Test(e.to_string())),
    }
    report
}

/// Runs every cell, in parallel, returning reports in key order.
pub fn run_cells(
    cells: &BTreeMap<CellKey, Vec<PanelRecord>>,
    opts: &CellOptions,
    table: &CriticalValueTable,
) -> Vec<CellReport> {
    let cells: Vec<_> = cells.iter().collect();
    cells
        .par_iter()
        .map(|(key, records)| run_cell((*key).clone(), records, opts, table))
        .collect()
}

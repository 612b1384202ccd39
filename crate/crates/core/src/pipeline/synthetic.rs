//! Synthetic household panels with known tail exponents.

use std::io::Write;

use rand::Rng;

use super::ingest::{CellKey, PanelRecord};
use crate::format::sig6;

/// Exact Pareto draw `U^(-1/alpha)` on `[1, inf)`.
pub fn pareto_draw<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    // `random` is on [0, 1); flip it so the uniform is never zero.
    let u = 1.0 - rng.random::<f64>();
    u.powf(-1.0 / alpha)
}

pub fn pareto_sample<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| pareto_draw(alpha, rng)).collect()
}

/// Shape of a synthetic country-year cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCell {
    pub n_households: usize,
    /// Share of households with positive capital income.
    pub cap_share: f64,
    pub alpha_lab: f64,
    pub alpha_cap: f64,
    /// Probability that a household's capital income reuses the uniform
    /// behind its labor income (tail dependence); otherwise a fresh one.
    pub dependence: f64,
}

impl Default for SyntheticCell {
    fn default() -> Self {
        Self {
            n_households: 100_000,
            cap_share: 0.2,
            alpha_lab: 3.0,
            alpha_cap: 1.5,
            dependence: 0.5,
        }
    }
}

/// One cell of households. Both marginals are exact Pareto; the first
/// `round(cap_share * n)` households hold positive capital income, the rest
/// report zero.
pub fn dependent_cell<R: Rng + ?Sized>(
    key: &CellKey,
    spec: &SyntheticCell,
    rng: &mut R,
) -> Vec<PanelRecord> {
    let n_cap = (spec.cap_share * spec.n_households as f64).round() as usize;
    (0..spec.n_households)
        .map(|i| {
            let u_lab = 1.0 - rng.random::<f64>();
            let capital_income = if i < n_cap {
                let u_cap = if rng.random_bool(spec.dependence) {
                    u_lab
                } else {
                    1.0 - rng.random::<f64>()
                };
                u_cap.powf(-1.0 / spec.alpha_cap)
            } else {
                0.0
            };
            PanelRecord {
                country: key.country.clone(),
                year: key.year,
                household_id: format!("h{i}"),
                labor_income: Some(u_lab.powf(-1.0 / spec.alpha_lab)),
                capital_income: Some(capital_income),
            }
        })
        .collect()
}

/// Writes records with the default schema's column names.
pub fn write_panel_csv<'a, W, I>(mut w: W, records: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a PanelRecord>,
{
    writeln!(w, "country,year,household_id,labor_income,capital_income")?;
    let field = |x: Option<f64>| x.map(sig6).unwrap_or_else(|| "NA".into());
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.country,
            r.year,
            r.household_id,
            field(r.labor_income),
            field(r.capital_income)
        )?;
    }
    Ok(())
}

//! Per-cell tables, the cross-cell summary, and plot data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::cell::CellReport;
use super::PipelineError;
use crate::format::sig6;

/// Two-sided 95% normal quantile.
const Z_975: f64 = 1.959_963_984_540_054;
/// Bin width of the exponent histograms.
pub const HISTOGRAM_BIN: f64 = 0.25;

/// Pearson correlation with a Fisher-z confidence interval that treats the
/// cells as independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    /// Fewer than two cells, or no variation.
    Undefined { n: usize },
    Estimate {
        n: usize,
        r: f64,
        /// `None` when `n <= 3`, where the z-transform has no finite variance.
        ci: Option<(f64, f64)>,
    },
}

pub fn pearson_with_ci(pairs: &[(f64, f64)]) -> Correlation {
    let n = pairs.len();
    if n < 2 {
        return Correlation::Undefined { n };
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Correlation::Undefined { n };
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let ci = (n > 3).then(|| {
        let z = r.atanh();
        let half = Z_975 / (nf - 3.0).sqrt();
        ((z - half).tanh(), (z + half).tanh())
    });
    Correlation::Estimate { n, r, ci }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n_cells: usize,
    pub n_tested: usize,
    pub n_skipped: usize,
    pub median_alpha_lab: Option<f64>,
    pub median_alpha_cap: Option<f64>,
    /// Share of tested cells that reject.
    pub rejection_rate: Option<f64>,
    pub correlation: Correlation,
}

/// Value as written to the tables; statistics are computed from these so
/// they can be recomputed from the files exactly.
fn rounded(x: f64) -> f64 {
    sig6(x).parse().unwrap_or(x)
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

pub fn summarize(reports: &[CellReport]) -> Summary {
    let lab: Vec<f64> = reports.iter().filter_map(|r| r.alpha_lab).map(rounded).collect();
    let cap: Vec<f64> = reports.iter().filter_map(|r| r.alpha_cap).map(rounded).collect();
    let n_tested = reports.iter().filter(|r| r.tested()).count();
    let n_reject = reports.iter().filter(|r| r.reject == Some(true)).count();
    let pairs: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| Some((rounded(r.alpha_lab?), rounded(r.alpha_cap?))))
        .collect();
    Summary {
        n_cells: reports.len(),
        n_tested,
        n_skipped: reports.len() - n_tested,
        median_alpha_lab: median(lab),
        median_alpha_cap: median(cap),
        rejection_rate: (n_tested > 0).then(|| n_reject as f64 / n_tested as f64),
        correlation: pearson_with_ci(&pairs),
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
}

fn opt_f(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "NA".into())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, PipelineError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

pub fn write_cells_csv<W: Write>(mut w: W, reports: &[CellReport]) -> std::io::Result<()> {
    writeln!(
        w,
        "country,year,n_lab,n_cap,k_lab,alpha_lab,se_lab,k_cap,alpha_cap,se_cap,\
         alpha_lab_joint,statistic,critical_value,reject,skip_reason"
    )?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.key.country,
            r.key.year,
            r.n_lab,
            r.n_cap,
            opt(r.k_lab),
            opt_f(r.alpha_lab),
            opt_f(r.se_lab),
            opt(r.k_cap),
            opt_f(r.alpha_cap),
            opt_f(r.se_cap),
            opt_f(r.alpha_lab_joint),
            opt_f(r.statistic),
            opt_f(r.critical_value),
            opt(r.reject),
            r.skip_reason.as_ref().map(|s| s.code()).unwrap_or("NA"),
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut w: W, s: &Summary) -> std::io::Result<()> {
    writeln!(w, "key,value")?;
    writeln!(w, "n_cells,{}", s.n_cells)?;
    writeln!(w, "n_tested,{}", s.n_tested)?;
    writeln!(w, "n_skipped,{}", s.n_skipped)?;
    writeln!(w, "median_alpha_lab,{}", opt_f(s.median_alpha_lab))?;
    writeln!(w, "median_alpha_cap,{}", opt_f(s.median_alpha_cap))?;
    writeln!(w, "rejection_rate,{}", opt_f(s.rejection_rate))?;
    match s.correlation {
        Correlation::Undefined { n } => {
            writeln!(w, "correlation_n,{n}")?;
            writeln!(w, "correlation,undefined")?;
            writeln!(w, "correlation_ci_low,NA")?;
            writeln!(w, "correlation_ci_high,NA")?;
        }
        Correlation::Estimate { n, r, ci } => {
            writeln!(w, "correlation_n,{n}")?;
            writeln!(w, "correlation,{}", sig6(r))?;
            writeln!(w, "correlation_ci_low,{}", opt_f(ci.map(|c| c.0)))?;
            writeln!(w, "correlation_ci_high,{}", opt_f(ci.map(|c| c.1)))?;
        }
    }
    Ok(())
}

fn write_scatter<W: Write>(mut w: W, reports: &[CellReport]) -> std::io::Result<()> {
    writeln!(w, "country,year,alpha_lab,alpha_cap")?;
    for r in reports {
        if let (Some(l), Some(c)) = (r.alpha_lab, r.alpha_cap) {
            writeln!(w, "{},{},{},{}", r.key.country, r.key.year, sig6(l), sig6(c))?;
        }
    }
    Ok(())
}

/// Counts per bin `[j w, (j+1) w)` for each series.
fn write_histogram<W: Write>(mut w: W, reports: &[CellReport]) -> std::io::Result<()> {
    writeln!(w, "series,bin_low,bin_high,count")?;
    let series: [(&str, Vec<f64>); 2] = [
        ("alpha_lab", reports.iter().filter_map(|r| r.alpha_lab).collect()),
        ("alpha_cap", reports.iter().filter_map(|r| r.alpha_cap).collect()),
    ];
    for (name, values) in series {
        if values.is_empty() {
            continue;
        }
        let bin = |x: f64| (x / HISTOGRAM_BIN).floor() as i64;
        let lo = values.iter().map(|&x| bin(x)).min().unwrap();
        let hi = values.iter().map(|&x| bin(x)).max().unwrap();
        for j in lo..=hi {
            let count = values.iter().filter(|&&x| bin(x) == j).count();
            writeln!(
                w,
                "{name},{},{},{count}",
                sig6(j as f64 * HISTOGRAM_BIN),
                sig6((j + 1) as f64 * HISTOGRAM_BIN)
            )?;
        }
    }
    Ok(())
}

/// Writes `cells.csv`, `summary.csv`, `scatter.csv` and `histogram.csv`
/// into `out_dir`, creating it if needed.
pub fn emit_reports(reports: &[CellReport], out_dir: &Path) -> Result<Summary, PipelineError> {
    if reports.is_empty() {
        return Err(PipelineError::NoReports);
    }
    std::fs::create_dir_all(out_dir)?;
    let summary = summarize(reports);
    let mut f = create(out_dir, "cells.csv")?;
    write_cells_csv(&mut f, reports)?;
    f.flush()?;
    let mut f = create(out_dir, "summary.csv")?;
    write_summary_csv(&mut f, &summary)?;
    f.flush()?;
    let mut f = create(out_dir, "scatter.csv")?;
    write_scatter(&mut f, reports)?;
    f.flush()?;
    let mut f = create(out_dir, "histogram.csv")?;
    write_histogram(&mut f, reports)?;
    f.flush()?;
    Ok(summary)
}

//! Critical values of the limiting Brownian functional
//! `W(1)^2 / integral_{t0}^1 (W(t) - t W(1))^2 dt`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::TestError;
use crate::format::sig6;

/// Published 95th percentile of the limiting functional at `t0 = 0.2`.
pub const PUBLISHED_CRITICAL_VALUE: f64 = 55.44;
const PUBLISHED_T0: f64 = 0.2;
const PUBLISHED_LEVEL: f64 = 0.05;

const KEY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Published,
    Simulated,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Published => "published",
            Provenance::Simulated => "simulated",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "published" => Ok(Provenance::Published),
            "simulated" => Ok(Provenance::Simulated),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValueEntry {
    pub t0: f64,
    pub level: f64,
    pub value: f64,
    pub provenance: Provenance,
}

/// Critical values keyed by `(t0, level)`.
///
/// The published entry `(0.2, 0.05) -> 55.44` is always present and is never
/// overwritten by a simulated value. On disk the table is plain text, one
/// entry per line:
///
/// ```text
/// # t0 level value provenance
/// 0.2 0.05 55.44 published
/// 0.1 0.05 61.2 simulated
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    entries: Vec<CriticalValueEntry>,
}

impl Default for CriticalValueTable {
    fn default() -> Self {
        Self::new()
    }
}

impl CriticalValueTable {
    pub fn new() -> Self {
        Self {
            entries: vec![CriticalValueEntry {
                t0: PUBLISHED_T0,
                level: PUBLISHED_LEVEL,
                value: PUBLISHED_CRITICAL_VALUE,
                provenance: Provenance::Published,
            }],
        }
    }

    pub fn entries(&self) -> &[CriticalValueEntry] {
        &self.entries
    }

    fn position(&self, t0: f64, level: f64) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| (e.t0 - t0).abs() < KEY_TOL && (e.level - level).abs() < KEY_TOL)
    }

    pub fn get(&self, t0: f64, level: f64) -> Option<f64> {
        self.position(t0, level).map(|i| self.entries[i].value)
    }

    /// Adds or replaces an entry. A simulated value never replaces a published
    /// one; returns whether the table changed.
    pub fn insert(&mut self, entry: CriticalValueEntry) -> bool {
        assert!(entry.value > 0.0, "critical values are positive");
        match self.position(entry.t0, entry.level) {
            Some(i)
                if self.entries[i].provenance == Provenance::Published
                    && entry.provenance == Provenance::Simulated =>
            {
                false
            }
            Some(i) => {
                self.entries[i] = entry;
                true
            }
            None => {
                self.entries.push(entry);
                true
            }
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TestError> {
        let io = |e: std::io::Error| TestError::Io(e.to_string());
        writeln!(w, "# t0 level value provenance").map_err(io)?;
        for e in &self.entries {
            writeln!(
                w,
                "{} {} {} {}",
                sig6(e.t0),
                sig6(e.level),
                sig6(e.value),
                e.provenance
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, TestError> {
        let mut table = Self::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| TestError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| TestError::TableParse { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            let entry = CriticalValueEntry {
                t0: num(fields[0])?,
                level: num(fields[1])?,
                value: num(fields[2])?,
                provenance: fields[3].parse().map_err(err)?,
            };
            if !(entry.t0 > 0.0 && entry.t0 < 1.0 && entry.level > 0.0 && entry.level < 1.0) {
                return Err(err("t0 and level must lie in (0, 1)".into()));
            }
            if !(entry.value > 0.0) {
                return Err(err("critical value must be positive".into()));
            }
            table.insert(entry);
        }
        Ok(table)
    }
}

/// One draw of the functional from a random walk with `n_steps` Gaussian steps.
/// `path` must hold `n_steps + 1` values.
fn functional_draw<R: rand::Rng>(rng: &mut R, t0: f64, path: &mut [f64]) -> f64 {
    let n = path.len() - 1;
    let scale = 1.0 / (n as f64).sqrt();
    let mut w = 0.0;
    path[0] = 0.0;
    for slot in path.iter_mut().skip(1) {
        let z: f64 = StandardNormal.sample(rng);
        w += z * scale;
        *slot = w;
    }
    let w1 = w;
    let h = 1.0 / n as f64;
    let bridge = |j: usize| path[j] - (j as f64 * h) * w1;

    // Trapezoid on the grid from the first node at or after t0; the partial
    // cell [t0, j0 h] uses the linearly interpolated bridge.
    let j0 = (t0 * n as f64 - 1e-9).ceil() as usize;
    let mut integral = 0.0;
    let mut prev = bridge(j0).powi(2);
    for j in j0 + 1..=n {
        let cur = bridge(j).powi(2);
        integral += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    let gap = j0 as f64 * h - t0;
    if gap > 0.0 {
        let lo = j0 - 1;
        let frac = (t0 - lo as f64 * h) / h;
        let b_t0 = bridge(lo) + frac * (bridge(j0) - bridge(lo));
        integral += 0.5 * (b_t0 * b_t0 + bridge(j0).powi(2)) * gap;
    }
    w1 * w1 / integral
}

/// Per-path generator: the stream index is the path index, so output does not
/// depend on how paths are split across threads.
fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Draws of the functional, sorted ascending.
pub fn simulate_functional_draws(t0: f64, n_paths: usize, n_steps: usize, seed: u64) -> Vec<f64> {
    assert!(t0 > 0.0 && t0 < 1.0, "t0 must lie in (0, 1)");
    assert!(n_steps >= 2 && n_paths >= 1);
    let mut draws: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; n_steps + 1],
            |buf, i| functional_draw(&mut path_rng(seed, i), t0, buf),
        )
        .collect();
    draws.sort_by(f64::total_cmp);
    draws
}

/// Lower empirical quantile: the smallest draw with at least `q` of the sample
/// at or below it.
pub(crate) fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// `(1 - level)` quantile of the functional from `n_paths` simulated paths.
pub fn simulate_critical_value(
    t0: f64,
    level: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<f64, TestError> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(TestError::InvalidT0(t0));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(TestError::InvalidLevel(level));
    }
    let draws = simulate_functional_draws(t0, n_paths, n_steps, seed);
    Ok(empirical_quantile(&draws, 1.0 - level))
}

//! Household micro-data ingestion.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use super::config::KeyValues;
use super::PipelineError;

/// Column mapping and tolerances for an input extract.
///
/// Schema file keys (all optional): `country`, `year`, `household_id`,
/// `labor_income`, `capital_income` name the CSV columns; `missing` is a
/// comma-separated list of tokens read as missing; `max_bad_fraction` is the
/// tolerated share of malformed rows; `delimiter` is a single character.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub country: String,
    pub year: String,
    pub household_id: String,
    pub labor_income: String,
    pub capital_income: String,
    pub missing: Vec<String>,
    pub max_bad_fraction: f64,
    pub delimiter: u8,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            country: "country".into(),
            year: "year".into(),
            household_id: "household_id".into(),
            labor_income: "labor_income".into(),
            capital_income: "capital_income".into(),
            missing: vec![String::new(), "NA".into(), ".".into()],
            max_bad_fraction: 0.01,
            delimiter: b',',
        }
    }
}

impl Schema {
    pub const KEYS: [&'static str; 8] = [
        "country",
        "year",
        "household_id",
        "labor_income",
        "capital_income",
        "missing",
        "max_bad_fraction",
        "delimiter",
    ];

    pub fn from_key_values(kv: &KeyValues) -> Result<Self, PipelineError> {
        kv.reject_unknown(&Self::KEYS)?;
        let d = Self::default();
        let col = |key: &str, default: String| -> String {
            kv.get_str(key).map(str::to_string).unwrap_or(default)
        };
        let missing = match kv.get_str("missing") {
            Some(list) => list.split(',').map(|t| t.trim().to_string()).collect(),
            None => d.missing.clone(),
        };
        let delimiter = match kv.get_str("delimiter") {
            None => d.delimiter,
            Some("tab") => b'\t',
            Some(s) if s.len() == 1 => s.as_bytes()[0],
            Some(s) => {
                return Err(PipelineError::Schema(format!(
                    "delimiter must be one character or `tab`, got {s:?}"
                )))
            }
        };
        let max_bad_fraction = kv.get_or("max_bad_fraction", d.max_bad_fraction)?;
        if !(0.0..1.0).contains(&max_bad_fraction) {
            return Err(PipelineError::Schema(format!(
                "max_bad_fraction must lie in [0, 1), got {max_bad_fraction}"
            )));
        }
        Ok(Self {
            country: col("country", d.country),
            year: col("year", d.year),
            household_id: col("household_id", d.household_id),
            labor_income: col("labor_income", d.labor_income),
            capital_income: col("capital_income", d.capital_income),
            missing,
            max_bad_fraction,
            delimiter,
        })
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        Self::from_key_values(&KeyValues::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecord {
    pub country: String,
    pub year: i32,
    pub household_id: String,
    pub labor_income: Option<f64>,
    pub capital_income: Option<f64>,
}

/// A country-year cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub country: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BadRow {
    /// 1-based line in the file, counting the header.
    pub line: u64,
    pub reason: String,
}

/// Most malformed rows kept verbatim in an [`Ingested`] report.
pub const MAX_BAD_EXAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub cells: BTreeMap<CellKey, Vec<PanelRecord>>,
    pub n_rows: usize,
    pub n_bad: usize,
    pub bad_examples: Vec<BadRow>,
}

impl Ingested {
    pub fn n_records(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }
}

struct Columns {
    country: usize,
    year: usize,
    household_id: usize,
    labor_income: usize,
    capital_income: usize,
    width: usize,
}

fn locate(headers: &csv::StringRecord, schema: &Schema) -> Result<Columns, PipelineError> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| PipelineError::Schema(format!("column {name:?} not found in header")))
    };
    Ok(Columns {
        country: find(&schema.country)?,
        year: find(&schema.year)?,
        household_id: find(&schema.household_id)?,
        labor_income: find(&schema.labor_income)?,
        capital_income: find(&schema.capital_income)?,
        width: headers.len(),
    })
}

fn parse_income(field: &str, schema: &Schema) -> Result<Option<f64>, String> {
    let f = field.trim();
    if schema.missing.iter().any(|m| m == f) {
        return Ok(None);
    }
    match f.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        Ok(x) => Err(format!("non-finite income {x}")),
        Err(_) => Err(format!("cannot parse income {f:?}")),
    }
}

fn parse_row(row: &csv::StringRecord, cols: &Columns, schema: &Schema) -> Result<PanelRecord, String> {
    if row.len() != cols.width {
        return Err(format!("expected {} fields, found {}", cols.width, row.len()));
    }
    let country = row[cols.country].trim();
    let household_id = row[cols.household_id].trim();
    if country.is_empty() || household_id.is_empty() {
        return Err("empty country or household id".into());
    }
    let year = row[cols.year]
        .trim()
        .parse::<i32>()
        .map_err(|_| format!("cannot parse year {:?}", &row[cols.year]))?;
    Ok(PanelRecord {
        country: country.to_string(),
        year,
        household_id: household_id.to_string(),
        labor_income: parse_income(&row[cols.labor_income], schema)?,
        capital_income: parse_income(&row[cols.capital_income], schema)?,
    })
}

/// Reads CSV rows into records grouped by country-year. Malformed rows
/// (wrong width, unparseable fields, repeated household keys) are counted
/// and skipped; more than `schema.max_bad_fraction` of them is an error.
pub fn ingest_reader<R: Read>(input: R, schema: &Schema) -> Result<Ingested, PipelineError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .flexible(true)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| PipelineError::Schema(format!("cannot read header: {e}")))?
        .clone();
    let cols = locate(&headers, schema)?;
    let mut cells: BTreeMap<CellKey, Vec<PanelRecord>> = BTreeMap::new();
    let mut seen: HashSet<(String, i32, String)> = HashSet::new();
    let mut n_rows = 0;
    let mut n_bad = 0;
    let mut bad_examples = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(PipelineError::Io(e.to_string())),
            Err(e) => {
                n_rows += 1;
                n_bad += 1;
                if bad_examples.len() < MAX_BAD_EXAMPLES {
                    bad_examples.push(BadRow {
                        line,
                        reason: e.to_string(),
                    });
                }
                continue;
            }
        }
        n_rows += 1;
        let parsed = parse_row(&row, &cols, schema).and_then(|r| {
            let key = (r.country.clone(), r.year, r.household_id.clone());
            if seen.insert(key) {
                Ok(r)
            } else {
                Err(format!(
                    "duplicate household {} in {} {}",
                    r.household_id, r.country, r.year
                ))
            }
        });
        match parsed {
            Ok(r) => cells
                .entry(CellKey {
                    country: r.country.clone(),
                    year: r.year,
                })
                .or_default()
                .push(r),
            Err(reason) => {
                n_bad += 1;
                if bad_examples.len() < MAX_BAD_EXAMPLES {
                    bad_examples.push(BadRow { line, reason });
                }
            }
        }
    }
    if n_bad > 0 && n_bad as f64 > schema.max_bad_fraction * n_rows as f64 {
        return Err(PipelineError::TooManyBadRows {
            bad: n_bad,
            total: n_rows,
            max_fraction: schema.max_bad_fraction,
        });
    }
    if n_bad > 0 {
        log::warn!("skipped {n_bad} malformed rows of {n_rows}");
    }
    Ok(Ingested {
        cells,
        n_rows,
        n_bad,
        bad_examples,
    })
}

pub fn ingest(path: &Path, schema: &Schema) -> Result<Ingested, PipelineError> {
    let file = std::fs::File::open(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    ingest_reader(std::io::BufReader::new(file), schema)
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use income_tails::equality_test::{
    simulate_critical_value, CriticalValueEntry, CriticalValueTable, Provenance, DEFAULT_LEVEL,
    DEFAULT_T0,
};
use income_tails::format::sig6;
use income_tails::pipeline::{
    emit_reports, ingest, run_cells, run_model, run_sweep, CellOptions, Correlation, ModelConfig,
    Schema,
};
use income_tails::tail_stats::{DEFAULT_MIN_OBS, DEFAULT_TAIL_FRACTION};

/// Pareto tail estimation for labor and capital income, an equality test for
/// the two exponents, and the income fluctuation model behind them.
#[derive(Debug, Parser)]
#[command(name = "income-tails", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Share of positive observations used as the tail.
    #[arg(long, global = true, default_value_t = DEFAULT_TAIL_FRACTION)]
    tail_fraction: f64,
    /// Lower end of the inverse Hill path used by the test.
    #[arg(long, global = true, default_value_t = DEFAULT_T0)]
    t0: f64,
    /// Test level.
    #[arg(long, global = true, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    /// Positive capital income observations needed to test a cell.
    #[arg(long, global = true, default_value_t = DEFAULT_MIN_OBS)]
    nmin: usize,
    /// Random seed; overrides the config file's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Column-mapping file for input extracts.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Model config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate labor and capital exponents per country-year cell.
    Estimate(DataArgs),
    /// Estimate exponents and test their equality per cell.
    Test(TestArgs),
    /// Simulate a critical value and add it to a table file.
    SimulateCv(CvArgs),
    /// Solve and simulate the model described by --config.
    Model,
    /// Exponents over a range of promotion income growth rates.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Household CSV extract.
    data: PathBuf,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Critical value table (`t0 level value provenance` lines).
    #[arg(long)]
    cv_table: Option<PathBuf>,
    /// Test against all labor incomes instead of those of households with
    /// positive capital income.
    #[arg(long)]
    all_labor: bool,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Table to extend; written back to `<out-dir>/critical_values.txt`.
    #[arg(long)]
    cv_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0.02)]
    g_min: f64,
    #[arg(long, default_value_t = 0.1)]
    g_max: f64,
    #[arg(long, default_value_t = 17)]
    steps: usize,
}

fn read_table(path: Option<&Path>) -> Result<CriticalValueTable> {
    match path {
        None => Ok(CriticalValueTable::new()),
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            CriticalValueTable::read_from(BufReader::new(f))
                .with_context(|| format!("reading {}", p.display()))
        }
    }
}

fn run_data(common: &Common, data: &Path, opts: CellOptions, table: &CriticalValueTable) -> Result<()> {
    let schema = match &common.schema {
        Some(p) => Schema::read(p).with_context(|| format!("schema {}", p.display()))?,
        None => Schema::default(),
    };
    let ingested = ingest(data, &schema).with_context(|| format!("ingesting {}", data.display()))?;
    log::info!(
        "{} rows, {} malformed, {} cells",
        ingested.n_rows,
        ingested.n_bad,
        ingested.cells.len()
    );
    let reports = run_cells(&ingested.cells, &opts, table);
    let summary = emit_reports(&reports, &common.out_dir)?;
    let opt = |x: Option<f64>| x.map(sig6).unwrap_or_else(|| "NA".into());
    println!("cells: {} ({} tested, {} skipped)", summary.n_cells, summary.n_tested, summary.n_skipped);
    println!("median alpha_lab: {}", opt(summary.median_alpha_lab));
    println!("median alpha_cap: {}", opt(summary.median_alpha_cap));
    if opts.run_test {
        println!("rejection rate: {}", opt(summary.rejection_rate));
    }
    match summary.correlation {
        Correlation::Undefined { .. } => println!("correlation: undefined"),
        Correlation::Estimate { r, ci, .. } => match ci {
            Some((lo, hi)) => println!("correlation: {} [{}, {}]", sig6(r), sig6(lo), sig6(hi)),
            None => println!("correlation: {}", sig6(r)),
        },
    }
    println!("reports written to {}", common.out_dir.display());
    Ok(())
}

fn cell_options(common: &Common) -> CellOptions {
    CellOptions {
        tail_fraction: common.tail_fraction,
        t0: common.t0,
        level: common.level,
        n_min: common.nmin,
        ..CellOptions::default()
    }
}

fn load_config(common: &Common) -> Result<ModelConfig> {
    let mut cfg = match &common.config {
        Some(p) => ModelConfig::read(p).with_context(|| format!("config {}", p.display()))?,
        None => ModelConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = &cli.common;
    if !(common.tail_fraction > 0.0 && common.tail_fraction < 1.0) {
        bail!("--tail-fraction must lie in (0, 1)");
    }
    match &cli.command {
        Command::Estimate(args) => {
            let opts = CellOptions {
                run_test: false,
                ..cell_options(common)
            };
            run_data(common, &args.data, opts, &CriticalValueTable::new())
        }
        Command::Test(args) => {
            let table = read_table(args.cv_table.as_deref())?;
            if table.get(common.t0, common.level).is_none() {
                bail!(
                    "no critical value for t0 = {}, level = {}; generate one with simulate-cv",
                    common.t0,
                    common.level
                );
            }
            let opts = CellOptions {
                restrict_labor: !args.all_labor,
                ..cell_options(common)
            };
            run_data(common, &args.data.data, opts, &table)
        }
        Command::SimulateCv(args) => {
            let mut table = read_table(args.cv_table.as_deref())?;
            let seed = common.seed.unwrap_or(0);
            let value = simulate_critical_value(common.t0, common.level, args.paths, args.steps, seed)?;
            let changed = table.insert(CriticalValueEntry {
                t0: common.t0,
                level: common.level,
                value,
                provenance: Provenance::Simulated,
            });
            println!(
                "simulated critical value (t0 = {}, level = {}): {}",
                sig6(common.t0),
                sig6(common.level),
                sig6(value)
            );
            if !changed {
                println!("table keeps its published value {}", sig6(table.get(common.t0, common.level).unwrap()));
            }
            std::fs::create_dir_all(&common.out_dir)?;
            let path = common.out_dir.join("critical_values.txt");
            let mut f = BufWriter::new(File::create(&path)?);
            table.write_to(&mut f)?;
            f.flush()?;
            println!("table written to {}", path.display());
            Ok(())
        }
        Command::Model => {
            let cfg = load_config(common)?;
            let run = run_model(&cfg, &common.out_dir)?;
            println!("g = {}", sig6(run.g));
            println!("alpha_Y = {}", run.exact.alpha_income);
            println!("alpha_tilde = {}", run.exact.alpha_tilde);
            println!("alpha_wealth = {}", run.exact.alpha_wealth);
            println!("mpc = {}", sig6(run.exact.mpc));
            if let Some(sim) = &run.simulation {
                println!(
                    "simulated {} agents for {} periods",
                    sim.cross_section.n_agents(),
                    sim.cross_section.periods_elapsed
                );
            }
            println!("outputs written to {}", common.out_dir.display());
            Ok(())
        }
        Command::Sweep(args) => {
            let cfg = load_config(common)?;
            let sweep = run_sweep(&cfg.calibration, args.g_min, args.g_max, args.steps, &common.out_dir)?;
            for p in &sweep {
                println!("g = {}: alpha_Y = {}, alpha_tilde = {}", sig6(p.g), sig6(p.alpha_income), p.alpha_tilde);
            }
            Ok(())
        }
    }
}

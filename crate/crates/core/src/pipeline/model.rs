//! Config-driven model run: exponents, policy, simulated cross-section and an
//! income-growth sweep.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::KeyValues;
use super::{PipelineError, Stage};
use crate::exponent_theory::{
    asymptotic_mpc, check_existence, return_discount_moment, solve_wealth_exponent, sweep_growth,
    ExponentReport, SweepPoint,
};
use crate::format::sig6;
use crate::ifp_solver::{
    build_grid, euler_residuals, solve_policy, PolicySolution, SolverOptions, DEFAULT_GRID_COUNT,
    DEFAULT_GRID_MAX, DEFAULT_GRID_MEDIAN,
};
use crate::panel_sim::{simulate_stationary, tail_plot_data, SimOptions, StationaryRun, Variable};
use crate::shocks::Calibration;
use crate::tail_stats::hill_with_fraction;

/// Everything a model run needs. An empty config file gives the quarterly
/// calibration with a labor income exponent of 3.
///
/// Keys: `delta_t delta gamma eta mu sigma L alpha_Y g` (calibration),
/// `quad_nodes`, `grid_count grid_max grid_median`, `tol max_iter`,
/// `simulate n_agents burn_in seed newborn_wealth tail_fraction`,
/// `sweep_g_min sweep_g_max sweep_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub calibration: Calibration,
    pub quad_nodes: usize,
    pub grid_count: usize,
    pub grid_max: f64,
    pub grid_median: f64,
    pub solver: SolverOptions,
    pub simulate: bool,
    pub sim: SimOptions,
    pub sweep_g_min: f64,
    pub sweep_g_max: f64,
    pub sweep_steps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            calibration: Calibration::baseline(),
            quad_nodes: 7,
            grid_count: DEFAULT_GRID_COUNT,
            grid_max: DEFAULT_GRID_MAX,
            grid_median: DEFAULT_GRID_MEDIAN,
            solver: SolverOptions::default(),
            simulate: true,
            sim: SimOptions::default(),
            sweep_g_min: 0.02,
            sweep_g_max: 0.1,
            sweep_steps: 17,
        }
    }
}

impl ModelConfig {
    pub const KEYS: [&'static str; 24] = [
        "delta_t",
        "delta",
        "gamma",
        "eta",
        "mu",
        "sigma",
        "L",
        "alpha_Y",
        "g",
        "quad_nodes",
        "grid_count",
        "grid_max",
        "grid_median",
        "tol",
        "max_iter",
        "simulate",
        "n_agents",
        "burn_in",
        "seed",
        "newborn_wealth",
        "tail_fraction",
        "sweep_g_min",
        "sweep_g_max",
        "sweep_steps",
    ];

    pub fn from_key_values(kv: &KeyValues) -> Result<Self, PipelineError> {
        kv.reject_unknown(&Self::KEYS)?;
        let d = Self::default();
        let c = d.calibration;
        let calibration = Calibration {
            delta_t: kv.get_or("delta_t", c.delta_t)?,
            delta: kv.get_or("delta", c.delta)?,
            gamma: kv.get_or("gamma", c.gamma)?,
            eta: kv.get_or("eta", c.eta)?,
            mu: kv.get_or("mu", c.mu)?,
            sigma: kv.get_or("sigma", c.sigma)?,
            promotion_time: kv.get_or("L", c.promotion_time)?,
            alpha_y: kv.get_or("alpha_Y", c.alpha_y)?,
            g: kv.get("g")?,
        };
        calibration
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        let cfg = Self {
            calibration,
            quad_nodes: kv.get_or("quad_nodes", d.quad_nodes)?,
            grid_count: kv.get_or("grid_count", d.grid_count)?,
            grid_max: kv.get_or("grid_max", d.grid_max)?,
            grid_median: kv.get_or("grid_median", d.grid_median)?,
            solver: SolverOptions {
                tol: kv.get_or("tol", d.solver.tol)?,
                max_iter: kv.get_or("max_iter", d.solver.max_iter)?,
                fallback_max_iter: kv.get_or("max_iter", d.solver.fallback_max_iter)?,
            },
            simulate: kv.get_or("simulate", d.simulate)?,
            sim: SimOptions {
                n_agents: kv.get_or("n_agents", d.sim.n_agents)?,
                burn_in: kv.get_or("burn_in", d.sim.burn_in)?,
                seed: kv.get_or("seed", d.sim.seed)?,
                newborn_wealth: kv.get_or("newborn_wealth", d.sim.newborn_wealth)?,
                tail_fraction: kv.get_or("tail_fraction", d.sim.tail_fraction)?,
            },
            sweep_g_min: kv.get_or("sweep_g_min", d.sweep_g_min)?,
            sweep_g_max: kv.get_or("sweep_g_max", d.sweep_g_max)?,
            sweep_steps: kv.get_or("sweep_steps", d.sweep_steps)?,
        };
        if cfg.quad_nodes == 0 {
            return Err(PipelineError::InvalidConfig("quad_nodes must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        Self::from_key_values(&KeyValues::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    /// Promotion log growth used (configured or solved from `alpha_Y`).
    pub g: f64,
    /// Exponents under exact lognormal returns.
    pub exact: ExponentReport,
    /// Exponents of the discretized model that is solved and simulated.
    pub discrete: ExponentReport,
    pub policy: PolicySolution,
    pub simulation: Option<StationaryRun>,
    pub sweep: Vec<SweepPoint>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, PipelineError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| PipelineError::stage(Stage::Output, format!("{}: {e}", path.display())))
}

fn output<T>(r: std::io::Result<T>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::stage(Stage::Output, e))
}

pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &[SweepPoint]) -> std::io::Result<()> {
    writeln!(w, "g,alpha_income,alpha_tilde,alpha_wealth")?;
    for p in sweep {
        writeln!(
            w,
            "{},{},{},{}",
            sig6(p.g),
            sig6(p.alpha_income),
            p.alpha_tilde,
            p.alpha_wealth
        )?;
    }
    Ok(())
}

/// Exponents over a promotion-growth range, written to `sweep.csv`.
pub fn run_sweep(
    cal: &Calibration,
    g_min: f64,
    g_max: f64,
    steps: usize,
    out_dir: &Path,
) -> Result<Vec<SweepPoint>, PipelineError> {
    let sweep = sweep_growth(cal, g_min, g_max, steps).map_err(|e| PipelineError::stage(Stage::Theory, e))?;
    output(std::fs::create_dir_all(out_dir))?;
    let mut f = create(out_dir, "sweep.csv")?;
    output(write_sweep_csv(&mut f, &sweep))?;
    output(f.flush())?;
    Ok(sweep)
}

/// Runs theory, solver, simulation and sweep, writing `theory.txt`,
/// `policy.csv`, `cross_section.csv`, `simulation.txt`, `tail_<variable>.csv`
/// and `sweep.csv` into `out_dir`. Errors name the stage that failed.
pub fn run_model(cfg: &ModelConfig, out_dir: &Path) -> Result<ModelRun, PipelineError> {
    output(std::fs::create_dir_all(out_dir))?;
    let cal = &cfg.calibration;
    let theory = |e: &dyn std::fmt::Display| PipelineError::stage(Stage::Theory, e);

    cal.validate().map_err(|e| theory(&e))?;
    let g = cal.promotion_growth();
    if !(g > 0.0 && g.is_finite()) {
        return Err(theory(&format!("no positive promotion growth matches alpha_Y = {}", cal.alpha_y)));
    }
    let exact = solve_wealth_exponent(&cal.lognormal()).map_err(|e| theory(&e))?;
    let model = cal.with_growth(g).discretized(cfg.quad_nodes).map_err(|e| theory(&e))?;
    let discrete = solve_wealth_exponent(&model).map_err(|e| theory(&e))?;
    let existence = check_existence(&model);

    let solver = |e: &dyn std::fmt::Display| PipelineError::stage(Stage::Solver, e);
    let grid = build_grid(cfg.grid_count, cfg.grid_max, cfg.grid_median).map_err(|e| solver(&e))?;
    let policy = solve_policy(&model, &grid, &cfg.solver).map_err(|e| solver(&e))?;
    let worst_residual = euler_residuals(&policy, &model).into_iter().fold(0.0, f64::max);

    let mut f = create(out_dir, "theory.txt")?;
    let kv = [
        ("g", sig6(g)),
        ("alpha_Y", exact.alpha_income.to_string()),
        ("alpha_tilde", exact.alpha_tilde.to_string()),
        ("alpha_wealth", exact.alpha_wealth.to_string()),
        ("rho", sig6(exact.rho)),
        ("mpc", sig6(exact.mpc)),
        ("discrete_alpha_Y", discrete.alpha_income.to_string()),
        ("discrete_alpha_tilde", discrete.alpha_tilde.to_string()),
        ("discrete_rho", sig6(discrete.rho)),
        ("discrete_mpc", sig6(asymptotic_mpc(&model))),
        ("discounted_growth", sig6(existence.discounted_growth)),
        ("discounted_return", sig6(existence.discounted_return)),
        ("return_discount", sig6(return_discount_moment(&model))),
        ("uniqueness_condition", existence.holds.to_string()),
        ("solver_method", format!("{:?}", policy.method)),
        ("solver_iterations", policy.iterations.to_string()),
        ("solver_sup_change", sig6(policy.sup_change)),
        ("euler_residual_max", sig6(worst_residual)),
        ("top_slope", sig6(policy.top_slope())),
    ];
    for (k, v) in kv {
        output(writeln!(f, "{k} = {v}"))?;
    }
    output(f.flush())?;

    let mut f = create(out_dir, "policy.csv")?;
    policy.write_csv(&mut f).map_err(|e| PipelineError::stage(Stage::Output, e))?;
    output(f.flush())?;

    let simulation = if cfg.simulate {
        let sim = |e: &dyn std::fmt::Display| PipelineError::stage(Stage::Simulation, e);
        let run = simulate_stationary(&model, &policy, &cfg.sim).map_err(|e| sim(&e))?;
        let cs = &run.cross_section;
        let mut f = create(out_dir, "cross_section.csv")?;
        cs.write_csv(&mut f).map_err(|e| PipelineError::stage(Stage::Output, e))?;
        output(f.flush())?;

        let mut f = create(out_dir, "simulation.txt")?;
        output(writeln!(f, "n_agents = {}", cs.n_agents()))?;
        output(writeln!(f, "periods = {}", cs.periods_elapsed))?;
        output(writeln!(f, "seed = {}", cs.seed))?;
        output(writeln!(f, "mean_age = {}", sig6(cs.mean_age())))?;
        for v in Variable::ALL {
            let est = cs
                .tail_sample(v)
                .and_then(|s| hill_with_fraction(&s, cfg.sim.tail_fraction));
            match est {
                Ok(h) => {
                    output(writeln!(f, "hill_{} = {}", v.name(), sig6(h.alpha)))?;
                    output(writeln!(f, "hill_se_{} = {}", v.name(), sig6(h.se)))?;
                }
                Err(_) => output(writeln!(f, "hill_{} = NA", v.name()))?,
            }
        }
        if let Some(s) = run.stationarity {
            output(writeln!(f, "stationary = {}", s.stationary))?;
        }
        output(f.flush())?;

        for v in Variable::ALL {
            // Capital income can be identically zero in degenerate models.
            let Ok(points) = tail_plot_data(cs, v) else { continue };
            let mut f = create(out_dir, &format!("tail_{}.csv", v.name()))?;
            output(writeln!(f, "log_size,log_tail_prob"))?;
            for (x, y) in points {
                output(writeln!(f, "{},{}", sig6(x), sig6(y)))?;
            }
            output(f.flush())?;
        }
        Some(run)
    } else {
        None
    };

    let sweep = run_sweep(cal, cfg.sweep_g_min, cfg.sweep_g_max, cfg.sweep_steps, out_dir)?;
    Ok(ModelRun {
        g,
        exact,
        discrete,
        policy,
        simulation,
        sweep,
    })
}

//! Perpetual-youth panel of households following a solved consumption policy.
//!
//! Each period every household survives with probability `v`. Survivors draw
//! `(R, G)` from the shock model and update
//!
//! ```text
//! Y'  = G Y
//! a~' = (R/G)(a~ - c~(a~)) + 1
//! capital income = max(R - 1, 0) Y (a~ - c~(a~))
//! ```
//!
//! and the dead are replaced by newborns with `Y = 1`, `a~ = a~_0`, age 0.
//! Every household owns a random stream keyed by `(seed, agent id)`, so runs
//! are reproducible whatever the thread count.

use std::io::Write;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::format::sig6;
use crate::ifp_solver::PolicySolution;
use crate::shocks::{ShockModel, ShockProcess};
use crate::tail_stats::{hill_with_fraction, TailError, TailSample, DEFAULT_TAIL_FRACTION};

/// Smallest population accepted by [`simulate_stationary`].
pub const MIN_AGENTS: usize = 1_000;
pub const DEFAULT_AGENTS: usize = 100_000;
pub const DEFAULT_BURN_IN: usize = 2_000;
/// Most points returned by [`tail_plot_data`].
pub const MAX_PLOT_POINTS: usize = 2_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("need at least {MIN_AGENTS} agents, got {0}")]
    TooFewAgents(usize),
    #[error("policy did not converge; refusing to simulate")]
    PolicyNotConverged,
    #[error("newborn normalized wealth must be positive, got {0}")]
    InvalidNewbornWealth(f64),
    #[error("cross-section export: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub income: f64,
    pub norm_wealth: f64,
    pub age: u32,
}

impl AgentState {
    fn newborn(norm_wealth: f64) -> Self {
        Self {
            income: 1.0,
            norm_wealth,
            age: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Agent {
    rng: ChaCha8Rng,
    state: AgentState,
    capital_income: f64,
}

/// What happened to one household in one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub agent_id: usize,
    pub before: AgentState,
    /// Index into the model's shock states; `None` if the household died.
    pub shock: Option<usize>,
    pub consumption: f64,
    pub after: AgentState,
    pub capital_income: f64,
}

/// Per-period draw tables derived from the model.
struct Stepper<'a> {
    model: &'a ShockModel,
    policy: &'a PolicySolution,
    states: WeightedIndex<f64>,
    newborn_wealth: f64,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a ShockModel, policy: &'a PolicySolution, newborn_wealth: f64) -> Self {
        let weights = model.states().iter().map(|s| s.prob);
        Self {
            model,
            policy,
            states: WeightedIndex::new(weights).expect("model probabilities are valid"),
            newborn_wealth,
        }
    }

    fn advance(&self, agent_id: usize, agent: &mut Agent) -> Transition {
        let before = agent.state;
        if !agent.rng.random_bool(self.model.survival()) {
            agent.state = AgentState::newborn(self.newborn_wealth);
            agent.capital_income = 0.0;
            return Transition {
                agent_id,
                before,
                shock: None,
                consumption: f64::NAN,
                after: agent.state,
                capital_income: 0.0,
            };
        }
        let j = self.states.sample(&mut agent.rng);
        let shock = self.model.states()[j];
        let c = self.policy.consumption_at(before.norm_wealth);
        let savings = before.norm_wealth - c;
        agent.state = AgentState {
            income: shock.growth * before.income,
            norm_wealth: shock.ret / shock.growth * savings + 1.0,
            age: before.age + 1,
        };
        agent.capital_income = (shock.ret - 1.0).max(0.0) * before.income * savings;
        Transition {
            agent_id,
            before,
            shock: Some(j),
            consumption: c,
            after: agent.state,
            capital_income: agent.capital_income,
        }
    }
}

/// A population of households, advanced one period at a time.
#[derive(Debug, Clone)]
pub struct Panel {
    agents: Vec<Agent>,
    periods: usize,
    seed: u64,
    newborn_wealth: f64,
}

impl Panel {
    /// `n_agents` newborns, each with its own stream of `seed`.
    pub fn new(n_agents: usize, seed: u64, newborn_wealth: f64) -> Self {
        let agents = (0..n_agents)
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(id as u64);
                Agent {
                    rng,
                    state: AgentState::newborn(newborn_wealth),
                    capital_income: 0.0,
                }
            })
            .collect();
        Self {
            agents,
            periods: 0,
            seed,
            newborn_wealth,
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn periods_elapsed(&self) -> usize {
        self.periods
    }

    pub fn states(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().map(|a| &a.state)
    }

    /// Overwrites one household's state; for constructing test scenarios.
    pub fn set_state(&mut self, agent_id: usize, state: AgentState) {
        self.agents[agent_id].state = state;
    }

    pub fn step(&mut self, model: &ShockModel, policy: &PolicySolution) {
        let stepper = Stepper::new(model, policy, self.newborn_wealth);
        self.agents
            .par_iter_mut()
            .enumerate()
            .for_each(|(id, a)| {
                stepper.advance(id, a);
            });
        self.periods += 1;
    }

    /// Like [`Panel::step`], also returning every household's transition.
    pub fn step_with_log(&mut self, model: &ShockModel, policy: &PolicySolution) -> Vec<Transition> {
        let stepper = Stepper::new(model, policy, self.newborn_wealth);
        let log = self
            .agents
            .par_iter_mut()
            .enumerate()
            .map(|(id, a)| stepper.advance(id, a))
            .collect();
        self.periods += 1;
        log
    }

    pub fn snapshot(&self) -> CrossSection {
        let records = self
            .agents
            .iter()
            .enumerate()
            .map(|(id, a)| HouseholdRecord {
                agent_id: id,
                age: a.state.age,
                income: a.state.income,
                norm_wealth: a.state.norm_wealth,
                wealth: a.state.income * a.state.norm_wealth,
                capital_income: a.capital_income,
            })
            .collect();
        CrossSection {
            records,
            periods_elapsed: self.periods,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseholdRecord {
    pub agent_id: usize,
    pub age: u32,
    pub income: f64,
    pub norm_wealth: f64,
    pub wealth: f64,
    pub capital_income: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Income,
    NormWealth,
    Wealth,
    CapitalIncome,
}

impl Variable {
    pub const ALL: [Variable; 4] = [
        Variable::Income,
        Variable::NormWealth,
        Variable::Wealth,
        Variable::CapitalIncome,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Income => "income",
            Variable::NormWealth => "norm_wealth",
            Variable::Wealth => "wealth",
            Variable::CapitalIncome => "capital_income",
        }
    }

    fn of(self, r: &HouseholdRecord) -> f64 {
        match self {
            Variable::Income => r.income,
            Variable::NormWealth => r.norm_wealth,
            Variable::Wealth => r.wealth,
            Variable::CapitalIncome => r.capital_income,
        }
    }
}

impl FromStr for Variable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variable {s:?}"))
    }
}

/// Households at one simulation date.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub records: Vec<HouseholdRecord>,
    pub periods_elapsed: usize,
    pub seed: u64,
}

impl CrossSection {
    pub fn n_agents(&self) -> usize {
        self.records.len()
    }

    pub fn values(&self, variable: Variable) -> Vec<f64> {
        self.records.iter().map(|r| variable.of(r)).collect()
    }

    /// Positive values of `variable`, sorted for tail estimation.
    pub fn tail_sample(&self, variable: Variable) -> Result<TailSample, TailError> {
        TailSample::clean(self.records.iter().map(|r| Some(variable.of(r))))
    }

    pub fn mean_age(&self) -> f64 {
        self.records.iter().map(|r| r.age as f64).sum::<f64>() / self.n_agents() as f64
    }

    /// Writes `agent_id,age,income,wealth,capital_income` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        let io = |e: std::io::Error| SimError::Io(e.to_string());
        writeln!(w, "agent_id,age,income,wealth,capital_income").map_err(io)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.agent_id,
                r.age,
                sig6(r.income),
                sig6(r.wealth),
                sig6(r.capital_income)
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub n_agents: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub newborn_wealth: f64,
    /// Tail share used by the stationarity diagnostic.
    pub tail_fraction: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            n_agents: DEFAULT_AGENTS,
            burn_in: DEFAULT_BURN_IN,
            seed: 0,
            newborn_wealth: 1.0,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }
}

/// Income Hill exponents halfway through and at the end of the burn-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityCheck {
    pub alpha_mid: f64,
    pub se_mid: f64,
    pub alpha_end: f64,
    pub se_end: f64,
    /// `|alpha_end - alpha_mid| < 2 sqrt(se_mid^2 + se_end^2)`.
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryRun {
    pub cross_section: CrossSection,
    /// `None` when an income Hill estimate could not be formed.
    pub stationarity: Option<StationarityCheck>,
}

fn income_hill(cs: &CrossSection, fraction: f64) -> Option<(f64, f64)> {
    let sample = cs.tail_sample(Variable::Income).ok()?;
    let h = hill_with_fraction(&sample, fraction).ok()?;
    Some((h.alpha, h.se))
}

/// Simulates `burn_in` periods from an all-newborn population and returns
/// the final cross-section. A failed stationarity diagnostic is logged as a
/// warning, not an error.
pub fn simulate_stationary(
    model: &ShockModel,
    policy: &PolicySolution,
    opts: &SimOptions,
) -> Result<StationaryRun, SimError> {
    if opts.n_agents < MIN_AGENTS {
        return Err(SimError::TooFewAgents(opts.n_agents));
    }
    if !policy.converged {
        return Err(SimError::PolicyNotConverged);
    }
    if !(opts.newborn_wealth > 0.0 && opts.newborn_wealth.is_finite()) {
        return Err(SimError::InvalidNewbornWealth(opts.newborn_wealth));
    }
    let mut panel = Panel::new(opts.n_agents, opts.seed, opts.newborn_wealth);
    let half = opts.burn_in / 2;
    let mut mid = None;
    for t in 0..opts.burn_in {
        if t == half {
            mid = income_hill(&panel.snapshot(), opts.tail_fraction);
        }
        panel.step(model, policy);
    }
    let cross_section = panel.snapshot();
    let stationarity = match (mid, income_hill(&cross_section, opts.tail_fraction)) {
        (Some((alpha_mid, se_mid)), Some((alpha_end, se_end))) => {
            let joint = (se_mid * se_mid + se_end * se_end).sqrt();
            Some(StationarityCheck {
                alpha_mid,
                se_mid,
                alpha_end,
                se_end,
                stationary: (alpha_end - alpha_mid).abs() < 2.0 * joint,
            })
        }
        _ => None,
    };
    match stationarity {
        Some(s) if !s.stationary => log::warn!(
            "cross-section may not be stationary: income exponent {} at period {half}, {} at {}",
            s.alpha_mid,
            s.alpha_end,
            opts.burn_in
        ),
        None => log::warn!("stationarity diagnostic unavailable (income tail too thin)"),
        _ => {}
    }
    Ok(StationaryRun {
        cross_section,
        stationarity,
    })
}

/// Empirical tail points `(log X_(i), log(i/N))` over the positive values of
/// `variable`, thinned to at most [`MAX_PLOT_POINTS`] log-spaced ranks. Runs
/// of equal values are reduced to their first and last point.
pub fn tail_plot_data(cs: &CrossSection, variable: Variable) -> Result<Vec<(f64, f64)>, TailError> {
    let sample = cs.tail_sample(variable)?;
    Ok(thinned_tail_points(sample.values()))
}

fn thinned_tail_points(desc: &[f64]) -> Vec<(f64, f64)> {
    let n = desc.len();
    let log_n = (n as f64).ln();
    let mut ranks: Vec<usize> = if n <= MAX_PLOT_POINTS {
        (1..=n).collect()
    } else {
        let step = log_n / (MAX_PLOT_POINTS - 1) as f64;
        let mut r: Vec<usize> = (0..MAX_PLOT_POINTS)
            .map(|j| ((j as f64 * step).exp().round() as usize).clamp(1, n))
            .collect();
        r.dedup();
        r
    };
    if *ranks.last().unwrap() != n {
        ranks.push(n);
    }
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ranks.len());
    let mut run_start = 0;
    for (idx, &i) in ranks.iter().enumerate() {
        let x = desc[i - 1].ln();
        let point = (x, (i as f64).ln() - log_n);
        let continues = idx > 0 && desc[ranks[idx - 1] - 1] == desc[i - 1];
        if !continues {
            run_start = out.len();
            out.push(point);
        } else if out.len() - run_start == 1 {
            out.push(point);
        } else {
            *out.last_mut().unwrap() = point;
        }
    }
    out
}

/// Least-squares slope of `log_tail_prob` on `log_size` over points with
/// `log_tail_prob >= min_log_prob`; `None` with fewer than two distinct sizes.
pub fn loglog_slope(points: &[(f64, f64)], min_log_prob: f64) -> Option<f64> {
    let sel: Vec<&(f64, f64)> = points.iter().filter(|p| p.1 >= min_log_prob).collect();
    let n = sel.len() as f64;
    if sel.len() < 2 {
        return None;
    }
    let mx = sel.iter().map(|p| p.0).sum::<f64>() / n;
    let my = sel.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = sel.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = sel.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

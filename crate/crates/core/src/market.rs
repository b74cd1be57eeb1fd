//! End-to-end clearing runs: robust, deterministic and traditional schemes,
//! sensitivity sweeps and Monte-Carlo robustness checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ccg::{run_ccg, CcgError, CcgLimits, CcgLog};
use crate::model::{
    build_bids, compute_shift_factors, NetworkError, ShiftFactors, SystemCase, DEFAULT_SEGMENTS, SLACK_BUS,
};
use crate::optim::Solver;
use crate::pricing::{build_rsced, extract_prices, solve_rsced, PriceSet, PricingError};
use crate::scuc::{line_capacities, MasterOptions, RobustSchedule};
use crate::settlement::{settle, traditional_prices, traditional_requirement, SettlementError, SettlementReport};
use crate::uncertainty::{redispatch_violation, BudgetRule, Grid, Scenario, UncertaintyError, UncertaintySet};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ccg(#[from] CcgError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Settlement(#[from] SettlementError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Robust,
    Traditional,
    Deterministic,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "robust" => Ok(Mode::Robust),
            "traditional" => Ok(Mode::Traditional),
            "deterministic" => Ok(Mode::Deterministic),
            _ => Err(format!(
                "unknown mode `{s}` (expected robust, traditional or deterministic)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub bus_budget: f64,
    pub system_budget: f64,
    pub mode: Mode,
    /// Enforce transmission limits (robust and deterministic modes).
    pub lines: bool,
    pub storage: bool,
    pub rule: BudgetRule,
    pub limits: CcgLimits,
    pub segments: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bus_budget: 1.0,
            system_budget: 2.0,
            mode: Mode::Robust,
            lines: true,
            storage: false,
            rule: BudgetRule::Integral,
            limits: CcgLimits::default(),
            segments: DEFAULT_SEGMENTS,
        }
    }
}

impl RunConfig {
    pub fn robust(bus_budget: f64, system_budget: f64) -> Self {
        Self {
            bus_budget,
            system_budget,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if !(self.bus_budget >= 0.0) || !(self.system_budget >= 0.0) {
            return Err(MarketError::Config(format!(
                "uncertainty levels must be nonnegative (lambda {}, lambda-delta {})",
                self.bus_budget, self.system_budget
            )));
        }
        if self.limits.max_iterations == 0 {
            return Err(MarketError::Config("max iterations must be at least 1".into()));
        }
        if self.segments == 0 {
            return Err(MarketError::Config("bid curves need at least one segment".into()));
        }
        Ok(())
    }

    /// Budgets actually applied; deterministic runs ignore uncertainty.
    pub fn budgets(&self) -> (f64, f64) {
        match self.mode {
            Mode::Deterministic => (0.0, 0.0),
            _ => (self.bus_budget, self.system_budget),
        }
    }
}

/// Everything a clearing run produces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarketRun {
    pub config: RunConfig,
    pub cost: f64,
    pub schedule: RobustSchedule,
    pub prices: PriceSet,
    pub pool: Vec<Scenario>,
    pub log: CcgLog,
    pub settlement: SettlementReport,
    pub set: UncertaintySet,
    /// Pricing LP objective, equal to `cost` when commitment costs carry over.
    pub rsced_cost: f64,
}

pub fn shift_factors(case: &SystemCase) -> Result<ShiftFactors, MarketError> {
    Ok(compute_shift_factors(&case.lines, case.buses, SLACK_BUS)?)
}

pub fn clear(case: &SystemCase, config: &RunConfig, solver: &dyn Solver) -> Result<MarketRun, MarketError> {
    config.validate()?;
    let sf = shift_factors(case)?;
    let bids = build_bids(&case.units, config.segments);
    let (lam, ld) = config.budgets();
    let set = UncertaintySet::from_case(case, lam, ld, config.rule);

    if config.mode == Mode::Traditional {
        let req = traditional_requirement(&set);
        let tp = traditional_prices(case, &bids, &req, solver)?;
        let nb = case.buses;
        let prices = PriceSet {
            lmp: vec![tp.lmp.clone(); nb],
            scenario_price: Vec::new(),
            ump_up: vec![tp.reserve_up.clone(); nb],
            ump_down: vec![tp.reserve_down.clone(); nb],
            k_up: vec![vec![Vec::new(); case.horizon]; nb],
            k_down: vec![vec![Vec::new(); case.horizon]; nb],
            opportunity_up: tp.opportunity_up.clone(),
            opportunity_down: tp.opportunity_down.clone(),
            mu_plus: Vec::new(),
            mu_minus: Vec::new(),
            eta_plus: Vec::new(),
            eta_minus: Vec::new(),
            beta_up: Vec::new(),
            beta_down: Vec::new(),
            energy: tp.lmp.clone(),
        };
        let settlement = settle(case, &set, &tp.schedule, &prices);
        return Ok(MarketRun {
            config: config.clone(),
            cost: tp.cost,
            rsced_cost: tp.cost,
            schedule: tp.schedule,
            prices,
            pool: Vec::new(),
            log: CcgLog::default(),
            settlement,
            set,
        });
    }

    let opts = MasterOptions {
        lines: config.lines,
        storage: config.storage,
        ..MasterOptions::default()
    };
    let out = run_ccg(case, &bids, &sf, &set, &opts, &config.limits, solver)?;
    let mm = build_rsced(case, &bids, Some(&sf), &out.schedule.commitment, &out.pool, &opts);
    let r = solve_rsced(&mm, solver)?;
    let schedule = mm.schedule(case, Some(&sf), &r);
    let prices = extract_prices(case, &mm, &r, Some(&sf))?;
    let settlement = settle(case, &set, &schedule, &prices);
    Ok(MarketRun {
        config: config.clone(),
        cost: out.solution.objective,
        rsced_cost: r.objective,
        schedule,
        prices,
        pool: out.pool,
        log: out.log,
        settlement,
        set,
    })
}

/// One cell of a sensitivity sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bus_budget: f64,
    pub system_budget: f64,
    pub cost: Option<f64>,
    pub uncertainty_charges: Option<f64>,
    pub reserve_credits: Option<f64>,
    pub residue: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Costs are nondecreasing in each budget with the other held fixed.
    pub monotone: bool,
}

/// Clears every `(lambda, lambda_delta)` cell in parallel; rows come back
/// in grid order with `lambda_delta` outermost.
pub fn sweep(
    case: &SystemCase,
    base: &RunConfig,
    bus_budgets: &[f64],
    system_budgets: &[f64],
    solver: &dyn Solver,
) -> Result<Sweep, MarketError> {
    if bus_budgets.is_empty() || system_budgets.is_empty() {
        return Err(MarketError::Config("sweep grids must be nonempty".into()));
    }
    let cells: Vec<(f64, f64)> = system_budgets
        .iter()
        .flat_map(|&ld| bus_budgets.iter().map(move |&l| (l, ld)))
        .collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(l, ld)| {
            let cfg = RunConfig {
                bus_budget: l,
                system_budget: ld,
                ..base.clone()
            };
            match clear(case, &cfg, solver) {
                Ok(run) => SweepRow {
                    bus_budget: l,
                    system_budget: ld,
                    cost: Some(run.cost),
                    uncertainty_charges: Some(run.settlement.total_uncertainty()),
                    reserve_credits: Some(run.settlement.total_reserve()),
                    residue: Some(run.settlement.total_residue()),
                    iterations: Some(run.log.iterations()),
                    error: None,
                },
                Err(e) => SweepRow {
                    bus_budget: l,
                    system_budget: ld,
                    cost: None,
                    uncertainty_charges: None,
                    reserve_credits: None,
                    residue: None,
                    iterations: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let monotone = is_monotone(&rows, bus_budgets, system_budgets);
    Ok(Sweep { rows, monotone })
}

fn is_monotone(rows: &[SweepRow], lams: &[f64], lds: &[f64]) -> bool {
    let tol = 1e-6;
    let cost = |l: f64, ld: f64| {
        rows.iter()
            .find(|r| r.bus_budget == l && r.system_budget == ld)
            .and_then(|r| r.cost)
    };
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (lams, lds) = (sorted(lams), sorted(lds));
    let chain = |xs: Vec<Option<f64>>| {
        xs.windows(2).all(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => b >= a - tol,
            _ => true,
        })
    };
    lds.iter().all(|&ld| chain(lams.iter().map(|&l| cost(l, ld)).collect()))
        && lams.iter().all(|&l| chain(lds.iter().map(|&ld| cost(l, ld)).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub samples: usize,
    pub max_violation: f64,
    /// `(sample, hour)` pairs needing slack.
    pub failures: Vec<(usize, usize)>,
}

/// Samples full-horizon members of the set and checks zero-slack redispatch.
pub fn monte_carlo(
    case: &SystemCase,
    run: &MarketRun,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloReport, MarketError> {
    let sf = shift_factors(case)?;
    let caps = line_capacities(case);
    let grid = Grid {
        sf: run.config.lines.then_some(&sf),
        capacity: &caps,
    };
    let recourse = run.schedule.recourse_all(case);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<Vec<f64>>> = (0..samples)
        .map(|_| (0..case.horizon).map(|t| run.set.sample(t, &mut rng)).collect())
        .collect();
    let results: Vec<Vec<f64>> = draws
        .par_iter()
        .map(|d| {
            d.iter()
                .enumerate()
                .map(|(t, eps)| redispatch_violation(&recourse[t], grid, eps))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut rep = MonteCarloReport {
        samples,
        max_violation: 0.0,
        failures: Vec::new(),
    };
    for (s, hours) in results.iter().enumerate() {
        for (t, &v) in hours.iter().enumerate() {
            rep.max_violation = rep.max_violation.max(v);
            if v > run.config.limits.tol {
                rep.failures.push((s, t));
            }
        }
    }
    Ok(rep)
}

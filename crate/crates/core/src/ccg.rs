//! Column-and-constraint generation: alternate master solves and per-hour
//! worst-case checks until the schedule survives every vertex.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PiecewiseBid, ShiftFactors, SystemCase};
use crate::optim::{SolveResult, Solver};
use crate::scuc::{line_capacities, solve_master, MasterModel, MasterOptions, RobustSchedule, ScucError};
use crate::uncertainty::{worst_case_all, Grid, Scenario, UncertaintyError, UncertaintySet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcgLimits {
    pub max_iterations: usize,
    /// Violation (MW) at which the schedule counts as robust.
    pub tol: f64,
}

impl Default for CcgLimits {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcgRecord {
    pub master_cost: f64,
    pub max_violation: f64,
    /// 0-based hour of the largest violation, if any hour violates.
    pub worst_hour: Option<usize>,
    /// Pool index of the scenario added after this round.
    pub added: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CcgLog {
    pub records: Vec<CcgRecord>,
}

impl CcgLog {
    /// Number of scenarios generated, which is how convergence is counted.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.added.is_some()).count()
    }
}

#[derive(Debug, Error)]
pub enum CcgError {
    #[error("no robust schedule after {} iterations (max violation {:.6} MW)", log.iterations(), log.records.last().map_or(f64::NAN, |r| r.max_violation))]
    IterationLimit { schedule: Box<RobustSchedule>, log: CcgLog },
    #[error("worst-case scenario repeats a pooled one (max violation {violation:.6} MW)")]
    Stalled { violation: f64 },
    #[error(transparent)]
    Master(#[from] ScucError),
    #[error(transparent)]
    Subproblem(#[from] UncertaintyError),
}

/// Result of a converged run. `master` and `solution` belong to the final solve.
#[derive(Clone, Debug)]
pub struct CcgOutcome {
    pub schedule: RobustSchedule,
    pub pool: Vec<Scenario>,
    pub log: CcgLog,
    pub master: MasterModel,
    pub solution: SolveResult,
}

pub fn run_ccg(
    case: &SystemCase,
    bids: &[PiecewiseBid],
    sf: &ShiftFactors,
    set: &UncertaintySet,
    opts: &MasterOptions,
    limits: &CcgLimits,
    solver: &dyn Solver,
) -> Result<CcgOutcome, CcgError> {
    let caps = line_capacities(case);
    let grid = Grid {
        sf: opts.lines.then_some(sf),
        capacity: &caps,
    };
    let mut pool: Vec<Scenario> = Vec::new();
    let mut log = CcgLog::default();
    loop {
        let (master, solution, schedule) = solve_master(case, bids, Some(sf), &pool, opts, solver)?;
        let worst = worst_case_all(set, &schedule.recourse_all(case), grid)?;
        let (hour, max_violation) = worst
            .iter()
            .enumerate()
            .map(|(t, w)| (t, w.1))
            .fold((0, 0.0), |acc, (t, v)| if v > acc.1 { (t, v) } else { acc });
        let mut record = CcgRecord {
            master_cost: solution.objective,
            max_violation,
            worst_hour: (max_violation > limits.tol).then_some(hour),
            added: None,
        };
        if max_violation <= limits.tol {
            log.records.push(record);
            return Ok(CcgOutcome {
                schedule,
                pool,
                log,
                master,
                solution,
            });
        }
        if log.iterations() >= limits.max_iterations {
            log.records.push(record);
            return Err(CcgError::IterationLimit {
                schedule: Box::new(schedule),
                log,
            });
        }
        let nb = case.buses;
        let mut values = vec![vec![0.0; case.horizon]; nb];
        for (t, (v, _)) in worst.iter().enumerate() {
            for b in 0..nb {
                values[b][t] = v[b];
            }
        }
        if pool.iter().any(|s| s.values == values) {
            return Err(CcgError::Stalled {
                violation: max_violation,
            });
        }
        record.added = Some(pool.len());
        log.records.push(record);
        pool.push(Scenario {
            k: pool.len() + 1,
            values,
        });
    }
}

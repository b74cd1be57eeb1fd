//! Budgeted nodal uncertainty: `|eps_m| <= L * ub_m` per bus and
//! `sum |eps_m| / ub_m <= LD` per hour. Positive deviations are extra demand.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ShiftFactors, SystemCase};
use crate::optim::{solve_lp, LinearModel, OptimError, Sense, Status};

pub const DEFAULT_VERTEX_CAP: usize = 15;
/// Violation (MW) at or below which an hour counts as robust.
pub const VIOLATION_TOL: f64 = 1e-6;
// Violations closer than this are treated as ties.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error(
        "{buses} uncertain buses exceed the vertex enumeration cap of {cap}; use a mixed-integer subproblem instead"
    )]
    TooManyBuses { buses: usize, cap: usize },
    #[error("redispatch LP failed: {0}")]
    Lp(#[from] OptimError),
}

/// How the system budget limits the number of deviating buses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BudgetRule {
    /// Exact polytope: one bus may take a fractional share of the residual budget.
    Continuous,
    /// Budget counts whole buses: at most `floor(LD / L)` buses deviate, each by `L * ub`.
    #[default]
    Integral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    /// `bounds[bus][t]`
    pub bounds: Vec<Vec<f64>>,
    pub bus_budget: f64,
    pub system_budget: f64,
    pub rule: BudgetRule,
    pub vertex_cap: usize,
}

/// A full-horizon deviation pattern, `values[bus][t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub k: usize,
    pub values: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn at(&self, t: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[t]).collect()
    }
}

/// Flexibility available for one hour of redispatch.
#[derive(Clone, Debug, PartialEq)]
pub struct HourRecourse {
    pub loads: Vec<f64>,
    /// `(bus, lowest injection, highest injection)` per resource.
    pub resources: Vec<(usize, f64, f64)>,
}

/// Transmission limits seen by redispatch; `None` drops line constraints.
#[derive(Clone, Copy, Debug)]
pub struct Grid<'a> {
    pub sf: Option<&'a ShiftFactors>,
    pub capacity: &'a [f64],
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

impl UncertaintySet {
    pub fn new(bounds: Vec<Vec<f64>>, bus_budget: f64, system_budget: f64, rule: BudgetRule) -> Self {
        Self {
            bounds,
            bus_budget,
            system_budget,
            rule,
            vertex_cap: DEFAULT_VERTEX_CAP,
        }
    }

    pub fn from_case(case: &SystemCase, bus_budget: f64, system_budget: f64, rule: BudgetRule) -> Self {
        Self::new(case.uncertainty.clone(), bus_budget, system_budget, rule)
    }

    pub fn buses(&self) -> usize {
        self.bounds.len()
    }

    pub fn horizon(&self) -> usize {
        self.bounds.first().map_or(0, Vec::len)
    }

    pub fn bound(&self, bus: usize, t: usize) -> f64 {
        self.bounds[bus][t]
    }

    pub fn uncertain_buses(&self, t: usize) -> Vec<usize> {
        (0..self.buses()).filter(|&m| self.bounds[m][t] > 0.0).collect()
    }

    /// System budget after applying the budget rule.
    pub fn effective_system_budget(&self) -> f64 {
        match self.rule {
            BudgetRule::Continuous => self.system_budget,
            BudgetRule::Integral => {
                if self.bus_budget <= 0.0 {
                    0.0
                } else {
                    self.bus_budget * (self.system_budget / self.bus_budget + 1e-9).floor()
                }
            }
        }
    }

    /// Membership in the hour-`t` polytope under the budget rule.
    pub fn contains(&self, eps: &[f64], t: usize) -> bool {
        let tol = 1e-9;
        let mut used = 0.0;
        for (m, &e) in eps.iter().enumerate() {
            let ub = self.bounds[m][t];
            if ub <= 0.0 {
                if e.abs() > tol {
                    return false;
                }
                continue;
            }
            if e.abs() > self.bus_budget * ub + tol {
                return false;
            }
            used += e.abs() / ub;
        }
        used <= self.effective_system_budget() + tol
    }

    /// Extreme points of the hour-`t` polytope under the budget rule, sorted
    /// lexicographically. Each vertex is indexed by bus.
    pub fn enumerate_vertices(&self, t: usize) -> Result<Vec<Vec<f64>>, UncertaintyError> {
        let idx = self.uncertain_buses(t);
        let m = idx.len();
        if m > self.vertex_cap {
            return Err(UncertaintyError::TooManyBuses {
                buses: m,
                cap: self.vertex_cap,
            });
        }
        let lam = self.bus_budget;
        let budget = self.effective_system_budget();
        let zero = vec![0.0; self.buses()];
        if m == 0 || lam <= 0.0 || budget <= 0.0 {
            return Ok(vec![zero]);
        }
        // Normalized magnitudes z in [0, lam]; full count and optional fractional share.
        let mut patterns: Vec<Vec<f64>> = Vec::new();
        let slots = lam * m as f64;
        if slots <= budget + 1e-12 {
            patterns.push(vec![lam; m]);
        } else {
            let full = ((budget / lam) + 1e-12).floor() as usize;
            let resid = budget - full as f64 * lam;
            let frac = resid > 1e-12 && resid < lam - 1e-12;
            for mask in 0u32..(1 << m) {
                if mask.count_ones() as usize != full {
                    continue;
                }
                if frac {
                    for j in (0..m).filter(|j| mask & (1 << j) == 0) {
                        let mut z = vec![0.0; m];
                        for (i, zi) in z.iter_mut().enumerate() {
                            if mask & (1 << i) != 0 {
                                *zi = lam;
                            }
                        }
                        z[j] = resid;
                        patterns.push(z);
                    }
                } else {
                    let z = (0..m).map(|i| if mask & (1 << i) != 0 { lam } else { 0.0 }).collect();
                    patterns.push(z);
                }
            }
        }
        let mut out = Vec::new();
        for z in patterns {
            let nz: Vec<usize> = (0..m).filter(|&i| z[i] > 0.0).collect();
            for signs in 0u32..(1 << nz.len()) {
                let mut e = zero.clone();
                for (k, &i) in nz.iter().enumerate() {
                    let s = if signs & (1 << k) != 0 { -1.0 } else { 1.0 };
                    e[idx[i]] = s * z[i] * self.bounds[idx[i]][t];
                }
                out.push(e);
            }
        }
        out.sort_by(|a, b| lex_cmp(a, b));
        out.dedup();
        Ok(out)
    }

    /// Largest total deviation `sum eps` over the set at hour `t`.
    pub fn max_total(&self, t: usize) -> f64 {
        let mut ub: Vec<f64> = self.uncertain_buses(t).iter().map(|&m| self.bounds[m][t]).collect();
        ub.sort_by(|a, b| b.total_cmp(a));
        let mut left = self.effective_system_budget();
        let mut total = 0.0;
        for u in ub {
            let z = left.min(self.bus_budget);
            if z <= 0.0 {
                break;
            }
            total += z * u;
            left -= z;
        }
        total
    }

    /// Uniform magnitudes with random signs, scaled into the system budget.
    pub fn sample<R: Rng>(&self, t: usize, rng: &mut R) -> Vec<f64> {
        let idx = self.uncertain_buses(t);
        let budget = self.effective_system_budget();
        let mut z: Vec<f64> = idx.iter().map(|_| rng.gen_range(0.0..=1.0) * self.bus_budget).collect();
        let sum: f64 = z.iter().sum();
        if sum > budget && sum > 0.0 {
            let s = budget / sum;
            z.iter_mut().for_each(|v| *v *= s);
        }
        let mut e = vec![0.0; self.buses()];
        for (k, &m) in idx.iter().enumerate() {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            e[m] = sign * z[k] * self.bounds[m][t];
        }
        e
    }
}

/// Minimum total slack (MW) needed to rebalance after deviation `eps`
/// while respecting resource ranges and line limits.
pub fn redispatch_violation(rec: &HourRecourse, grid: Grid<'_>, eps: &[f64]) -> Result<f64, UncertaintyError> {
    let mut lp = LinearModel::new("redispatch");
    let p: Vec<_> = rec
        .resources
        .iter()
        .enumerate()
        .map(|(k, &(_, lo, hi))| lp.add_var(format!("p{k}"), lo, hi.max(lo), 0.0))
        .collect();
    let demand: Vec<f64> = rec.loads.iter().zip(eps).map(|(l, e)| l + e).collect();
    let total: f64 = demand.iter().sum();
    let sp = lp.add_var("bal+", 0.0, f64::INFINITY, 1.0);
    let sm = lp.add_var("bal-", 0.0, f64::INFINITY, 1.0);
    let mut terms: Vec<_> = p.iter().map(|&v| (v, 1.0)).collect();
    terms.push((sp, 1.0));
    terms.push((sm, -1.0));
    lp.add_constraint("balance", terms, Sense::Eq, total);
    if let Some(sf) = grid.sf {
        for (l, &cap) in grid.capacity.iter().enumerate() {
            let fixed: f64 = demand.iter().enumerate().map(|(b, d)| sf.get(l, b) * d).sum();
            let up = lp.add_var(format!("line{l}+"), 0.0, f64::INFINITY, 1.0);
            let dn = lp.add_var(format!("line{l}-"), 0.0, f64::INFINITY, 1.0);
            let mut t: Vec<_> = rec
                .resources
                .iter()
                .zip(&p)
                .map(|(&(bus, _, _), &v)| (v, sf.get(l, bus)))
                .filter(|&(_, c)| c != 0.0)
                .collect();
            t.push((up, -1.0));
            t.push((dn, 1.0));
            lp.add_range(format!("line{l}"), t, fixed - cap, fixed + cap);
        }
    }
    let r = solve_lp(&lp)?;
    if r.status != Status::Optimal {
        return Err(OptimError::Numerical(format!("redispatch LP {}", r.status)).into());
    }
    Ok(r.objective.max(0.0))
}

/// Worst vertex for one hour: largest violation, ties to the
/// lexicographically smallest vertex.
pub fn worst_vertex(
    set: &UncertaintySet,
    rec: &HourRecourse,
    grid: Grid<'_>,
    t: usize,
) -> Result<(Vec<f64>, f64), UncertaintyError> {
    let verts = set.enumerate_vertices(t)?;
    let vals: Vec<f64> = verts
        .par_iter()
        .map(|v| redispatch_violation(rec, grid, v))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for (k, &v) in vals.iter().enumerate() {
        if v > vals[best] + TIE_TOL {
            best = k;
        }
    }
    Ok((verts[best].clone(), vals[best]))
}

/// Worst vertex per hour for a schedule's recourse, evaluated in parallel.
pub fn worst_case_all(
    set: &UncertaintySet,
    recourse: &[HourRecourse],
    grid: Grid<'_>,
) -> Result<Vec<(Vec<f64>, f64)>, UncertaintyError> {
    recourse
        .par_iter()
        .enumerate()
        .map(|(t, rec)| worst_vertex(set, rec, grid, t))
        .collect()
}

/// Worst vertex at hour `t` against a cleared schedule.
pub fn worst_case(
    set: &UncertaintySet,
    case: &SystemCase,
    sf: Option<&ShiftFactors>,
    schedule: &crate::scuc::RobustSchedule,
    t: usize,
) -> Result<(Vec<f64>, f64), UncertaintyError> {
    let caps: Vec<f64> = case.lines.iter().map(|l| l.capacity).collect();
    let grid = Grid { sf, capacity: &caps };
    worst_vertex(set, &schedule.recourse(case, t), grid, t)
}

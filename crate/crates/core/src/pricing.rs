//! Fixed-commitment RSCED and price extraction from its duals.
//!
//! Every price is a derivative of the optimal cost. The LMP at a bus is the
//! total sensitivity to its load, which moves the base rows and, because
//! scenario demand is load plus deviation, every scenario row as well.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PiecewiseBid, ShiftFactors, SystemCase};
use crate::optim::{RowId, SolveResult, Solver, Status};
use crate::scuc::{diagnose_infeasibility, MasterModel, MasterOptions, RobustSchedule, ScucError};
use crate::uncertainty::Scenario;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("solve result carries no duals")]
    MissingDuals,
    #[error(transparent)]
    Master(#[from] ScucError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    /// `[bus][t]`, $/MWh
    pub lmp: Vec<Vec<f64>>,
    /// `[k][bus][t]`, $/MW
    pub scenario_price: Vec<Vec<Vec<f64>>>,
    pub ump_up: Vec<Vec<f64>>,
    pub ump_down: Vec<Vec<f64>>,
    /// Scenarios aggregated into each bus-hour UMP, `[bus][t]`.
    pub k_up: Vec<Vec<Vec<usize>>>,
    pub k_down: Vec<Vec<Vec<usize>>>,
    /// `[unit][t]`
    pub opportunity_up: Vec<Vec<f64>>,
    pub opportunity_down: Vec<Vec<f64>>,
    /// Base line shadow prices `[line][t]` of the upper (`plus`) and lower
    /// (`minus`) flow limits, both >= 0.
    pub mu_plus: Vec<Vec<f64>>,
    pub mu_minus: Vec<Vec<f64>>,
    /// Scenario line shadow prices `[k][line][t]`, both >= 0.
    pub eta_plus: Vec<Vec<Vec<f64>>>,
    pub eta_minus: Vec<Vec<Vec<f64>>>,
    /// Capacity-row duals of scenario redispatch `[k][unit][t]`:
    /// `beta_up >= 0` at the upper limit, `beta_down <= 0` at the lower one.
    pub beta_up: Vec<Vec<Vec<f64>>>,
    pub beta_down: Vec<Vec<Vec<f64>>>,
    /// Base balance dual per hour.
    pub energy: Vec<f64>,
}

impl PriceSet {
    /// Total shadow price of line `l` at `t`, base plus all scenarios.
    /// Zero when the run carried no line limits.
    pub fn line_price(&self, l: usize, t: usize) -> f64 {
        let at = |v: &Vec<Vec<f64>>| v.get(l).map_or(0.0, |row| row[t]);
        let base = at(&self.mu_plus) + at(&self.mu_minus);
        base + self
            .eta_plus
            .iter()
            .zip(&self.eta_minus)
            .map(|(p, m)| at(p) + at(m))
            .sum::<f64>()
    }
}

/// Schedule and prices for one uncertainty level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchPrices {
    pub bus_budget: f64,
    pub system_budget: f64,
    pub schedule: RobustSchedule,
    pub prices: PriceSet,
}

/// Master model with the commitment fixed, so it is a pure LP.
pub fn build_rsced(
    case: &SystemCase,
    bids: &[PiecewiseBid],
    sf: Option<&ShiftFactors>,
    commitment: &[Vec<bool>],
    pool: &[Scenario],
    opts: &MasterOptions,
) -> MasterModel {
    let opts = MasterOptions {
        commitment: Some(commitment.to_vec()),
        ..opts.clone()
    };
    crate::scuc::build_master(case, bids, sf, pool, &opts)
}

/// Solves an RSCED; infeasibility is diagnosed to the first failing hour.
pub fn solve_rsced(mm: &MasterModel, solver: &dyn Solver) -> Result<SolveResult, PricingError> {
    let r = solver.solve_lp(&mm.model.relaxed()).map_err(ScucError::from)?;
    match r.status {
        Status::Optimal => Ok(r),
        Status::Infeasible => Err(ScucError::Infeasible {
            hour: diagnose_infeasibility(mm, solver),
        }
        .into()),
        Status::Unbounded => Err(ScucError::Unbounded.into()),
    }
}

// Scenario prices within this of zero join neither aggregate.
const PRICE_EPS: f64 = 1e-9;

fn split(y: f64) -> (f64, f64) {
    ((-y).max(0.0), y.max(0.0))
}

pub fn extract_prices(
    case: &SystemCase,
    mm: &MasterModel,
    r: &SolveResult,
    sf: Option<&ShiftFactors>,
) -> Result<PriceSet, PricingError> {
    if r.row_duals.len() != mm.model.num_rows() {
        return Err(PricingError::MissingDuals);
    }
    let ix = &mm.index;
    let nt = mm.horizon;
    let nb = case.buses;
    let nl = ix.line.len();
    let sf = if nl > 0 { sf } else { None };
    let dual = |row: RowId| r.dual(row);
    // Nodal price seen through one balance row and its line rows.
    let nodal = |bal: &[RowId], lines: &[Vec<RowId>]| -> Vec<Vec<f64>> {
        (0..nb)
            .map(|b| {
                (0..nt)
                    .map(|t| {
                        let mut v = dual(bal[t]);
                        if let Some(sf) = sf {
                            for (l, rows) in lines.iter().enumerate() {
                                v += sf.get(l, b) * dual(rows[t]);
                            }
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    };
    let base = nodal(&ix.balance, &ix.line);
    let scenario_price: Vec<Vec<Vec<f64>>> = ix.scenarios.iter().map(|s| nodal(&s.balance, &s.line)).collect();

    let mut lmp = base;
    for sp in &scenario_price {
        for b in 0..nb {
            for t in 0..nt {
                lmp[b][t] += sp[b][t];
            }
        }
    }

    let mut ump_up = vec![vec![0.0; nt]; nb];
    let mut ump_down = vec![vec![0.0; nt]; nb];
    let mut k_up = vec![vec![Vec::new(); nt]; nb];
    let mut k_down = vec![vec![Vec::new(); nt]; nb];
    for (k, sp) in scenario_price.iter().enumerate() {
        for b in 0..nb {
            for t in 0..nt {
                let v = sp[b][t];
                if v > PRICE_EPS {
                    ump_up[b][t] += v;
                    k_up[b][t].push(k);
                } else if v < -PRICE_EPS {
                    ump_down[b][t] += v;
                    k_down[b][t].push(k);
                }
            }
        }
    }

    let grid = |rows: &[Vec<RowId>], f: fn(f64) -> f64| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().map(|&row| f(dual(row))).collect())
            .collect()
    };
    let plus = |y: f64| split(y).0;
    let minus = |y: f64| split(y).1;
    let mu_plus = grid(&ix.line, plus);
    let mu_minus = grid(&ix.line, minus);
    let eta_plus = ix.scenarios.iter().map(|s| grid(&s.line, plus)).collect();
    let eta_minus = ix.scenarios.iter().map(|s| grid(&s.line, minus)).collect();
    let beta_up: Vec<Vec<Vec<f64>>> = ix.scenarios.iter().map(|s| grid(&s.cap_up, |y| -y)).collect();
    let beta_down: Vec<Vec<Vec<f64>>> = ix.scenarios.iter().map(|s| grid(&s.cap_down, |y| -y)).collect();

    let nu = case.units.len();
    let mut opportunity_up = vec![vec![0.0; nt]; nu];
    let mut opportunity_down = vec![vec![0.0; nt]; nu];
    for (i, u) in case.units.iter().enumerate() {
        for t in 0..nt {
            opportunity_up[i][t] = k_up[u.bus][t].iter().map(|&k| beta_up[k][i][t]).sum();
            opportunity_down[i][t] = k_down[u.bus][t].iter().map(|&k| beta_down[k][i][t]).sum();
        }
    }

    Ok(PriceSet {
        lmp,
        scenario_price,
        ump_up,
        ump_down,
        k_up,
        k_down,
        opportunity_up,
        opportunity_down,
        mu_plus,
        mu_minus,
        eta_plus,
        eta_minus,
        beta_up,
        beta_down,
        energy: ix.balance.iter().map(|&row| dual(row)).collect(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub checked: usize,
    /// `(k, bus, t, price, deviation)` with `price * deviation < -tol`.
    pub violations: Vec<(usize, usize, usize, f64, f64)>,
}

impl SignReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that each scenario price shares the sign of its deviation.
pub fn verify_sign_property(prices: &PriceSet, pool: &[Scenario], tol: f64) -> SignReport {
    let mut rep = SignReport::default();
    for (k, sc) in pool.iter().enumerate() {
        for (b, row) in sc.values.iter().enumerate() {
            for (t, &e) in row.iter().enumerate() {
                if e == 0.0 {
                    continue;
                }
                rep.checked += 1;
                let pi = prices.scenario_price[k][b][t];
                if pi * e < -tol {
                    rep.violations.push((k, b, t, pi, e));
                }
            }
        }
    }
    rep
}

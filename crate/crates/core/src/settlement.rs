//! Cash flows of a priced schedule: energy, reserve credits, uncertainty
//! charges, revenue residue and FTR funding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PiecewiseBid, ShiftFactors, SystemCase};
use crate::optim::{MipOptions, Solver, Status};
use crate::pricing::PriceSet;
use crate::scuc::{build_master, build_traditional, MasterOptions, RobustSchedule, ScucError, TraditionalRequirement};
use crate::uncertainty::UncertaintySet;

/// Tolerance on the net amount of a balanced FTR portfolio, MW.
pub const FTR_BALANCE_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SettlementError {
    #[error("FTR portfolio is unbalanced: net {net:.6} MW")]
    Unbalanced { net: f64 },
    #[error("FTR portfolio has {got} buses, system has {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error(transparent)]
    Master(#[from] ScucError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySettlement {
    /// Generator credits `[unit][t]`.
    pub generators: Vec<Vec<f64>>,
    /// Load payments `[bus][t]`.
    pub loads: Vec<Vec<f64>>,
    /// Storage net-injection credits `[device][t]`; negative while charging.
    pub storage: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettlementReport {
    pub energy: EnergySettlement,
    /// Reserve credit `[unit][t]`.
    pub reserve: Vec<Vec<f64>>,
    /// Storage reserve credit `[device][t]`.
    pub storage_reserve: Vec<Vec<f64>>,
    /// Uncertainty charge `[bus][t]`.
    pub uncertainty: Vec<Vec<f64>>,
    pub residue: Vec<f64>,
    pub congestion_rent: Vec<f64>,
}

impl SettlementReport {
    pub fn total_reserve(&self) -> f64 {
        sum2(&self.reserve) + sum2(&self.storage_reserve)
    }

    pub fn total_uncertainty(&self) -> f64 {
        sum2(&self.uncertainty)
    }

    pub fn total_residue(&self) -> f64 {
        self.residue.iter().sum()
    }
}

fn sum2(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().sum()
}

pub fn settle_energy(case: &SystemCase, schedule: &RobustSchedule, prices: &PriceSet) -> EnergySettlement {
    let nt = case.horizon;
    let generators = case
        .units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            (0..nt)
                .map(|t| schedule.dispatch[i][t] * prices.lmp[u.bus][t])
                .collect()
        })
        .collect();
    let mut loads = vec![vec![0.0; nt]; case.buses];
    for t in 0..nt {
        for (b, l) in case.bus_loads(t).into_iter().enumerate() {
            loads[b][t] = l * prices.lmp[b][t];
        }
    }
    let storage = case
        .storage
        .iter()
        .zip(&schedule.storage)
        .map(|(dev, st)| (0..nt).map(|t| st.injection(t) * prices.lmp[dev.bus][t]).collect())
        .collect();
    EnergySettlement {
        generators,
        loads,
        storage,
    }
}

/// `ump_up * Q_up + ump_down * Q_down` at the unit's bus.
pub fn settle_reserve(case: &SystemCase, schedule: &RobustSchedule, prices: &PriceSet) -> Vec<Vec<f64>> {
    case.units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            (0..case.horizon)
                .map(|t| {
                    prices.ump_up[u.bus][t] * schedule.reserve_up[i][t]
                        + prices.ump_down[u.bus][t] * schedule.reserve_down[i][t]
                })
                .collect()
        })
        .collect()
}

/// Charge on the bound `L * ub` in both directions.
pub fn settle_uncertainty(set: &UncertaintySet, prices: &PriceSet) -> Vec<Vec<f64>> {
    (0..set.buses())
        .map(|m| {
            (0..set.horizon())
                .map(|t| {
                    let width = set.bus_budget * set.bound(m, t);
                    prices.ump_up[m][t] * width + prices.ump_down[m][t] * -width
                })
                .collect()
        })
        .collect()
}

/// Uncertainty charges minus reserve credits, per hour.
pub fn revenue_residue(uncertainty: &[Vec<f64>], reserve: &[Vec<f64>]) -> Vec<f64> {
    let nt = uncertainty.first().or(reserve.first()).map_or(0, Vec::len);
    (0..nt)
        .map(|t| uncertainty.iter().map(|r| r[t]).sum::<f64>() - reserve.iter().map(|r| r[t]).sum::<f64>())
        .collect()
}

/// Total line shadow price times absolute base flow, per hour.
pub fn congestion_rent(schedule: &RobustSchedule, prices: &PriceSet) -> Vec<f64> {
    let nt = prices.lmp.first().map_or(0, Vec::len);
    (0..nt)
        .map(|t| {
            schedule
                .flows
                .iter()
                .enumerate()
                .map(|(l, f)| prices.line_price(l, t) * f[t].abs())
                .sum()
        })
        .collect()
}

pub fn settle(
    case: &SystemCase,
    set: &UncertaintySet,
    schedule: &RobustSchedule,
    prices: &PriceSet,
) -> SettlementReport {
    let reserve = settle_reserve(case, schedule, prices);
    let storage_reserve: Vec<Vec<f64>> = case
        .storage
        .iter()
        .zip(&schedule.storage)
        .map(|(dev, s)| crate::storage::storage_reserve_credit(s, prices, dev, case.delta_t))
        .collect();
    let uncertainty = settle_uncertainty(set, prices);
    let credits: Vec<Vec<f64>> = reserve.iter().chain(&storage_reserve).cloned().collect();
    SettlementReport {
        energy: settle_energy(case, schedule, prices),
        residue: revenue_residue(&uncertainty, &credits),
        congestion_rent: if schedule.flows.is_empty() {
            vec![0.0; case.horizon]
        } else {
            congestion_rent(schedule, prices)
        },
        reserve,
        storage_reserve,
        uncertainty,
    }
}

/// Nodal FTR amounts, positive for injection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtrPortfolio {
    pub amounts: Vec<f64>,
}

impl FtrPortfolio {
    pub fn new(amounts: Vec<f64>) -> Result<Self, SettlementError> {
        let net: f64 = amounts.iter().sum();
        if net.abs() > FTR_BALANCE_TOL {
            return Err(SettlementError::Unbalanced { net });
        }
        Ok(Self { amounts })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtrFlows {
    pub flows: Vec<f64>,
    pub feasible: bool,
}

/// Simultaneous feasibility of a portfolio against line capacities.
pub fn ftr_sft(portfolio: &FtrPortfolio, sf: &ShiftFactors, capacity: &[f64]) -> Result<FtrFlows, SettlementError> {
    let net: f64 = portfolio.amounts.iter().sum();
    if net.abs() > FTR_BALANCE_TOL {
        return Err(SettlementError::Unbalanced { net });
    }
    let flows = sf.flows(&portfolio.amounts);
    let feasible = flows.iter().zip(capacity).all(|(f, c)| f.abs() <= c + 1e-6);
    Ok(FtrFlows { flows, feasible })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtrSettlement {
    pub credit: f64,
    pub congestion_rent: f64,
    /// Credit in excess of the collected rent.
    pub underfunding: f64,
}

/// Hourly FTR credit against congestion rent.
pub fn ftr_settle(
    portfolio: &FtrPortfolio,
    prices: &PriceSet,
    schedule: &RobustSchedule,
    sf: &ShiftFactors,
    t: usize,
) -> Result<FtrSettlement, SettlementError> {
    if portfolio.amounts.len() != sf.buses() {
        return Err(SettlementError::WrongLength {
            got: portfolio.amounts.len(),
            expected: sf.buses(),
        });
    }
    let flows = sf.flows(&portfolio.amounts);
    let credit: f64 = flows
        .iter()
        .enumerate()
        .map(|(l, f)| prices.line_price(l, t) * f.abs())
        .sum();
    let rent: f64 = schedule
        .flows
        .iter()
        .enumerate()
        .map(|(l, f)| prices.line_price(l, t) * f[t].abs())
        .sum();
    Ok(FtrSettlement {
        credit,
        congestion_rent: rent,
        underfunding: credit - rent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraditionalPrices {
    pub schedule: RobustSchedule,
    pub cost: f64,
    /// Uniform energy price per hour.
    pub lmp: Vec<f64>,
    /// Duals of the system requirements: up >= 0, down <= 0.
    pub reserve_up: Vec<f64>,
    pub reserve_down: Vec<f64>,
    /// Cleared reserve variables `[unit][t]`.
    pub q_up: Vec<Vec<f64>>,
    pub q_down: Vec<Vec<f64>>,
    /// Capacity-row duals `[unit][t]`: up >= 0, down <= 0.
    pub opportunity_up: Vec<Vec<f64>>,
    pub opportunity_down: Vec<Vec<f64>>,
}

/// Requirement covering the largest net deviation in each direction.
pub fn traditional_requirement(set: &UncertaintySet) -> TraditionalRequirement {
    let up: Vec<f64> = (0..set.horizon()).map(|t| set.max_total(t)).collect();
    TraditionalRequirement {
        down: up.iter().map(|v| -v).collect(),
        up,
    }
}

/// Clears the traditional scheme, then prices it with the commitment fixed.
pub fn traditional_prices(
    case: &SystemCase,
    bids: &[PiecewiseBid],
    req: &TraditionalRequirement,
    solver: &dyn Solver,
) -> Result<TraditionalPrices, SettlementError> {
    let mm = build_traditional(case, bids, req);
    let r = solver
        .solve_mip(&mm.model, &MipOptions::default())
        .map_err(ScucError::from)?;
    check(r.status)?;
    let sched = mm.schedule(case, None, &r);
    let opts = MasterOptions {
        lines: false,
        commitment: Some(sched.commitment.clone()),
        traditional: Some(req.clone()),
        storage: false,
    };
    let lp = build_master(case, bids, None, &[], &opts);
    let r = solver.solve_lp(&lp.model).map_err(ScucError::from)?;
    check(r.status)?;
    let mut schedule = lp.schedule(case, None, &r);
    let ti = lp.index.traditional.as_ref().expect("traditional rows present");
    let grid = |v: &Vec<Vec<crate::optim::VarId>>| -> Vec<Vec<f64>> {
        v.iter().map(|row| row.iter().map(|&x| r.value(x)).collect()).collect()
    };
    let duals = |v: &Vec<Vec<crate::optim::RowId>>| -> Vec<Vec<f64>> {
        v.iter().map(|row| row.iter().map(|&x| -r.dual(x)).collect()).collect()
    };
    let q_up = grid(&ti.q_up);
    let q_down = grid(&ti.q_down);
    schedule.reserve_up = q_up.clone();
    schedule.reserve_down = q_down.clone();
    Ok(TraditionalPrices {
        cost: r.objective,
        lmp: lp.index.balance.iter().map(|&b| r.dual(b)).collect(),
        reserve_up: ti.req_up.iter().map(|&row| r.dual(row)).collect(),
        reserve_down: ti.req_down.iter().map(|&row| r.dual(row)).collect(),
        q_up,
        q_down,
        opportunity_up: duals(&ti.cap_up),
        opportunity_down: duals(&ti.cap_down),
        schedule,
    })
}

fn check(status: Status) -> Result<(), SettlementError> {
    match status {
        Status::Optimal => Ok(()),
        Status::Infeasible => Err(ScucError::Infeasible { hour: None }.into()),
        Status::Unbounded => Err(ScucError::Unbounded.into()),
    }
}

//! Robust SCUC master problem.
//!
//! The base block carries commitment logic, piecewise energy offers, ramping,
//! system balance and line limits. Every pooled scenario adds a same-hour
//! redispatch block: each unit may deviate from its base point by its ramp
//! rate within its committed range, and the redispatch must balance the
//! deviated demand within line limits. Only base-dispatch costs are priced.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PiecewiseBid, ShiftFactors, SystemCase, Unit};
use crate::optim::{LinearModel, MipOptions, OptimError, RowId, Sense, SolveResult, Solver, Status, VarId};
use crate::storage::{self, StorageIndex, StorageSchedule};
use crate::uncertainty::{HourRecourse, Scenario};

#[derive(Debug, Error)]
pub enum ScucError {
    #[error("master problem infeasible{}", hour.map(|t| format!(" starting at hour {}", t + 1)).unwrap_or_default())]
    Infeasible { hour: Option<usize> },
    #[error("master problem unbounded")]
    Unbounded,
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// System-wide reserve requirements for the traditional scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraditionalRequirement {
    /// Upward requirement per hour, MW (>= 0).
    pub up: Vec<f64>,
    /// Downward requirement per hour, MW (<= 0).
    pub down: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct MasterOptions {
    /// Enforce line limits in base and scenario blocks.
    pub lines: bool,
    /// Fixed commitment `[unit][t]`; turns the master into an LP.
    pub commitment: Option<Vec<Vec<bool>>>,
    pub traditional: Option<TraditionalRequirement>,
    /// Attach the case's storage devices.
    pub storage: bool,
}

impl MasterOptions {
    pub fn robust() -> Self {
        Self {
            lines: true,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioIndex {
    /// `p[unit][t]`
    pub p: Vec<Vec<VarId>>,
    /// `p - I p_max <= 0`
    pub cap_up: Vec<Vec<RowId>>,
    /// `p - I p_min >= 0`
    pub cap_down: Vec<Vec<RowId>>,
    /// `p - P <= ramp_up dt`
    pub dev_up: Vec<Vec<RowId>>,
    /// `P - p <= ramp_down dt`
    pub dev_down: Vec<Vec<RowId>>,
    pub balance: Vec<RowId>,
    /// `line[l][t]`, ranged flow rows
    pub line: Vec<Vec<RowId>>,
}

#[derive(Clone, Debug)]
pub struct TraditionalIndex {
    pub q_up: Vec<Vec<VarId>>,
    pub q_down: Vec<Vec<VarId>>,
    /// `Q_up + P <= I p_max`
    pub cap_up: Vec<Vec<RowId>>,
    /// `Q_down + P >= I p_min`
    pub cap_down: Vec<Vec<RowId>>,
    pub req_up: Vec<RowId>,
    pub req_down: Vec<RowId>,
}

#[derive(Clone, Debug)]
pub struct MasterIndex {
    pub commit: Vec<Vec<VarId>>,
    pub startup: Vec<Vec<VarId>>,
    pub shutdown: Vec<Vec<VarId>>,
    pub p: Vec<Vec<VarId>>,
    pub segments: Vec<Vec<Vec<VarId>>>,
    pub balance: Vec<RowId>,
    pub line: Vec<Vec<RowId>>,
    pub scenarios: Vec<ScenarioIndex>,
    pub traditional: Option<TraditionalIndex>,
    pub storage: Vec<StorageIndex>,
}

#[derive(Clone, Debug)]
pub struct MasterModel {
    pub model: LinearModel,
    pub index: MasterIndex,
    pub lines: bool,
    pub horizon: usize,
}

/// Commitment, dispatch and derived reserves of a cleared schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustSchedule {
    /// `[unit][t]`
    pub commitment: Vec<Vec<bool>>,
    pub startup: Vec<Vec<bool>>,
    pub shutdown: Vec<Vec<bool>>,
    pub dispatch: Vec<Vec<f64>>,
    /// `[k][unit][t]`
    pub scenario_dispatch: Vec<Vec<Vec<f64>>>,
    pub reserve_up: Vec<Vec<f64>>,
    pub reserve_down: Vec<Vec<f64>>,
    /// Base flows `[line][t]`.
    pub flows: Vec<Vec<f64>>,
    pub storage: Vec<StorageSchedule>,
    pub cost: f64,
}

/// Deliverable one-period headroom of a unit at output `p`.
pub fn reserve_capability(p: f64, on: bool, unit: &Unit, dt: f64) -> (f64, f64) {
    if !on {
        return (0.0, 0.0);
    }
    let up = (unit.p_max - p).min(unit.ramp_up * dt).max(0.0);
    let down = (p - unit.p_min).min(unit.ramp_down * dt).max(0.0);
    (up, -down)
}

fn startup_ramp(u: &Unit) -> (f64, f64) {
    (u.p_min.max(u.ramp_up), u.p_min.max(u.ramp_down))
}

fn flow_terms(sf: &ShiftFactors, l: usize, vars: impl Iterator<Item = (usize, VarId)>) -> Vec<(VarId, f64)> {
    vars.map(|(bus, v)| (v, sf.get(l, bus)))
        .filter(|&(_, c)| c != 0.0)
        .collect()
}

fn fixed_flow(sf: &ShiftFactors, l: usize, demand: &[f64]) -> f64 {
    demand.iter().enumerate().map(|(b, d)| sf.get(l, b) * d).sum()
}

/// Builds the master problem for a scenario pool.
pub fn build_master(
    case: &SystemCase,
    bids: &[PiecewiseBid],
    sf: Option<&ShiftFactors>,
    pool: &[Scenario],
    opts: &MasterOptions,
) -> MasterModel {
    let nt = case.horizon;
    let nu = case.units.len();
    let dt = case.delta_t;
    let sf = if opts.lines { sf } else { None };
    let mut m = LinearModel::new(if opts.commitment.is_some() { "rsced" } else { "rscuc" });

    let mut commit = vec![Vec::with_capacity(nt); nu];
    let mut startup = vec![Vec::with_capacity(nt); nu];
    let mut shutdown = vec![Vec::with_capacity(nt); nu];
    let mut p = vec![Vec::with_capacity(nt); nu];
    let mut segments = vec![Vec::with_capacity(nt); nu];

    for (i, (u, bid)) in case.units.iter().zip(bids).enumerate() {
        let fixed = opts.commitment.as_ref().map(|c| &c[i]);
        for t in 0..nt {
            let iv = match fixed {
                Some(c) => {
                    let v = if c[t] { 1.0 } else { 0.0 };
                    m.add_var(format!("I[{},{}]", u.id, t + 1), v, v, bid.fixed_cost)
                }
                None => m.add_binary(format!("I[{},{}]", u.id, t + 1), bid.fixed_cost),
            };
            commit[i].push(iv);
            let (su_bounds, sd_bounds) = match fixed {
                Some(c) => {
                    let prev = if t == 0 { u.initially_on() } else { c[t - 1] };
                    let su = if c[t] && !prev { 1.0 } else { 0.0 };
                    let sd = if !c[t] && prev { 1.0 } else { 0.0 };
                    ((su, su), (sd, sd))
                }
                None => ((0.0, 1.0), (0.0, 1.0)),
            };
            startup[i].push(m.add_var(
                format!("SU[{},{}]", u.id, t + 1),
                su_bounds.0,
                su_bounds.1,
                u.startup_cost,
            ));
            shutdown[i].push(m.add_var(
                format!("SD[{},{}]", u.id, t + 1),
                sd_bounds.0,
                sd_bounds.1,
                u.shutdown_cost,
            ));
            let segs: Vec<VarId> = bid
                .segments
                .iter()
                .enumerate()
                .map(|(w, s)| {
                    m.add_var(
                        format!("seg[{},{},{}]", u.id, t + 1, w + 1),
                        0.0,
                        s.width(),
                        s.marginal_cost,
                    )
                })
                .collect();
            let pv = m.add_var(format!("P[{},{}]", u.id, t + 1), 0.0, u.p_max, 0.0);
            let mut def = vec![(pv, 1.0), (iv, -u.p_min)];
            def.extend(segs.iter().map(|&s| (s, -1.0)));
            m.add_constraint(format!("pdef[{},{}]", u.id, t + 1), def, Sense::Eq, 0.0);
            m.add_constraint(
                format!("pmax[{},{}]", u.id, t + 1),
                vec![(pv, 1.0), (iv, -u.p_max)],
                Sense::Le,
                0.0,
            );
            m.add_constraint(
                format!("pmin[{},{}]", u.id, t + 1),
                vec![(pv, 1.0), (iv, -u.p_min)],
                Sense::Ge,
                0.0,
            );
            segments[i].push(segs);
            p[i].push(pv);
        }

        let on0 = u.initially_on();
        for t in 0..nt {
            let name = |s: &str| format!("{s}[{},{}]", u.id, t + 1);
            let (su, sd, it) = (startup[i][t], shutdown[i][t], commit[i][t]);
            if t == 0 {
                let rhs = if on0 { -1.0 } else { 0.0 };
                m.add_constraint(name("trans"), vec![(su, 1.0), (sd, -1.0), (it, -1.0)], Sense::Eq, rhs);
            } else {
                m.add_constraint(
                    name("trans"),
                    vec![(su, 1.0), (sd, -1.0), (it, -1.0), (commit[i][t - 1], 1.0)],
                    Sense::Eq,
                    0.0,
                );
            }
            let from = (t + 1).saturating_sub(u.min_on as usize);
            let mut terms: Vec<_> = (from..=t).map(|k| (startup[i][k], 1.0)).collect();
            terms.push((it, -1.0));
            m.add_constraint(name("minup"), terms, Sense::Le, 0.0);
            let from = (t + 1).saturating_sub(u.min_off as usize);
            let mut terms: Vec<_> = (from..=t).map(|k| (shutdown[i][k], 1.0)).collect();
            terms.push((it, 1.0));
            m.add_constraint(name("mindown"), terms, Sense::Le, 1.0);
        }
        // Residual minimum up/down time carried in from before the horizon.
        let (must, value) = if on0 {
            ((u.min_on as i64 - u.t0 as i64).max(0) as usize, 1.0)
        } else {
            ((u.min_off as i64 + u.t0 as i64).max(0) as usize, 0.0)
        };
        for t in 0..must.min(nt) {
            m.add_constraint(
                format!("init[{},{}]", u.id, t + 1),
                vec![(commit[i][t], 1.0)],
                Sense::Eq,
                value,
            );
        }

        let (sr, sdr) = startup_ramp(u);
        let (ru, rd) = (u.ramp_up * dt, u.ramp_down * dt);
        for t in 0..nt {
            let name = |s: &str| format!("{s}[{},{}]", u.id, t + 1);
            if t == 0 {
                let (p0, i0) = if on0 { (u.p0, 1.0) } else { (0.0, 0.0) };
                m.add_constraint(
                    name("rampup"),
                    vec![(p[i][0], 1.0), (startup[i][0], -sr)],
                    Sense::Le,
                    p0 + ru * i0,
                );
                m.add_constraint(
                    name("rampdown"),
                    vec![(p[i][0], -1.0), (commit[i][0], -rd), (shutdown[i][0], -sdr)],
                    Sense::Le,
                    -p0,
                );
            } else {
                m.add_constraint(
                    name("rampup"),
                    vec![
                        (p[i][t], 1.0),
                        (p[i][t - 1], -1.0),
                        (commit[i][t - 1], -ru),
                        (startup[i][t], -sr),
                    ],
                    Sense::Le,
                    0.0,
                );
                m.add_constraint(
                    name("rampdown"),
                    vec![
                        (p[i][t - 1], 1.0),
                        (p[i][t], -1.0),
                        (commit[i][t], -rd),
                        (shutdown[i][t], -sdr),
                    ],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }

    let mut balance = Vec::with_capacity(nt);
    let mut line = vec![Vec::with_capacity(nt); if sf.is_some() { case.lines.len() } else { 0 }];
    for t in 0..nt {
        let loads = case.bus_loads(t);
        let total: f64 = loads.iter().sum();
        balance.push(m.add_constraint(
            format!("balance[{}]", t + 1),
            (0..nu).map(|i| (p[i][t], 1.0)).collect(),
            Sense::Eq,
            total,
        ));
        if let Some(sf) = sf {
            for (l, ln) in case.lines.iter().enumerate() {
                let terms = flow_terms(sf, l, case.units.iter().enumerate().map(|(i, u)| (u.bus, p[i][t])));
                let f0 = fixed_flow(sf, l, &loads);
                line[l].push(m.add_range(
                    format!("flow[{},{}]", ln.id, t + 1),
                    terms,
                    f0 - ln.capacity,
                    f0 + ln.capacity,
                ));
            }
        }
    }

    let mut scenarios = Vec::with_capacity(pool.len());
    for (k, sc) in pool.iter().enumerate() {
        let mut si = ScenarioIndex {
            p: vec![Vec::with_capacity(nt); nu],
            cap_up: vec![Vec::with_capacity(nt); nu],
            cap_down: vec![Vec::with_capacity(nt); nu],
            dev_up: vec![Vec::with_capacity(nt); nu],
            dev_down: vec![Vec::with_capacity(nt); nu],
            balance: Vec::with_capacity(nt),
            line: vec![Vec::with_capacity(nt); line.len()],
        };
        for t in 0..nt {
            for (i, u) in case.units.iter().enumerate() {
                let tag = format!("[{},{},{}]", k + 1, u.id, t + 1);
                // Limits live in the capacity rows so their duals carry the opportunity cost.
                let v = m.add_var(format!("p{tag}"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
                let it = commit[i][t];
                si.dev_up[i].push(m.add_constraint(
                    format!("sdev_up{tag}"),
                    vec![(v, 1.0), (p[i][t], -1.0)],
                    Sense::Le,
                    u.ramp_up * dt,
                ));
                si.dev_down[i].push(m.add_constraint(
                    format!("sdev_dn{tag}"),
                    vec![(v, -1.0), (p[i][t], 1.0)],
                    Sense::Le,
                    u.ramp_down * dt,
                ));
                si.cap_up[i].push(m.add_constraint(
                    format!("scap_up{tag}"),
                    vec![(v, 1.0), (it, -u.p_max)],
                    Sense::Le,
                    0.0,
                ));
                si.cap_down[i].push(m.add_constraint(
                    format!("scap_dn{tag}"),
                    vec![(v, 1.0), (it, -u.p_min)],
                    Sense::Ge,
                    0.0,
                ));
                si.p[i].push(v);
            }
            let demand: Vec<f64> = case.bus_loads(t).iter().zip(sc.at(t)).map(|(l, e)| l + e).collect();
            let total: f64 = demand.iter().sum();
            si.balance.push(m.add_constraint(
                format!("sbalance[{},{}]", k + 1, t + 1),
                (0..nu).map(|i| (si.p[i][t], 1.0)).collect(),
                Sense::Eq,
                total,
            ));
            if let Some(sf) = sf {
                for (l, ln) in case.lines.iter().enumerate() {
                    let terms = flow_terms(sf, l, case.units.iter().enumerate().map(|(i, u)| (u.bus, si.p[i][t])));
                    let f0 = fixed_flow(sf, l, &demand);
                    si.line[l].push(m.add_range(
                        format!("sflow[{},{},{}]", k + 1, ln.id, t + 1),
                        terms,
                        f0 - ln.capacity,
                        f0 + ln.capacity,
                    ));
                }
            }
        }
        scenarios.push(si);
    }

    let traditional = opts.traditional.as_ref().map(|req| {
        let mut ti = TraditionalIndex {
            q_up: vec![Vec::with_capacity(nt); nu],
            q_down: vec![Vec::with_capacity(nt); nu],
            cap_up: vec![Vec::with_capacity(nt); nu],
            cap_down: vec![Vec::with_capacity(nt); nu],
            req_up: Vec::with_capacity(nt),
            req_down: Vec::with_capacity(nt),
        };
        for t in 0..nt {
            for (i, u) in case.units.iter().enumerate() {
                let tag = format!("[{},{}]", u.id, t + 1);
                let qu = m.add_var(format!("Qup{tag}"), 0.0, f64::INFINITY, 0.0);
                let qd = m.add_var(format!("Qdn{tag}"), f64::NEG_INFINITY, 0.0, 0.0);
                let it = commit[i][t];
                m.add_constraint(
                    format!("qdn_ramp{tag}"),
                    vec![(qd, 1.0), (it, u.ramp_down * dt)],
                    Sense::Ge,
                    0.0,
                );
                m.add_constraint(
                    format!("qup_ramp{tag}"),
                    vec![(qu, 1.0), (it, -u.ramp_up * dt)],
                    Sense::Le,
                    0.0,
                );
                ti.cap_down[i].push(m.add_constraint(
                    format!("qdn_cap{tag}"),
                    vec![(qd, 1.0), (p[i][t], 1.0), (it, -u.p_min)],
                    Sense::Ge,
                    0.0,
                ));
                ti.cap_up[i].push(m.add_constraint(
                    format!("qup_cap{tag}"),
                    vec![(qu, 1.0), (p[i][t], 1.0), (it, -u.p_max)],
                    Sense::Le,
                    0.0,
                ));
                ti.q_up[i].push(qu);
                ti.q_down[i].push(qd);
            }
            ti.req_up.push(m.add_constraint(
                format!("req_up[{}]", t + 1),
                (0..nu).map(|i| (ti.q_up[i][t], 1.0)).collect(),
                Sense::Ge,
                req.up[t],
            ));
            ti.req_down.push(m.add_constraint(
                format!("req_dn[{}]", t + 1),
                (0..nu).map(|i| (ti.q_down[i][t], 1.0)).collect(),
                Sense::Le,
                req.down[t],
            ));
        }
        ti
    });

    let mut mm = MasterModel {
        model: m,
        index: MasterIndex {
            commit,
            startup,
            shutdown,
            p,
            segments,
            balance,
            line,
            scenarios,
            traditional,
            storage: Vec::new(),
        },
        lines: sf.is_some(),
        horizon: nt,
    };
    if opts.storage {
        for dev in &case.storage {
            storage::attach_storage(&mut mm, dev, case, sf);
        }
    }
    mm
}

/// Traditional scheme: no line limits, explicit reserve variables and
/// system-wide requirements, no scenario blocks.
pub fn build_traditional(case: &SystemCase, bids: &[PiecewiseBid], req: &TraditionalRequirement) -> MasterModel {
    let opts = MasterOptions {
        lines: false,
        traditional: Some(req.clone()),
        ..MasterOptions::default()
    };
    build_master(case, bids, None, &[], &opts)
}

impl MasterModel {
    pub fn solve(&self, solver: &dyn Solver) -> Result<SolveResult, ScucError> {
        let r = if self.model.has_integers() {
            solver.solve_mip(&self.model, &MipOptions::default())?
        } else {
            solver.solve_lp(&self.model)?
        };
        match r.status {
            Status::Optimal => Ok(r),
            Status::Infeasible => Err(ScucError::Infeasible { hour: None }),
            Status::Unbounded => Err(ScucError::Unbounded),
        }
    }

    pub fn schedule(&self, case: &SystemCase, sf: Option<&ShiftFactors>, r: &SolveResult) -> RobustSchedule {
        let ix = &self.index;
        let nt = self.horizon;
        let dt = case.delta_t;
        let grid = |v: &Vec<Vec<VarId>>| -> Vec<Vec<f64>> {
            v.iter().map(|row| row.iter().map(|&x| r.value(x)).collect()).collect()
        };
        let flag = |v: &Vec<Vec<VarId>>| -> Vec<Vec<bool>> {
            v.iter()
                .map(|row| row.iter().map(|&x| r.value(x) > 0.5).collect())
                .collect()
        };
        let commitment = flag(&ix.commit);
        let dispatch = grid(&ix.p);
        let mut reserve_up = vec![vec![0.0; nt]; case.units.len()];
        let mut reserve_down = vec![vec![0.0; nt]; case.units.len()];
        for (i, u) in case.units.iter().enumerate() {
            for t in 0..nt {
                let (q_up, q_dn) = reserve_capability(dispatch[i][t], commitment[i][t], u, dt);
                reserve_up[i][t] = q_up;
                reserve_down[i][t] = q_dn;
            }
        }
        let storage: Vec<StorageSchedule> = ix.storage.iter().map(|s| s.extract(r)).collect();
        let flows = match sf {
            Some(sf) => (0..nt)
                .map(|t| {
                    let mut inj: Vec<f64> = case.bus_loads(t).iter().map(|l| -l).collect();
                    for (i, u) in case.units.iter().enumerate() {
                        inj[u.bus] += dispatch[i][t];
                    }
                    for (s, dev) in storage.iter().zip(&case.storage) {
                        inj[dev.bus] += s.injection(t);
                    }
                    sf.flows(&inj)
                })
                .fold(vec![Vec::with_capacity(nt); sf.lines()], |mut acc, f| {
                    for (l, v) in f.into_iter().enumerate() {
                        acc[l].push(v);
                    }
                    acc
                }),
            None => Vec::new(),
        };
        RobustSchedule {
            commitment,
            startup: flag(&ix.startup),
            shutdown: flag(&ix.shutdown),
            dispatch,
            scenario_dispatch: ix.scenarios.iter().map(|s| grid(&s.p)).collect(),
            reserve_up,
            reserve_down,
            flows,
            storage,
            cost: r.objective,
        }
    }
}

impl RobustSchedule {
    /// Redispatch ranges at hour `t` for the worst-case oracle.
    pub fn recourse(&self, case: &SystemCase, t: usize) -> HourRecourse {
        let mut resources: Vec<(usize, f64, f64)> = case
            .units
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let p = self.dispatch[i][t];
                (u.bus, p + self.reserve_down[i][t], p + self.reserve_up[i][t])
            })
            .collect();
        for (s, dev) in self.storage.iter().zip(&case.storage) {
            let (up, dn) = storage::storage_headroom(s, dev, t, case.delta_t);
            let g = s.injection(t);
            resources.push((dev.bus, g + dn, g + up));
        }
        HourRecourse {
            loads: case.bus_loads(t),
            resources,
        }
    }

    pub fn recourse_all(&self, case: &SystemCase) -> Vec<HourRecourse> {
        (0..case.horizon).map(|t| self.recourse(case, t)).collect()
    }
}

/// Line capacities in case order, for building a redispatch `Grid`.
pub fn line_capacities(case: &SystemCase) -> Vec<f64> {
    case.lines.iter().map(|l| l.capacity).collect()
}

/// First hour whose balance or line rows need slack when the commitment
/// is relaxed, or `None` if the relaxation is feasible.
pub fn diagnose_infeasibility(mm: &MasterModel, solver: &dyn Solver) -> Option<usize> {
    let mut lp = mm.model.relaxed();
    for j in 0..lp.num_vars() {
        lp.set_cost(VarId(j), 0.0);
    }
    let ix = &mm.index;
    let mut slacks: Vec<(usize, VarId)> = Vec::new();
    let mut elastic = |lp: &mut LinearModel, row: RowId, t: usize| {
        for sign in [1.0, -1.0] {
            let s = lp.add_var(format!("slack{}", lp.num_vars()), 0.0, f64::INFINITY, 1.0);
            lp.add_term(row, s, sign);
            slacks.push((t, s));
        }
    };
    for t in 0..mm.horizon {
        elastic(&mut lp, ix.balance[t], t);
        for rows in &ix.line {
            elastic(&mut lp, rows[t], t);
        }
        for sc in &ix.scenarios {
            elastic(&mut lp, sc.balance[t], t);
            for rows in &sc.line {
                elastic(&mut lp, rows[t], t);
            }
        }
    }
    let r = solver.solve_lp(&lp).ok()?;
    if r.status != Status::Optimal {
        return None;
    }
    slacks
        .iter()
        .filter(|&&(_, s)| r.value(s) > 1e-6)
        .map(|&(t, _)| t)
        .min()
}

/// Builds and solves the master, naming the first infeasible hour on failure.
pub fn solve_master(
    case: &SystemCase,
    bids: &[PiecewiseBid],
    sf: Option<&ShiftFactors>,
    pool: &[Scenario],
    opts: &MasterOptions,
    solver: &dyn Solver,
) -> Result<(MasterModel, SolveResult, RobustSchedule), ScucError> {
    let mm = build_master(case, bids, sf, pool, opts);
    match mm.solve(solver) {
        Ok(r) => {
            let sched = mm.schedule(case, sf, &r);
            Ok((mm, r, sched))
        }
        Err(ScucError::Infeasible { .. }) => Err(ScucError::Infeasible {
            hour: diagnose_infeasibility(&mm, solver),
        }),
        Err(e) => Err(e),
    }
}

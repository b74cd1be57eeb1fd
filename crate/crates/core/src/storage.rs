//! Energy storage attached to the clearing model as a zero-cost flexible
//! resource in the base dispatch and in every scenario.

use serde::{Deserialize, Serialize};

use crate::model::{ShiftFactors, SystemCase};
use crate::optim::{RowId, Sense, SolveResult, VarId};
use crate::pricing::PriceSet;
use crate::scuc::MasterModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageDevice {
    #[serde(default)]
    pub id: String,
    pub bus: usize,
    /// Energy capacity, MWh.
    pub capacity: f64,
    /// Stored energy at the start of the horizon, MWh.
    pub initial: f64,
    /// Maximum charging power, MW.
    pub charge_rate: f64,
    /// Maximum discharging power, MW.
    pub discharge_rate: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
}

impl StorageDevice {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.capacity >= 0.0) || !(0.0..=self.capacity).contains(&self.initial) {
            return Err(format!(
                "initial {} must lie in [0, capacity {}]",
                self.initial, self.capacity
            ));
        }
        if !(self.charge_rate > 0.0) || !(self.discharge_rate > 0.0) {
            return Err("charge and discharge rates must be positive".into());
        }
        for (name, v) in [
            ("charge_efficiency", self.charge_efficiency),
            ("discharge_efficiency", self.discharge_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} {v} must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Cleared storage trajectory. Discharge is negative, charge positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageSchedule {
    /// End-of-hour energy, MWh.
    pub energy: Vec<f64>,
    pub discharge: Vec<f64>,
    pub charge: Vec<f64>,
    pub discharging: Vec<bool>,
    pub charging: Vec<bool>,
}

impl StorageSchedule {
    /// Net injection into the bus at hour `t`.
    pub fn injection(&self, t: usize) -> f64 {
        -(self.discharge[t] + self.charge[t])
    }
}

/// Variable and row handles of one attached device.
#[derive(Clone, Debug)]
pub struct StorageIndex {
    pub discharge: Vec<VarId>,
    pub charge: Vec<VarId>,
    pub energy: Vec<VarId>,
    pub discharging: Vec<VarId>,
    pub charging: Vec<VarId>,
    /// Scenario net injection `[k][t]`.
    pub scenario: Vec<Vec<VarId>>,
    /// `[k][t]` rows limiting extra discharge by stored energy.
    pub drain: Vec<Vec<RowId>>,
    /// `[k][t]` rows limiting extra charge by free capacity.
    pub fill: Vec<Vec<RowId>>,
}

impl StorageIndex {
    pub fn extract(&self, r: &SolveResult) -> StorageSchedule {
        let vals = |v: &[VarId]| v.iter().map(|&x| r.value(x)).collect::<Vec<_>>();
        let flags = |v: &[VarId]| v.iter().map(|&x| r.value(x) > 0.5).collect::<Vec<_>>();
        StorageSchedule {
            energy: vals(&self.energy),
            discharge: vals(&self.discharge),
            charge: vals(&self.charge),
            discharging: flags(&self.discharging),
            charging: flags(&self.charging),
        }
    }
}

/// Adds the device to the base block and to every scenario block of `master`.
/// `sf` must be given when the master carries line rows.
pub fn attach_storage(master: &mut MasterModel, dev: &StorageDevice, case: &SystemCase, sf: Option<&ShiftFactors>) {
    let nt = master.horizon;
    let dt = case.delta_t;
    let n = master.index.storage.len() + 1;
    let m = &mut master.model;
    let ix = &master.index;
    let tag = |s: &str, t: usize| format!("{s}[{n},{}]", t + 1);

    let mut si = StorageIndex {
        discharge: Vec::with_capacity(nt),
        charge: Vec::with_capacity(nt),
        energy: Vec::with_capacity(nt),
        discharging: Vec::with_capacity(nt),
        charging: Vec::with_capacity(nt),
        scenario: Vec::new(),
        drain: Vec::new(),
        fill: Vec::new(),
    };
    for t in 0..nt {
        let pd = m.add_var(tag("PD", t), -dev.discharge_rate, 0.0, 0.0);
        let pc = m.add_var(tag("PC", t), 0.0, dev.charge_rate, 0.0);
        let e = m.add_var(tag("E", t), 0.0, dev.capacity, 0.0);
        let id = m.add_binary(tag("ID", t), 0.0);
        let ic = m.add_binary(tag("IC", t), 0.0);
        // Mode flags only matter once the commitment is settled.
        m.set_priority(id, -1);
        m.set_priority(ic, -1);
        m.add_constraint(
            tag("dis_on", t),
            vec![(pd, 1.0), (id, dev.discharge_rate)],
            Sense::Ge,
            0.0,
        );
        m.add_constraint(
            tag("chg_on", t),
            vec![(pc, 1.0), (ic, -dev.charge_rate)],
            Sense::Le,
            0.0,
        );
        m.add_constraint(tag("mode", t), vec![(id, 1.0), (ic, 1.0)], Sense::Le, 1.0);
        let mut terms = vec![
            (e, 1.0),
            (pd, -dev.discharge_efficiency * dt),
            (pc, -dev.charge_efficiency * dt),
        ];
        let rhs = if t == 0 {
            dev.initial
        } else {
            terms.push((si.energy[t - 1], -1.0));
            0.0
        };
        m.add_constraint(tag("soc", t), terms, Sense::Eq, rhs);
        // Discharge injects, charge withdraws.
        m.add_term(ix.balance[t], pd, -1.0);
        m.add_term(ix.balance[t], pc, -1.0);
        if let Some(sf) = sf {
            for (l, rows) in ix.line.iter().enumerate() {
                let c = sf.get(l, dev.bus);
                if c != 0.0 {
                    m.add_term(rows[t], pd, -c);
                    m.add_term(rows[t], pc, -c);
                }
            }
        }
        si.discharge.push(pd);
        si.charge.push(pc);
        si.energy.push(e);
        si.discharging.push(id);
        si.charging.push(ic);
    }
    if let Some(&last) = si.energy.last() {
        m.add_constraint(format!("terminal[{n}]"), vec![(last, 1.0)], Sense::Eq, dev.initial);
    }

    for (k, sc) in ix.scenarios.iter().enumerate() {
        let mut g_k = Vec::with_capacity(nt);
        let mut drain = Vec::with_capacity(nt);
        let mut fill = Vec::with_capacity(nt);
        for t in 0..nt {
            let name = |s: &str| format!("{s}[{},{n},{}]", k + 1, t + 1);
            let g = m.add_var(name("g"), -dev.charge_rate, dev.discharge_rate, 0.0);
            let (pd, pc, e) = (si.discharge[t], si.charge[t], si.energy[t]);
            // g - g_base <= E / (rho_d dt), with g_base = -(PD + PC)
            let kd = 1.0 / (dev.discharge_efficiency * dt);
            drain.push(m.add_constraint(
                name("sdrain"),
                vec![(g, 1.0), (pd, 1.0), (pc, 1.0), (e, -kd)],
                Sense::Le,
                0.0,
            ));
            // g_base - g <= (Emax - E) / (rho_c dt)
            let kc = 1.0 / (dev.charge_efficiency * dt);
            fill.push(m.add_constraint(
                name("sfill"),
                vec![(g, -1.0), (pd, -1.0), (pc, -1.0), (e, kc)],
                Sense::Le,
                dev.capacity * kc,
            ));
            m.add_term(sc.balance[t], g, 1.0);
            if let Some(sf) = sf {
                for (l, rows) in sc.line.iter().enumerate() {
                    let c = sf.get(l, dev.bus);
                    if c != 0.0 {
                        m.add_term(rows[t], g, c);
                    }
                }
            }
            g_k.push(g);
        }
        si.scenario.push(g_k);
        si.drain.push(drain);
        si.fill.push(fill);
    }
    master.index.storage.push(si);
}

/// One-period deliverable reserve of the device at hour `t` as
/// `(up >= 0, down <= 0)` in net-injection terms.
pub fn storage_headroom(s: &StorageSchedule, dev: &StorageDevice, t: usize, dt: f64) -> (f64, f64) {
    let g = s.injection(t);
    let e = s.energy[t];
    let up = (dev.discharge_rate - g)
        .min(e / (dev.discharge_efficiency * dt))
        .max(0.0);
    let down = (dev.charge_rate + g)
        .min((dev.capacity - e) / (dev.charge_efficiency * dt))
        .max(0.0);
    (up, -down)
}

/// Hourly reserve credit of the device at its bus UMPs, the same rule as
/// generator reserve credits.
pub fn storage_reserve_credit(s: &StorageSchedule, prices: &PriceSet, dev: &StorageDevice, dt: f64) -> Vec<f64> {
    (0..s.energy.len())
        .map(|t| {
            let (up, down) = storage_headroom(s, dev, t, dt);
            prices.ump_up[dev.bus][t] * up + prices.ump_down[dev.bus][t] * down
        })
        .collect()
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::storage::StorageDevice;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("case parse error: {0}")]
    Parse(String),
    #[error("invalid case: {0}")]
    Invalid(String),
}

/// Thermal unit. Bus indices are 0-based in memory and 1-based in case files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p0: f64,
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_c: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    pub min_on: u32,
    pub min_off: u32,
    /// Hours already on (positive) or off (negative) before the horizon.
    pub t0: i32,
}

impl Unit {
    pub fn initially_on(&self) -> bool {
        self.t0 > 0
    }

    pub fn fuel_cost(&self, p: f64) -> f64 {
        self.cost_a * p * p + self.cost_b * p + self.cost_c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from_bus: usize,
    pub to_bus: usize,
    pub reactance: f64,
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    pub base: Vec<f64>,
    /// Share of system load per bus.
    pub distribution: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemCase {
    pub name: String,
    pub buses: usize,
    pub horizon: usize,
    pub delta_t: f64,
    pub units: Vec<Unit>,
    pub lines: Vec<Line>,
    pub load: LoadModel,
    /// Uncertainty interval half-width per bus and hour, `bounds[bus][t]`.
    pub uncertainty: Vec<Vec<f64>>,
    pub storage: Vec<StorageDevice>,
}

// On-disk layout: 1-based buses, maps keyed by bus number.
#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    #[serde(default)]
    name: String,
    buses: usize,
    horizon: usize,
    #[serde(default = "one")]
    delta_t: f64,
    units: Vec<Unit>,
    lines: Vec<Line>,
    load: RawLoad,
    #[serde(default)]
    uncertainty: RawUncertainty,
    #[serde(default)]
    storage: Vec<StorageDevice>,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    base: Vec<f64>,
    distribution: BTreeMap<String, f64>,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawUncertainty {
    #[serde(default)]
    bounds: BTreeMap<String, Vec<f64>>,
}

fn bus_key(key: &str, buses: usize, field: &str) -> Result<usize, CaseError> {
    let b: usize = key
        .trim()
        .parse()
        .map_err(|_| CaseError::Parse(format!("{field}: bus key '{key}' is not an integer")))?;
    if b == 0 || b > buses {
        return Err(CaseError::Invalid(format!("{field}: bus {b} outside 1..={buses}")));
    }
    Ok(b - 1)
}

fn to_zero_based(b: usize, buses: usize, what: String) -> Result<usize, CaseError> {
    if b == 0 || b > buses {
        return Err(CaseError::Invalid(format!("{what}: bus {b} outside 1..={buses}")));
    }
    Ok(b - 1)
}

/// Parses and validates a JSON case description.
pub fn load_case(text: &str) -> Result<SystemCase, CaseError> {
    let raw: RawCase = serde_json::from_str(text).map_err(|e| CaseError::Parse(e.to_string()))?;
    let n = raw.buses;
    let mut units = raw.units;
    for u in &mut units {
        u.bus = to_zero_based(u.bus, n, format!("unit {}", u.id))?;
    }
    let mut lines = raw.lines;
    for l in &mut lines {
        l.from_bus = to_zero_based(l.from_bus, n, format!("line {} from_bus", l.id))?;
        l.to_bus = to_zero_based(l.to_bus, n, format!("line {} to_bus", l.id))?;
    }
    let mut distribution = vec![0.0; n];
    for (k, v) in &raw.load.distribution {
        distribution[bus_key(k, n, "load.distribution")?] = *v;
    }
    let mut uncertainty = vec![vec![0.0; raw.horizon]; n];
    for (k, v) in &raw.uncertainty.bounds {
        let b = bus_key(k, n, "uncertainty.bounds")?;
        if v.len() != raw.horizon {
            return Err(CaseError::Invalid(format!(
                "uncertainty.bounds[{k}]: {} values for horizon {}",
                v.len(),
                raw.horizon
            )));
        }
        uncertainty[b].clone_from(v);
    }
    let mut storage = raw.storage;
    for (k, s) in storage.iter_mut().enumerate() {
        s.bus = to_zero_based(s.bus, n, format!("storage[{k}]"))?;
    }
    let case = SystemCase {
        name: raw.name,
        buses: n,
        horizon: raw.horizon,
        delta_t: raw.delta_t,
        units,
        lines,
        load: LoadModel {
            base: raw.load.base,
            distribution,
        },
        uncertainty,
        storage,
    };
    case.validate()?;
    Ok(case)
}

pub fn load_case_file(path: impl AsRef<Path>) -> Result<SystemCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_case(&text)
}

impl SystemCase {
    pub fn validate(&self) -> Result<(), CaseError> {
        let bad = |m: String| Err(CaseError::Invalid(m));
        if self.buses == 0 {
            return bad("buses must be positive".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.delta_t > 0.0) {
            return bad(format!("delta_t must be positive, got {}", self.delta_t));
        }
        for u in &self.units {
            let id = &u.id;
            if u.bus >= self.buses {
                return bad(format!("unit {id}: bus index out of range"));
            }
            if !(u.p_min <= u.p_max) || u.p_min < 0.0 {
                return bad(format!(
                    "unit {id}: p_min {} must satisfy 0 <= p_min <= p_max {}",
                    u.p_min, u.p_max
                ));
            }
            if !(u.ramp_up > 0.0) || !(u.ramp_down > 0.0) {
                return bad(format!("unit {id}: ramp rates must be positive"));
            }
            if u.min_on < 1 || u.min_off < 1 {
                return bad(format!("unit {id}: min_on and min_off must be at least 1"));
            }
            if u.t0 == 0 {
                return bad(format!("unit {id}: t0 must be nonzero"));
            }
            if u.t0 > 0 && (u.p0 < u.p_min || u.p0 > u.p_max) {
                return bad(format!(
                    "unit {id}: p0 {} outside [p_min, p_max] for an online unit",
                    u.p0
                ));
            }
            for (name, v) in [
                ("cost_a", u.cost_a),
                ("cost_b", u.cost_b),
                ("cost_c", u.cost_c),
                ("startup_cost", u.startup_cost),
                ("shutdown_cost", u.shutdown_cost),
            ] {
                if !v.is_finite() {
                    return bad(format!("unit {id}: {name} is not finite"));
                }
            }
        }
        for l in &self.lines {
            let id = &l.id;
            if l.from_bus >= self.buses || l.to_bus >= self.buses {
                return bad(format!("line {id}: bus index out of range"));
            }
            if l.from_bus == l.to_bus {
                return bad(format!("line {id}: from_bus equals to_bus"));
            }
            if !(l.reactance > 0.0) {
                return bad(format!("line {id}: reactance must be positive"));
            }
            if !(l.capacity > 0.0) {
                return bad(format!("line {id}: capacity must be positive"));
            }
        }
        if self.load.base.len() != self.horizon {
            return bad(format!(
                "load.base has {} values for horizon {}",
                self.load.base.len(),
                self.horizon
            ));
        }
        if self.load.base.iter().any(|&v| !(v >= 0.0)) {
            return bad("load.base values must be nonnegative".into());
        }
        if self.load.distribution.len() != self.buses || self.load.distribution.iter().any(|&f| !(f >= 0.0)) {
            return bad("load.distribution fractions must be nonnegative".into());
        }
        let total: f64 = self.load.distribution.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("load.distribution sums to {total}, expected 1"));
        }
        if self.uncertainty.len() != self.buses {
            return bad("uncertainty bounds must cover every bus".into());
        }
        for (b, row) in self.uncertainty.iter().enumerate() {
            if row.len() != self.horizon || row.iter().any(|&v| !(v >= 0.0)) {
                return bad(format!(
                    "uncertainty bounds at bus {} must be {} nonnegative values",
                    b + 1,
                    self.horizon
                ));
            }
        }
        for (k, s) in self.storage.iter().enumerate() {
            s.validate()
                .map_err(|e| CaseError::Invalid(format!("storage[{k}]: {e}")))?;
            if s.bus >= self.buses {
                return bad(format!("storage[{k}]: bus index out of range"));
            }
        }
        Ok(())
    }

    /// Per-bus load at hour `t` (0-based).
    pub fn bus_loads(&self, t: usize) -> Vec<f64> {
        bus_loads(&self.load, t)
    }

    pub fn total_load(&self, t: usize) -> f64 {
        self.load.base[t]
    }

    /// Uncertainty bounds at hour `t`, one entry per bus.
    pub fn bounds_at(&self, t: usize) -> Vec<f64> {
        self.uncertainty.iter().map(|row| row[t]).collect()
    }

    /// Serializes back to the on-disk layout.
    pub fn to_json(&self) -> String {
        let mut units = self.units.clone();
        for u in &mut units {
            u.bus += 1;
        }
        let mut lines = self.lines.clone();
        for l in &mut lines {
            l.from_bus += 1;
            l.to_bus += 1;
        }
        let mut storage = self.storage.clone();
        for s in &mut storage {
            s.bus += 1;
        }
        let raw = RawCase {
            name: self.name.clone(),
            buses: self.buses,
            horizon: self.horizon,
            delta_t: self.delta_t,
            units,
            lines,
            load: RawLoad {
                base: self.load.base.clone(),
                distribution: self
                    .load
                    .distribution
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f != 0.0)
                    .map(|(b, &f)| ((b + 1).to_string(), f))
                    .collect(),
            },
            uncertainty: RawUncertainty {
                bounds: self
                    .uncertainty
                    .iter()
                    .enumerate()
                    .filter(|(_, row)| row.iter().any(|&v| v != 0.0))
                    .map(|(b, row)| ((b + 1).to_string(), row.clone()))
                    .collect(),
            },
            storage,
        };
        serde_json::to_string_pretty(&raw).expect("case serializes")
    }
}

/// Load at each bus for hour `t` (0-based): base load times the bus share.
pub fn bus_loads(load: &LoadModel, t: usize) -> Vec<f64> {
    load.distribution.iter().map(|f| load.base[t] * f).collect()
}

//! CSV, JSON and plain-table renderings of clearing results. Money is
//! printed to 2 decimals, prices and MW to 3; hours and buses are 1-based.

use serde_json::{json, Value};

use crate::market::{MarketRun, Sweep};
use crate::model::SystemCase;
use crate::pricing::PriceSet;
use crate::settlement::{FtrFlows, FtrSettlement};

pub const SCHEDULE_HEADER: [&str; 7] = [
    "hour",
    "unit",
    "on",
    "dispatch_mw",
    "reserve_up_mw",
    "reserve_down_mw",
    "bus",
];
pub const PRICES_HEADER: [&str; 5] = ["hour", "bus", "lmp", "ump_up", "ump_down"];
pub const SETTLEMENT_HEADER: [&str; 4] = ["participant", "hour", "component", "amount"];
pub const CCG_HEADER: [&str; 5] = [
    "round",
    "master_cost",
    "max_violation_mw",
    "worst_hour",
    "added_scenario",
];
pub const SWEEP_HEADER: [&str; 8] = [
    "lambda_delta",
    "lambda",
    "cost",
    "uncertainty_charges",
    "reserve_credits",
    "residue",
    "iterations",
    "error",
];
pub const FTR_HEADER: [&str; 6] = [
    "hour",
    "credit",
    "congestion_rent",
    "underfunding",
    "residue",
    "covered",
];

pub fn money(v: f64) -> String {
    format!("{:.2}", clean(v))
}

pub fn price(v: f64) -> String {
    format!("{:.3}", clean(v))
}

// Avoids printing "-0.000".
fn clean(v: f64) -> f64 {
    if v.abs() < 5e-10 {
        0.0
    } else {
        v
    }
}

fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn schedule_csv(case: &SystemCase, run: &MarketRun) -> String {
    let s = &run.schedule;
    let rows = (0..case.horizon).flat_map(|t| {
        case.units.iter().enumerate().map(move |(i, u)| {
            vec![
                (t + 1).to_string(),
                u.id.clone(),
                u8::from(s.commitment[i][t]).to_string(),
                price(s.dispatch[i][t]),
                price(s.reserve_up[i][t]),
                price(s.reserve_down[i][t]),
                (u.bus + 1).to_string(),
            ]
        })
    });
    write_csv(&SCHEDULE_HEADER, rows)
}

pub fn prices_csv(case: &SystemCase, prices: &PriceSet) -> String {
    let rows = (0..case.horizon).flat_map(|t| {
        (0..case.buses).map(move |b| {
            vec![
                (t + 1).to_string(),
                (b + 1).to_string(),
                price(prices.lmp[b][t]),
                price(prices.ump_up[b][t]),
                price(prices.ump_down[b][t]),
            ]
        })
    });
    write_csv(&PRICES_HEADER, rows)
}

pub fn settlement_csv(case: &SystemCase, run: &MarketRun) -> String {
    let st = &run.settlement;
    let mut rows = Vec::new();
    for t in 0..case.horizon {
        let h = (t + 1).to_string();
        for (i, u) in case.units.iter().enumerate() {
            rows.push(vec![
                u.id.clone(),
                h.clone(),
                "energy".into(),
                money(st.energy.generators[i][t]),
            ]);
            rows.push(vec![u.id.clone(), h.clone(), "reserve".into(), money(st.reserve[i][t])]);
        }
        for (k, dev) in case.storage.iter().enumerate() {
            let name = if dev.id.is_empty() {
                format!("S{}", k + 1)
            } else {
                dev.id.clone()
            };
            if let Some(e) = st.energy.storage.get(k) {
                rows.push(vec![name.clone(), h.clone(), "energy".into(), money(e[t])]);
            }
            rows.push(vec![name, h.clone(), "reserve".into(), money(st.storage_reserve[k][t])]);
        }
        for b in 0..case.buses {
            let load = format!("load{}", b + 1);
            rows.push(vec![load, h.clone(), "energy".into(), money(st.energy.loads[b][t])]);
            if run.set.bounds[b][t] > 0.0 {
                rows.push(vec![
                    format!("uncertainty{}", b + 1),
                    h.clone(),
                    "uncertainty".into(),
                    money(st.uncertainty[b][t]),
                ]);
            }
        }
        rows.push(vec!["system".into(), h.clone(), "residue".into(), money(st.residue[t])]);
        rows.push(vec![
            "system".into(),
            h,
            "congestion_rent".into(),
            money(st.congestion_rent[t]),
        ]);
    }
    write_csv(&SETTLEMENT_HEADER, rows)
}

pub fn ccg_log_csv(run: &MarketRun) -> String {
    let rows = run.log.records.iter().enumerate().map(|(n, r)| {
        vec![
            (n + 1).to_string(),
            money(r.master_cost),
            format!("{:.6}", r.max_violation),
            r.worst_hour.map_or(String::new(), |t| (t + 1).to_string()),
            r.added.map_or(String::new(), |k| (k + 1).to_string()),
        ]
    });
    write_csv(&CCG_HEADER, rows)
}

/// Bus-by-hour matrix of upward (or downward) UMPs.
pub fn heatmap(prices: &PriceSet, down: bool) -> Vec<Vec<f64>> {
    if down {
        prices.ump_down.clone()
    } else {
        prices.ump_up.clone()
    }
}

pub fn heatmap_csv(matrix: &[Vec<f64>]) -> String {
    let nt = matrix.first().map_or(0, Vec::len);
    let mut header = vec!["bus".to_string()];
    header.extend((1..=nt).map(|t| format!("h{t}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = matrix.iter().enumerate().map(|(b, row)| {
        let mut r = vec![(b + 1).to_string()];
        r.extend(row.iter().map(|&v| price(v)));
        r
    });
    write_csv(&header, rows)
}

pub fn sweep_csv(sweep: &Sweep) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), money);
    let rows = sweep.rows.iter().map(|r| {
        vec![
            r.system_budget.to_string(),
            r.bus_budget.to_string(),
            opt(r.cost),
            opt(r.uncertainty_charges),
            opt(r.reserve_credits),
            opt(r.residue),
            r.iterations.map_or(String::new(), |n| n.to_string()),
            r.error.clone().unwrap_or_default(),
        ]
    });
    write_csv(&SWEEP_HEADER, rows)
}

/// FTR funding rows `(0-based hour, settlement, residue)`.
pub fn ftr_csv(hours: &[(usize, FtrSettlement, f64)]) -> String {
    let rows = hours.iter().map(|(t, f, residue)| {
        vec![
            (t + 1).to_string(),
            money(f.credit),
            money(f.congestion_rent),
            money(f.underfunding),
            money(*residue),
            ftr_covered(f, *residue).to_string(),
        ]
    });
    write_csv(&FTR_HEADER, rows)
}

/// Residue covers underfunding up to the half-dollar settlement tolerance.
pub fn ftr_covered(f: &FtrSettlement, residue: f64) -> bool {
    residue >= f.underfunding - 0.5
}

pub fn ftr_json(case: &SystemCase, flows: &FtrFlows, hours: &[(usize, FtrSettlement, f64)]) -> Value {
    json!({
        "sft_feasible": flows.feasible,
        "lines": case.lines.iter().zip(&flows.flows).map(|(l, f)| json!({
            "line": l.id, "flow_mw": round(*f, 4), "capacity_mw": l.capacity,
        })).collect::<Vec<_>>(),
        "hours": hours.iter().map(|(t, f, r)| json!({
            "hour": t + 1,
            "credit": round(f.credit, 2),
            "congestion_rent": round(f.congestion_rent, 2),
            "underfunding": round(f.underfunding, 2),
            "residue": round(*r, 2),
            "covered": ftr_covered(f, *r),
        })).collect::<Vec<_>>(),
    })
}

fn round(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    clean((v * s).round() / s)
}

pub fn summary_json(run: &MarketRun) -> Value {
    let st = &run.settlement;
    let (lambda, lambda_delta) = run.config.budgets();
    json!({
        "mode": run.config.mode,
        "lambda": lambda,
        "lambda_delta": lambda_delta,
        "cost": round(run.cost, 2),
        "pricing_cost": round(run.rsced_cost, 2),
        "iterations": run.log.iterations(),
        "pool": run.pool.len(),
        "uncertainty_charges": round(st.total_uncertainty(), 2),
        "reserve_credits": round(st.total_reserve(), 2),
        "residue": round(st.total_residue(), 2),
        "congestion_rent": round(st.congestion_rent.iter().sum(), 2),
    })
}

/// Renders a CSV document as an aligned plain-text table.
pub fn csv_to_table(text: &str) -> String {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let rows: Vec<Vec<String>> = rdr
        .records()
        .filter_map(Result::ok)
        .map(|r| r.iter().map(str::to_string).collect())
        .collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (n, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| format!("{v:>w$}", w = width[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if n == 0 {
            let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

use umpclear::market::{clear, RunConfig};
use umpclear::model::{build_bids, load_case, load_case_file, SystemCase};
use umpclear::optim::InternalSolver;
use umpclear::scuc::{build_master, solve_master, MasterOptions};
use umpclear::storage::{storage_headroom, StorageDevice, StorageSchedule};

fn toy(loads: &[f64], initial: f64) -> SystemCase {
    let base: Vec<String> = loads.iter().map(|l| l.to_string()).collect();
    load_case(&format!(
        r#"{{
  "name": "toy", "buses": 1, "horizon": {n}, "delta_t": 1.0,
  "units": [{{"id": "U", "bus": 1, "p_min": 10.0, "p_max": 100.0, "p0": 40.0,
             "cost_a": 0.05, "cost_b": 20.0, "cost_c": 0.0,
             "ramp_up": 100.0, "ramp_down": 100.0, "startup_cost": 0.0, "shutdown_cost": 0.0,
             "min_on": 1, "min_off": 1, "t0": 5}}],
  "lines": [],
  "load": {{"base": [{base}], "distribution": {{"1": 1.0}}}},
  "uncertainty": {{"bounds": {{}}}},
  "storage": [{{"bus": 1, "capacity": 30.0, "initial": {initial}, "charge_rate": 8.0, "discharge_rate": 8.0,
               "charge_efficiency": 1.0, "discharge_efficiency": 1.0}}]
}}"#,
        n = loads.len(),
        base = base.join(", "),
    ))
    .unwrap()
}

fn opts() -> MasterOptions {
    MasterOptions {
        lines: false,
        storage: true,
        ..MasterOptions::default()
    }
}

fn idle(energy: f64, n: usize) -> StorageSchedule {
    StorageSchedule {
        energy: vec![energy; n],
        discharge: vec![0.0; n],
        charge: vec![0.0; n],
        discharging: vec![false; n],
        charging: vec![false; n],
    }
}

fn device(c: &SystemCase) -> &StorageDevice {
    &c.storage[0]
}

#[test]
fn flat_schedule_is_feasible() {
    let c = toy(&[40.0, 40.0, 40.0], 15.0);
    let mut mm = build_master(&c, &build_bids(&c.units, 5), None, &[], &opts());
    let si = mm.index.storage[0].clone();
    for t in 0..3 {
        mm.model.set_bounds(si.discharge[t], 0.0, 0.0);
        mm.model.set_bounds(si.charge[t], 0.0, 0.0);
    }
    let r = mm.solve(&InternalSolver::default()).unwrap();
    assert!(si.energy.iter().all(|&e| (r.value(e) - 15.0).abs() < 1e-9));
}

#[test]
fn reservoir_fills_to_capacity_and_no_further() {
    let c = toy(&[40.0, 40.0, 40.0], 15.0);
    let bids = build_bids(&c.units, 5);
    let fixed = |rates: [f64; 2]| {
        let mut mm = build_master(&c, &bids, None, &[], &opts());
        let si = mm.index.storage[0].clone();
        for (t, r) in rates.iter().enumerate() {
            mm.model.set_bounds(si.charge[t], *r, *r);
        }
        // Free the terminal condition so only the capacity bound can bind.
        let last = mm.model.num_rows();
        let terminal = (0..last)
            .rev()
            .find(|&i| mm.model.rows()[i].name.starts_with("terminal"))
            .unwrap();
        mm.model.set_row_bounds(umpclear::optim::RowId(terminal), 0.0, 30.0);
        mm.solve(&InternalSolver::default()).map(|r| r.value(si.energy[1]))
    };
    assert!((fixed([8.0, 7.0]).unwrap() - 30.0).abs() < 1e-9);
    assert!(fixed([8.0, 8.0]).is_err());
}

/// Cheapest schedule when the device only charges, idles or discharges at full rate.
fn brute_force(c: &SystemCase) -> f64 {
    let bid = &build_bids(&c.units, 5)[0];
    let dev = device(c);
    let n = c.horizon;
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut e = dev.initial;
        let mut cost = 0.0;
        let mut ok = true;
        let mut rest = code;
        for t in 0..n {
            let g = [-8.0, 0.0, 8.0][rest % 3];
            rest /= 3;
            e -= g;
            let p = c.total_load(t) - g;
            if !(0.0..=dev.capacity).contains(&e) || !(10.0..=100.0).contains(&p) {
                ok = false;
                break;
            }
            cost += bid.cost_at(p);
        }
        if ok && (e - dev.initial).abs() < 1e-9 {
            best = best.min(cost);
        }
    }
    best
}

#[test]
fn arbitrage_charges_in_the_valley_and_discharges_at_the_peak() {
    let c = toy(&[30.0, 55.0, 80.0], 15.0);
    let (_, r, s) = solve_master(
        &c,
        &build_bids(&c.units, 5),
        None,
        &[],
        &opts(),
        &InternalSolver::default(),
    )
    .unwrap();
    let oracle = brute_force(&c);
    assert!((r.objective - oracle).abs() < 1e-6, "{} vs {oracle}", r.objective);
    let st = &s.storage[0];
    assert!(st.charge[0] > 7.99 && st.discharge[2] < -7.99, "{st:?}");
    for t in 0..3 {
        assert!(!(st.charging[t] && st.discharging[t]));
    }
    let net: f64 = (0..3).map(|t| st.discharge[t] + st.charge[t]).sum();
    assert!(net.abs() < 1e-9);
}

#[test]
fn idle_device_offers_full_rate_both_ways() {
    let c = toy(&[40.0], 15.0);
    assert_eq!(storage_headroom(&idle(15.0, 1), device(&c), 0, 1.0), (8.0, -8.0));
}

#[test]
fn empty_reservoir_offers_no_upward_reserve() {
    let c = toy(&[40.0], 0.0);
    let (up, down) = storage_headroom(&idle(0.0, 1), device(&c), 0, 1.0);
    assert_eq!(up, 0.0);
    assert_eq!(down, -8.0);
}

#[test]
fn storage_lowers_cost_and_the_peak_upward_price() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/");
    let plain = load_case_file(format!("{dir}garver6.json")).unwrap();
    let with = load_case_file(format!("{dir}garver6_storage.json")).unwrap();
    let bus = with.storage[0].bus;
    let base = clear(&plain, &RunConfig::robust(1.0, 2.0), &InternalSolver::default()).unwrap();
    let cfg = RunConfig {
        storage: true,
        ..RunConfig::robust(1.0, 2.0)
    };
    let run = clear(&with, &cfg, &InternalSolver::default()).unwrap();
    assert!(run.cost <= base.cost + 1e-6, "{} vs {}", run.cost, base.cost);
    // Hour with the highest upward price at the device bus before it was added.
    let t = (0..plain.horizon)
        .max_by(|&a, &b| base.prices.ump_up[bus][a].total_cmp(&base.prices.ump_up[bus][b]))
        .unwrap();
    assert!(run.prices.ump_up[bus][t] < base.prices.ump_up[bus][t]);
    let st = &run.schedule.storage[0];
    assert!((0..plain.horizon).all(|t| !(st.charging[t] && st.discharging[t])));
}

#[test]
fn single_bus_energy_payments_balance() {
    let c = toy(&[30.0, 55.0, 80.0], 15.0);
    let cfg = RunConfig {
        storage: true,
        lines: false,
        mode: umpclear::market::Mode::Deterministic,
        ..RunConfig::default()
    };
    let run = clear(&c, &cfg, &InternalSolver::default()).unwrap();
    let e = &run.settlement.energy;
    for t in 0..3 {
        let paid = e.loads[0][t];
        let credited = e.generators[0][t] + e.storage[0][t];
        assert!((paid - credited).abs() < 1e-6, "hour {}: {paid} vs {credited}", t + 1);
    }
    // Charging in the valley pays, discharging at the peak earns.
    assert!(e.storage[0][0] < 0.0 && e.storage[0][2] > 0.0);
}

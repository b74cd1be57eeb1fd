use std::sync::OnceLock;

use umpclear::market::{clear, shift_factors, MarketRun, RunConfig};
use umpclear::model::{build_bids, load_case_file, SystemCase};
use umpclear::optim::InternalSolver;
use umpclear::pricing::{build_rsced, extract_prices, solve_rsced, verify_sign_property};
use umpclear::scuc::MasterOptions;

const TOL: f64 = 0.01;

fn garver() -> SystemCase {
    load_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/garver6.json")).unwrap()
}

fn robust() -> &'static MarketRun {
    static RUN: OnceLock<MarketRun> = OnceLock::new();
    RUN.get_or_init(|| clear(&garver(), &RunConfig::robust(1.0, 2.0), &InternalSolver::default()).unwrap())
}

fn copper_plate() -> &'static MarketRun {
    static RUN: OnceLock<MarketRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = RunConfig {
            lines: false,
            ..RunConfig::robust(0.8, 2.0)
        };
        clear(&garver(), &cfg, &InternalSolver::default()).unwrap()
    })
}

fn column(m: &[Vec<f64>], t: usize) -> Vec<f64> {
    m.iter().map(|r| r[t]).collect()
}

fn assert_row(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= tol, "got {got:?}, want {want:?}");
    }
}

#[test]
fn pricing_lp_keeps_the_master_cost() {
    let run = robust();
    assert!(
        (run.rsced_cost - run.cost).abs() <= 1e-6 * run.cost,
        "{} vs {}",
        run.rsced_cost,
        run.cost
    );
}

#[test]
fn congested_hour_prices() {
    let p = &robust().prices;
    assert_row(
        &column(&p.lmp, 20),
        &[14.972, 32.638, 34.404, 43.709, 41.943, 35.263],
        TOL,
    );
    assert_row(
        &column(&p.ump_up, 20),
        &[14.868, 14.868, 16.634, 25.939, 24.173, 17.493],
        TOL,
    );
    assert_row(&column(&p.ump_down, 20), &[-17.666, 0.0, 0.0, 0.0, 0.0, 0.0], TOL);
}

#[test]
fn uncongested_hour_prices_are_uniform() {
    let p = &robust().prices;
    assert_row(&column(&p.lmp, 21), &[47.562; 6], TOL);
    assert_row(&column(&p.ump_up, 21), &[29.812; 6], TOL);
    assert_row(&column(&p.ump_down, 21), &[0.0; 6], TOL);
}

#[test]
fn copper_plate_prices_and_opportunity_cost() {
    let p = &copper_plate().prices;
    assert_row(&column(&p.lmp, 20), &[32.638; 6], TOL);
    assert_row(&column(&p.ump_up, 20), &[17.474; 6], TOL);
    assert_row(&column(&p.opportunity_up, 20), &[17.474, 0.0, 0.0], TOL);
}

#[test]
fn scenario_prices_share_the_sign_of_their_deviation() {
    let run = robust();
    let rep = verify_sign_property(&run.prices, &run.pool, 1e-9);
    assert!(rep.checked > 0);
    assert!(rep.holds(), "{:?}", rep.violations);
    let pi = &run.prices.scenario_price[0];
    assert!(pi[0][20] >= 0.0);
    // Negative deviations may carry a zero price.
    assert!(pi[0][21].abs() < 1e-9 && pi[2][21].abs() < 1e-9);
    assert!(verify_sign_property(&run.prices, &[], 0.0).holds());
}

#[test]
fn aggregated_prices_sum_their_scenarios() {
    let p = &robust().prices;
    for b in 0..p.lmp.len() {
        for t in 0..p.lmp[b].len() {
            let up: f64 = p.k_up[b][t].iter().map(|&k| p.scenario_price[k][b][t]).sum();
            let down: f64 = p.k_down[b][t].iter().map(|&k| p.scenario_price[k][b][t]).sum();
            assert_eq!(p.ump_up[b][t] - up, 0.0);
            assert_eq!(p.ump_down[b][t] - down, 0.0);
            assert!(p.ump_up[b][t] >= 0.0 && p.ump_down[b][t] <= 0.0);
        }
    }
}

#[test]
fn interior_units_set_the_price_at_their_bus() {
    let c = garver();
    let bids = build_bids(&c.units, 5);
    let p = &robust().prices;
    // G2 inside its first block, G1 inside its fourth.
    assert!((p.lmp[1][20] - bids[1].segments[0].marginal_cost).abs() <= TOL);
    assert!((p.lmp[0][20] - bids[0].segments[3].marginal_cost).abs() <= TOL);
    // G3's reserve is capacity-limited: its spread is the upward UMP.
    let g3 = p.lmp[5][20] - 17.77;
    assert!((g3 - p.ump_up[5][20]).abs() <= TOL, "{g3}");
}

#[test]
fn hours_without_binding_lines_have_uniform_prices() {
    let p = &robust().prices;
    let nt = p.lmp[0].len();
    let mut seen = 0;
    for t in 0..nt {
        let congested = (0..p.mu_plus.len()).any(|l| p.line_price(l, t) > 1e-9);
        if congested {
            continue;
        }
        seen += 1;
        for m in [&p.lmp, &p.ump_up, &p.ump_down] {
            let col = column(m, t);
            assert!(
                col.iter().all(|v| (v - col[0]).abs() <= 1e-6),
                "hour {}: {col:?}",
                t + 1
            );
        }
    }
    assert!(seen > 0);
}

#[test]
fn empty_pool_gives_plain_dispatch_prices() {
    let c = garver();
    let sf = shift_factors(&c).unwrap();
    let bids = build_bids(&c.units, 5);
    let run = robust();
    let mm = build_rsced(
        &c,
        &bids,
        Some(&sf),
        &run.schedule.commitment,
        &[],
        &MasterOptions::robust(),
    );
    let r = solve_rsced(&mm, &InternalSolver::default()).unwrap();
    let p = extract_prices(&c, &mm, &r, Some(&sf)).unwrap();
    assert!(p.scenario_price.is_empty());
    assert!(p.ump_up.iter().chain(&p.ump_down).flatten().all(|&v| v == 0.0));
    assert!(r.objective <= run.rsced_cost + 1e-6);
}

#[test]
fn pricing_lp_satisfies_strong_duality_and_complementarity() {
    let c = garver();
    let sf = shift_factors(&c).unwrap();
    let bids = build_bids(&c.units, 5);
    let run = robust();
    let mm = build_rsced(
        &c,
        &bids,
        Some(&sf),
        &run.schedule.commitment,
        &run.pool,
        &MasterOptions::robust(),
    );
    let r = solve_rsced(&mm, &InternalSolver::default()).unwrap();
    let lp = mm.model.relaxed();
    let gap = (r.objective - r.dual_objective(&lp)).abs();
    assert!(gap <= 1e-6 * (1.0 + r.objective.abs()), "duality gap {gap}");
    for (row, (&y, &act)) in lp.rows().iter().zip(r.row_duals.iter().zip(&r.row_activity)) {
        // Duals below the solver's dual tolerance count as zero.
        let slack = if y > 1e-9 {
            act - row.lower
        } else if y < -1e-9 {
            row.upper - act
        } else {
            0.0
        };
        assert!((y * slack).abs() <= 1e-5, "{} y {y} slack {slack}", row.name);
    }
}

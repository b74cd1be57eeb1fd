use std::sync::OnceLock;

use proptest::prelude::*;
use umpclear::market::{clear, shift_factors, MarketRun, RunConfig};
use umpclear::model::{compute_shift_factors, load_case_file, Line, SystemCase};
use umpclear::optim::InternalSolver;
use umpclear::scuc::line_capacities;
use umpclear::settlement::{
    ftr_settle, ftr_sft, revenue_residue, settle_energy, settle_reserve, settle_uncertainty, FtrPortfolio,
    SettlementError,
};

const MONEY: f64 = 0.5;
const REFERENCE: [f64; 6] = [202.3429, 23.2771, -55.772, -94.924, -94.924, 20.0];

fn garver() -> SystemCase {
    load_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/garver6.json")).unwrap()
}

fn run_at(lam: f64, ld: f64, lines: bool) -> MarketRun {
    let cfg = RunConfig {
        lines,
        ..RunConfig::robust(lam, ld)
    };
    clear(&garver(), &cfg, &InternalSolver::default()).unwrap()
}

fn robust() -> &'static MarketRun {
    static RUN: OnceLock<MarketRun> = OnceLock::new();
    RUN.get_or_init(|| run_at(1.0, 2.0, true))
}

fn copper_plate() -> &'static MarketRun {
    static RUN: OnceLock<MarketRun> = OnceLock::new();
    RUN.get_or_init(|| run_at(0.8, 2.0, false))
}

fn near(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

#[test]
fn energy_is_paid_at_the_bus_price() {
    let c = garver();
    let run = robust();
    let e = settle_energy(&c, &run.schedule, &run.prices);
    near(e.generators[0][20], 195.19 * 14.972, MONEY);
    near(e.loads[2][20], 47.462 * 34.404, MONEY);
    // G3 is off at hour 1.
    assert_eq!(e.generators[2][0], 0.0);
}

#[test]
fn reserve_and_uncertainty_at_the_congested_hour() {
    let run = robust();
    let st = &run.settlement;
    near(st.reserve[0][20], 780.82, MONEY);
    near(st.reserve[1][20], 178.42, MONEY);
    near(st.reserve[2][20], 17.493 * 3.46, MONEY);
    near(st.uncertainty[0][20], 14.868 * 31.15 + 17.666 * 31.15, MONEY);
    near(st.uncertainty[2][20], 138.23, MONEY);
    near(st.residue[20], 131.9, MONEY);
}

#[test]
fn uniform_price_hour_leaves_no_residue() {
    near(robust().settlement.residue[21], 0.0, 1e-6);
}

#[test]
fn half_budget_pays_no_reserve() {
    let run = run_at(0.5, 2.0, true);
    assert!(run.settlement.reserve.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn copper_plate_credits_equal_charges() {
    let st = &copper_plate().settlement;
    let theta: f64 = st.reserve.iter().flatten().sum();
    let psi: f64 = st.uncertainty.iter().flatten().sum();
    near(theta, psi, 1e-6);
    near(
        st.uncertainty[0][20] + st.uncertainty[0][21],
        17.474 * 0.8 * (31.15 + 31.99),
        MONEY,
    );
}

#[test]
fn residue_is_positive_exactly_when_prices_vary_by_bus() {
    for run in [robust(), copper_plate()] {
        let p = &run.prices;
        for (t, &r) in run.settlement.residue.iter().enumerate() {
            assert!(r >= -1e-6, "hour {} residue {r}", t + 1);
            let spread: Vec<f64> = (0..p.lmp.len()).map(|b| p.ump_up[b][t] - p.ump_down[b][t]).collect();
            let hi = spread.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = spread.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(
                r > 1e-6,
                hi - lo > 1e-6,
                "hour {} residue {r} spread {}",
                t + 1,
                hi - lo
            );
        }
    }
}

#[test]
fn reference_portfolio_funding_at_the_congested_hour() {
    let c = garver();
    let sf = shift_factors(&c).unwrap();
    let run = robust();
    let pf = FtrPortfolio::new(REFERENCE.to_vec()).unwrap();
    let f = ftr_settle(&pf, &run.prices, &run.schedule, &sf, 20).unwrap();
    near(f.credit, 5554.77, MONEY);
    near(f.congestion_rent, 5422.87, MONEY);
    near(f.underfunding, 131.90, MONEY);
    near(f.underfunding, run.settlement.residue[20], MONEY);
    near(run.schedule.flows[1][20], 97.6254, 0.05);
    let flows = ftr_sft(&pf, &sf, &line_capacities(&c)).unwrap();
    near(flows.flows[1], 100.0, 1e-3);
    let calm = ftr_settle(&pf, &run.prices, &run.schedule, &sf, 21).unwrap();
    assert_eq!((calm.credit, calm.underfunding), (0.0, 0.0));
}

#[test]
fn base_injections_are_fully_funded() {
    let c = garver();
    let sf = shift_factors(&c).unwrap();
    let run = robust();
    let t = 20;
    let mut inj: Vec<f64> = c.bus_loads(t).iter().map(|l| -l).collect();
    for (i, u) in c.units.iter().enumerate() {
        inj[u.bus] += run.schedule.dispatch[i][t];
    }
    let pf = FtrPortfolio::new(inj).unwrap();
    let f = ftr_settle(&pf, &run.prices, &run.schedule, &sf, t).unwrap();
    near(f.underfunding, 0.0, 1e-6);
}

#[test]
fn zero_and_oversized_portfolios() {
    let c = garver();
    let sf = shift_factors(&c).unwrap();
    let zero = ftr_sft(&FtrPortfolio::new(vec![0.0; 6]).unwrap(), &sf, &line_capacities(&c)).unwrap();
    assert!(zero.feasible && zero.flows.iter().all(|&f| f == 0.0));

    let line = Line {
        id: "a".into(),
        from_bus: 0,
        to_bus: 1,
        reactance: 0.1,
        capacity: 50.0,
    };
    let sf2 = compute_shift_factors(&[line], 2, 0).unwrap();
    let big = FtrPortfolio::new(vec![100.0, -100.0]).unwrap();
    assert!(!ftr_sft(&big, &sf2, &[50.0]).unwrap().feasible);
    assert!(matches!(
        FtrPortfolio::new(vec![1.0, 0.0]),
        Err(SettlementError::Unbalanced { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn settlement_scales_with_prices(alpha in -5.0f64..5.0) {
        let c = garver();
        let run = robust();
        let mut scaled = run.prices.clone();
        for m in [&mut scaled.ump_up, &mut scaled.ump_down] {
            m.iter_mut().flatten().for_each(|v| *v *= alpha);
        }
        let theta = settle_reserve(&c, &run.schedule, &scaled);
        let psi = settle_uncertainty(&run.set, &scaled);
        let res = revenue_residue(&psi, &theta);
        let base = &run.settlement;
        for (a, b) in theta.iter().flatten().zip(base.reserve.iter().flatten()) {
            prop_assert!((a - alpha * b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        for (a, b) in psi.iter().flatten().zip(base.uncertainty.iter().flatten()) {
            prop_assert!((a - alpha * b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        for (a, b) in res.iter().zip(&base.residue) {
            prop_assert!((a - alpha * b).abs() <= 1e-7 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn feasible_portfolios_are_bounded_by_line_prices(
        raw in proptest::collection::vec(-100.0f64..100.0, 6),
        hour in 0usize..24,
    ) {
        let c = garver();
        let sf = shift_factors(&c).unwrap();
        let caps = line_capacities(&c);
        let mean = raw.iter().sum::<f64>() / 6.0;
        let mut amounts: Vec<f64> = raw.iter().map(|v| v - mean).collect();
        // Shrink onto the feasible region.
        let flows = sf.flows(&amounts);
        let worst = flows.iter().zip(&caps).map(|(f, c)| f.abs() / c).fold(0.0, f64::max);
        if worst > 1.0 {
            amounts.iter_mut().for_each(|v| *v /= worst);
        }
        let pf = FtrPortfolio::new(amounts).unwrap();
        prop_assert!(ftr_sft(&pf, &sf, &caps).unwrap().feasible);
        let run = robust();
        let f = ftr_settle(&pf, &run.prices, &run.schedule, &sf, hour).unwrap();
        let bound: f64 = caps.iter().enumerate().map(|(l, c)| run.prices.line_price(l, hour) * c).sum();
        prop_assert!(f.credit <= bound + 1e-6);
    }
}

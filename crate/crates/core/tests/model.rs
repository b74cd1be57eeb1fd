use proptest::prelude::*;
use umpclear::model::{
    build_bid_curve, bus_loads, compute_shift_factors, load_case, load_case_file, CaseError, Line, NetworkError,
    SystemCase, Unit,
};

fn garver() -> SystemCase {
    load_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/garver6.json")).unwrap()
}

fn garver_text() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases/garver6.json")).unwrap()
}

fn line(id: &str, f: usize, t: usize, x: f64, cap: f64) -> Line {
    Line {
        id: id.into(),
        from_bus: f,
        to_bus: t,
        reactance: x,
        capacity: cap,
    }
}

fn unit(a: f64, b: f64, p_min: f64, p_max: f64) -> Unit {
    Unit {
        id: "U".into(),
        bus: 0,
        p_min,
        p_max,
        p0: p_min,
        cost_a: a,
        cost_b: b,
        cost_c: 10.0,
        ramp_up: 10.0,
        ramp_down: 10.0,
        startup_cost: 0.0,
        shutdown_cost: 0.0,
        min_on: 1,
        min_off: 1,
        t0: 1,
    }
}

#[test]
fn six_bus_case_loads() {
    let c = garver();
    assert_eq!((c.units.len(), c.lines.len(), c.buses, c.horizon), (3, 7, 6, 24));
    assert_eq!(c.units[2].bus, 5);
    assert_eq!(c.units[2].t0, -2);
    assert!((c.load.base[20] - 237.31).abs() < 1e-12);
    assert_eq!(c.uncertainty[0][20], 31.15);
    assert_eq!(c.uncertainty[2][21], 8.53);
    assert_eq!(c.uncertainty[1][20], 0.0);
}

#[test]
fn case_round_trips_through_json() {
    let c = garver();
    let again = load_case(&c.to_json()).unwrap();
    assert_eq!(c, again);
}

#[test]
fn inverted_generation_limits_are_rejected() {
    let text = garver_text().replacen("\"p_min\": 100.0", "\"p_min\": 300.0", 1);
    match load_case(&text) {
        Err(CaseError::Invalid(msg)) => assert!(msg.contains("G1"), "{msg}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn distribution_must_sum_to_one() {
    let text = garver_text().replace("\"5\": 0.4", "\"5\": 0.3");
    match load_case(&text) {
        Err(CaseError::Invalid(msg)) => assert!(msg.contains("distribution"), "{msg}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn missing_field_is_named() {
    let text = garver_text().replacen("\"ramp_up\": 24.0,", "", 1);
    match load_case(&text) {
        Err(CaseError::Parse(msg)) => assert!(msg.contains("ramp_up"), "{msg}"),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn line_with_bad_reactance_is_named() {
    let text = garver_text().replacen("\"reactance\": 0.17", "\"reactance\": 0.0", 1);
    match load_case(&text) {
        Err(CaseError::Invalid(msg)) => assert!(msg.contains("L1"), "{msg}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn bid_curves_match_reference_marginal_costs() {
    let c = garver();
    let g1 = build_bid_curve(&c.units[0], 5);
    assert_eq!(g1.segments.len(), 5);
    assert!((g1.segments[0].lo - 100.0).abs() < 1e-12 && (g1.segments[0].hi - 124.0).abs() < 1e-12);
    assert!((g1.segments[0].marginal_cost - 14.396).abs() < 1e-9);
    assert!((g1.segments[4].lo - 196.0).abs() < 1e-12 && (g1.segments[4].hi - 220.0).abs() < 1e-12);
    assert!((g1.segments[4].marginal_cost - 15.164).abs() < 1e-9);
    let g3 = build_bid_curve(&c.units[2], 5);
    let s = g3.segments.iter().find(|s| (s.lo - 16.0).abs() < 1e-9).unwrap();
    assert!((s.hi - 18.0).abs() < 1e-12);
    assert!((s.marginal_cost - 17.77).abs() < 1e-9);
    let g3_expected = [17.71, 17.73, 17.75, 17.77, 17.79];
    for (seg, e) in g3.segments.iter().zip(g3_expected) {
        assert!((seg.marginal_cost - e).abs() < 1e-9);
    }
    let g2 = build_bid_curve(&c.units[1], 5);
    let expected = [32.638, 32.674, 32.71, 32.746, 32.782];
    for (seg, e) in g2.segments.iter().zip(expected) {
        assert!((seg.marginal_cost - e).abs() < 1e-9, "{} vs {e}", seg.marginal_cost);
    }
}

#[test]
fn linear_cost_gives_flat_bid() {
    let b = build_bid_curve(&unit(0.0, 21.0, 10.0, 60.0), 5);
    assert!(b.segments.iter().all(|s| s.marginal_cost == 21.0));
}

#[test]
fn degenerate_range_gives_single_segment() {
    let b = build_bid_curve(&unit(0.01, 20.0, 30.0, 30.0), 5);
    assert_eq!(b.segments.len(), 1);
    assert!((b.segments[0].marginal_cost - 20.6).abs() < 1e-12);
}

#[test]
fn bus_loads_split_by_distribution() {
    let c = garver();
    let l = bus_loads(&c.load, 20);
    assert!((l[2] - 237.31 * 0.2).abs() < 1e-12);
    assert!((l[2] - 47.462).abs() < 1e-9);
    assert!((l[3] - 94.924).abs() < 1e-9);
    assert_eq!(l[0], 0.0);
}

#[test]
fn two_bus_shift_factor_is_unity() {
    let sf = compute_shift_factors(&[line("a", 0, 1, 0.1, 10.0)], 2, 0).unwrap();
    assert_eq!(sf.get(0, 0), 0.0);
    assert!((sf.get(0, 1) + 1.0).abs() < 1e-12);
}

#[test]
fn parallel_lines_split_by_reactance() {
    let lines = [line("a", 0, 1, 1.0, 10.0), line("b", 0, 1, 2.0, 10.0)];
    let sf = compute_shift_factors(&lines, 2, 0).unwrap();
    assert!((sf.get(0, 1) + 2.0 / 3.0).abs() < 1e-12);
    assert!((sf.get(1, 1) + 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn disconnected_network_lists_isolated_buses() {
    let lines = [line("a", 0, 1, 1.0, 10.0), line("b", 2, 3, 1.0, 10.0)];
    assert_eq!(
        compute_shift_factors(&lines, 4, 0),
        Err(NetworkError::Disconnected(vec![3, 4]))
    );
}

proptest! {
    #[test]
    fn shift_factor_flows_obey_kirchhoff(inj in proptest::collection::vec(-100.0f64..100.0, 5)) {
        let c = garver();
        let sf = compute_shift_factors(&c.lines, c.buses, 0).unwrap();
        let mut p = vec![0.0; 6];
        p[1..].copy_from_slice(&inj);
        p[0] = -inj.iter().sum::<f64>();
        let flows = sf.flows(&p);
        for b in 0..6 {
            let mut out = 0.0;
            for (l, ln) in c.lines.iter().enumerate() {
                if ln.from_bus == b { out += flows[l]; }
                if ln.to_bus == b { out -= flows[l]; }
            }
            prop_assert!((out - p[b]).abs() < 1e-8, "bus {} out {} inj {}", b, out, p[b]);
        }
    }

    #[test]
    fn bid_cost_is_exact_at_breakpoints_and_bounded_inside(
        a in 0.0f64..0.05, b in 5.0f64..40.0, p_min in 0.0f64..100.0, width in 1.0f64..200.0, frac in 0.0f64..1.0
    ) {
        let u = unit(a, b, p_min, p_min + width);
        let bid = build_bid_curve(&u, 5);
        for s in &bid.segments {
            prop_assert!((bid.cost_at(s.hi) - u.fuel_cost(s.hi)).abs() <= 1e-9 * (1.0 + u.fuel_cost(s.hi)));
        }
        let p = p_min + frac * width;
        let seg = bid.segments.iter().find(|s| p <= s.hi).unwrap();
        let bound = a * (p - seg.lo) * (seg.hi - p);
        let err = bid.cost_at(p) - u.fuel_cost(p);
        prop_assert!(err >= -1e-9 && err <= bound + 1e-9, "err {} bound {}", err, bound);
        // nondecreasing and contiguous
        for w in bid.segments.windows(2) {
            prop_assert!(w[0].hi == w[1].lo && w[0].marginal_cost <= w[1].marginal_cost);
        }
        prop_assert_eq!(build_bid_curve(&u, 5), bid);
    }
}

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use umpclear::optim::{
    solve_lp, solve_mip, Certificate, LinearModel, MipOptions, OptimError, Sense, Status, VarId, DUALITY_TOL,
    FEASIBILITY_TOL, INTEGRALITY_TOL,
};

/// Gaussian elimination on a small dense system; `None` when singular.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Best objective over all basic feasible solutions of `Ax = b, x >= 0`.
fn basis_enumeration(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let (m, n) = (a.len(), c.len());
    let mut best = f64::INFINITY;
    for cols in combinations(n, m) {
        let sub: Vec<Vec<f64>> = a.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect();
        if let Some(xb) = gauss(sub, b.to_vec()) {
            if xb.iter().all(|&v| v >= -1e-9) {
                let obj: f64 = cols.iter().zip(&xb).map(|(&j, v)| c[j] * v).sum();
                best = best.min(obj);
            }
        }
    }
    best
}

#[test]
fn single_bound_row_dual_is_one() {
    let mut m = LinearModel::new("x>=3");
    let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let r = m.add_constraint("lb", vec![(x, 1.0)], Sense::Ge, 3.0);
    let res = solve_lp(&m).unwrap();
    assert_eq!(res.status, Status::Optimal);
    assert!((res.value(x) - 3.0).abs() < 1e-12);
    assert!((res.dual(r) - 1.0).abs() < 1e-12);
}

#[test]
fn random_equality_lps_match_basis_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..25 {
        let (rows, cols) = (5, 8);
        let a: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let x0: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.0..2.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&x0).map(|(u, v)| u * v).sum())
            .collect();
        let c: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut m = LinearModel::new("rand");
        let vars: Vec<VarId> = c
            .iter()
            .enumerate()
            .map(|(j, &cj)| m.add_var(format!("x{j}"), 0.0, f64::INFINITY, cj))
            .collect();
        for (i, row) in a.iter().enumerate() {
            m.add_constraint(
                format!("r{i}"),
                vars.iter().copied().zip(row.iter().copied()).collect(),
                Sense::Eq,
                b[i],
            );
        }
        let res = solve_lp(&m).unwrap();
        assert_eq!(res.status, Status::Optimal);
        let oracle = basis_enumeration(&a, &b, &c);
        assert!(
            (res.objective - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
            "{} vs {}",
            res.objective,
            oracle
        );
    }
}

#[test]
fn degenerate_ties_resolve_to_lowest_index() {
    // Both vertices (1,0) and (0,1) are optimal.
    let build = || {
        let mut m = LinearModel::new("tie");
        let x = m.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = m.add_var("y", 0.0, f64::INFINITY, -1.0);
        m.add_constraint("cap", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        m.add_constraint("dup", vec![(x, 2.0), (y, 2.0)], Sense::Le, 2.0);
        m
    };
    let first = solve_lp(&build()).unwrap();
    assert_eq!(first.x, vec![1.0, 0.0]);
    for _ in 0..5 {
        let again = solve_lp(&build()).unwrap();
        assert_eq!(again.x, first.x);
        assert_eq!(again.row_duals, first.row_duals);
    }
}

#[test]
fn infeasible_lp_carries_farkas_certificate() {
    let mut m = LinearModel::new("inf");
    let x = m.add_var("x", 0.0, 4.0, 1.0);
    let y = m.add_var("y", 0.0, 4.0, 1.0);
    m.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 5.0);
    m.add_constraint("b", vec![(x, 1.0), (y, -1.0)], Sense::Eq, 4.0);
    let res = solve_lp(&m).unwrap();
    assert_eq!(res.status, Status::Infeasible);
    let Some(Certificate::Farkas(yv)) = res.certificate else {
        panic!("missing certificate");
    };
    // max over the box of y^T(Ax) - y^T r must be negative
    let mut g = vec![0.0; m.num_vars()];
    for (row, &yi) in m.rows().iter().zip(&yv) {
        for &(v, c) in &row.terms {
            g[v.0] += yi * c;
        }
    }
    let mut sup = 0.0;
    for (v, &gj) in m.vars().iter().zip(&g) {
        sup += if gj > 0.0 { gj * v.upper } else { gj * v.lower };
    }
    for (row, &yi) in m.rows().iter().zip(&yv) {
        sup += if yi > 0.0 { -yi * row.lower } else { -yi * row.upper };
    }
    assert!(sup < -1e-9, "certificate sup {sup}");
}

#[test]
fn knapsack_picks_the_heavier_item() {
    let mut m = LinearModel::new("knap");
    let x = m.add_binary("x", -3.0);
    let y = m.add_binary("y", -2.0);
    m.add_constraint("one", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
    let res = solve_mip(&m, &MipOptions::default()).unwrap();
    assert!((-res.objective - 3.0).abs() < 1e-12);
}

#[test]
fn node_limit_reports_incumbent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut m = LinearModel::new("hard");
    let vars: Vec<VarId> = (0..12)
        .map(|j| m.add_binary(format!("b{j}"), -rng.gen_range(1.0..10.0)))
        .collect();
    let w: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, rng.gen_range(1.0..10.0))).collect();
    m.add_constraint("w", w, Sense::Le, 17.5);
    let opts = MipOptions {
        node_limit: 3,
        heuristic_every: 0,
        ..MipOptions::default()
    };
    match solve_mip(&m, &opts) {
        Err(OptimError::NodeLimit { limit, .. }) => assert_eq!(limit, 3),
        other => panic!("expected node limit, got {other:?}"),
    }
}

fn random_binary_model(rng: &mut ChaCha8Rng, n: usize) -> LinearModel {
    let mut m = LinearModel::new("bin");
    let vars: Vec<VarId> = (0..n)
        .map(|j| m.add_binary(format!("b{j}"), rng.gen_range(-10.0..4.0)))
        .collect();
    for i in 0..rng.gen_range(1..4) {
        let terms: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, rng.gen_range(-2.0..6.0))).collect();
        let rhs = rng.gen_range(2.0..12.0);
        m.add_constraint(format!("c{i}"), terms, Sense::Le, rhs);
    }
    m
}

fn exhaustive(m: &LinearModel) -> f64 {
    let n = m.num_vars();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
        if m.max_violation(&x) <= 1e-9 {
            best = best.min(m.objective_value(&x));
        }
    }
    best
}

#[test]
fn random_binary_programs_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let m = random_binary_model(&mut rng, 10);
        let oracle = exhaustive(&m);
        let res = solve_mip(&m, &MipOptions::default()).unwrap();
        assert_eq!(res.status, Status::Optimal);
        assert!(
            (res.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
            "{} vs {}",
            res.objective,
            oracle
        );
        assert!(m.max_integrality_violation(&res.x) <= INTEGRALITY_TOL);
    }
}

#[test]
fn mixed_integer_program_with_continuous_part() {
    // min -x - 2y + z  s.t. x + y <= 3.5, y - z <= 0.5, z <= 2, x,y integer
    let mut m = LinearModel::new("mixed");
    let x = m.add_integer("x", 0.0, 5.0, -1.0);
    let y = m.add_integer("y", 0.0, 5.0, -2.0);
    let z = m.add_var("z", 0.0, 2.0, 1.0);
    m.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Sense::Le, 3.5);
    m.add_constraint("b", vec![(y, 1.0), (z, -1.0)], Sense::Le, 0.5);
    let res = solve_mip(&m, &MipOptions::default()).unwrap();
    // y=2 needs z>=1.5 -> -1 - 4 + 1.5 = -3.5; y=1 needs z>=0.5 -> -2 - 2 + 0.5 = -3.5; y=0 -> -3
    assert!((res.objective + 3.5).abs() < 1e-9, "{}", res.objective);
    let _ = (x, y, z);
}

fn random_bounded_lp(seed: u64, rows: usize, cols: usize) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = LinearModel::new("prop");
    let x0: Vec<f64> = (0..cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let vars: Vec<VarId> = (0..cols)
        .map(|j| {
            let lo = if rng.gen_bool(0.2) {
                f64::NEG_INFINITY
            } else {
                x0[j] - rng.gen_range(0.0..3.0)
            };
            let up = x0[j] + rng.gen_range(0.0..3.0);
            m.add_var(format!("x{j}"), lo, up, rng.gen_range(-5.0..5.0))
        })
        .collect();
    for i in 0..rows {
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.6) {
                terms.push((v, rng.gen_range(-4.0..4.0)));
            }
        }
        let act: f64 = terms.iter().map(|&(v, c)| c * x0[v.0]).sum();
        match rng.gen_range(0..4) {
            0 => m.add_constraint(format!("r{i}"), terms, Sense::Le, act + rng.gen_range(0.0..2.0)),
            1 => m.add_constraint(format!("r{i}"), terms, Sense::Ge, act - rng.gen_range(0.0..2.0)),
            2 => m.add_constraint(format!("r{i}"), terms, Sense::Eq, act),
            _ => m.add_range(
                format!("r{i}"),
                terms,
                act - rng.gen_range(0.0..1.0),
                act + rng.gen_range(0.0..1.0),
            ),
        };
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_lps_satisfy_strong_duality_and_complementarity(seed in 0u64..u64::MAX, rows in 1usize..12, cols in 1usize..12) {
        let m = random_bounded_lp(seed, rows, cols);
        let res = solve_lp(&m).unwrap();
        prop_assume!(res.status == Status::Optimal);
        prop_assert!(m.max_violation(&res.x) <= FEASIBILITY_TOL);
        let dual = res.dual_objective(&m);
        prop_assert!((res.objective - dual).abs() <= DUALITY_TOL * (1.0 + res.objective.abs()),
            "primal {} dual {}", res.objective, dual);
        for (r, (&y, &act)) in m.rows().iter().zip(res.row_duals.iter().zip(&res.row_activity)) {
            let slack = if y > 0.0 { act - r.lower } else if y < 0.0 { r.upper - act } else { 0.0 };
            prop_assert!((y * slack).abs() <= 1e-6, "row {} y {} slack {}", r.name, y, slack);
        }
        for (v, (&d, &x)) in m.vars().iter().zip(res.reduced_costs.iter().zip(&res.x)) {
            let slack = if d > 0.0 { x - v.lower } else if d < 0.0 { v.upper - x } else { 0.0 };
            prop_assert!((d * slack).abs() <= 1e-6, "var {} d {} slack {}", v.name, d, slack);
        }
    }

    #[test]
    fn lp_solves_are_deterministic(seed in 0u64..u64::MAX) {
        let m = random_bounded_lp(seed, 6, 7);
        let a = solve_lp(&m).unwrap();
        let b = solve_lp(&m).unwrap();
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.row_duals, b.row_duals);
    }
}

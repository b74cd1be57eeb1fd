//! Depth-first branch-and-bound with best-bound backtracking.

use super::simplex::{Basis, Engine, SimplexOptions};
use super::{LinearModel, OptimError, SolveResult, Status, INTEGRALITY_TOL};

#[derive(Clone, Debug)]
pub struct MipOptions {
    /// Relative optimality gap at which a node is pruned.
    pub gap_tol: f64,
    /// Absolute gap floor used when the incumbent is near zero.
    pub abs_gap: f64,
    pub node_limit: usize,
    /// Try a rounding heuristic at the root and every this many nodes; 0 disables it.
    pub heuristic_every: usize,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            abs_gap: 1e-9,
            node_limit: 200_000,
            heuristic_every: 25,
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    changes: Vec<(usize, f64, f64)>,
    basis: Basis,
}

/// Most fractional integer variable of the highest priority present, ties by
/// lowest index.
fn branch_var(model: &LinearModel, x: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut best_key = (i32::MIN, INTEGRALITY_TOL);
    for (j, v) in model.vars().iter().enumerate() {
        if !v.integer {
            continue;
        }
        let f = x[j] - x[j].floor();
        let dist = f.min(1.0 - f);
        if dist <= INTEGRALITY_TOL {
            continue;
        }
        let key = (v.priority, dist);
        if key.0 > best_key.0 || (key.0 == best_key.0 && key.1 > best_key.1) {
            best_key = key;
            best = Some((j, x[j]));
        }
    }
    best
}

pub fn solve(model: &LinearModel, opts: &MipOptions, sopts: &SimplexOptions) -> Result<SolveResult, OptimError> {
    let relaxed = model.relaxed();
    let mut engine = Engine::new(&relaxed, sopts.clone())?;
    let root = engine.solve_cold()?;
    if root.status != Status::Optimal {
        return Ok(root);
    }
    let original: Vec<(f64, f64)> = (0..model.num_vars()).map(|j| engine.bounds(j)).collect();
    let int_vars: Vec<usize> = (0..model.num_vars()).filter(|&j| model.vars()[j].integer).collect();

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    let mut open: Vec<Node> = Vec::new();
    let mut seq = 0usize;
    let mut nodes = 1usize;
    let prune =
        |bound: f64, inc: f64| -> bool { inc.is_finite() && bound >= inc - opts.abs_gap.max(opts.gap_tol * inc.abs()) };

    // Current dive state: the path and the LP result at its tip.
    let mut path: Vec<(usize, f64, f64)> = Vec::new();
    let mut current = Some(root);
    loop {
        if let Some(res) = current.take() {
            if res.status == Status::Optimal && !prune(res.objective, inc_obj) {
                match branch_var(model, &res.x) {
                    None => {
                        inc_obj = res.objective;
                        incumbent = Some(res.x.clone());
                    }
                    Some((j, v)) => {
                        if opts.heuristic_every > 0 && (nodes == 1 || nodes.is_multiple_of(opts.heuristic_every)) {
                            if let Some(h) = rounding_heuristic(model, &res.x, sopts)? {
                                if h.objective < inc_obj - opts.abs_gap.max(opts.gap_tol * h.objective.abs()) {
                                    inc_obj = h.objective;
                                    incumbent = Some(h.x);
                                }
                            }
                            if prune(res.objective, inc_obj) {
                                continue;
                            }
                        }
                        let (lo, up) = current_bounds(&original, &path, j);
                        let down = (j, lo, v.floor());
                        let upb = (j, v.ceil(), up);
                        let up_first = v - v.floor() >= 0.5;
                        let (first, second) = if up_first { (upb, down) } else { (down, upb) };
                        let mut other = path.clone();
                        other.push(second);
                        seq += 1;
                        open.push(Node {
                            bound: res.objective,
                            seq,
                            changes: other,
                            basis: engine.basis(),
                        });
                        path.push(first);
                        let (jj, l, u) = first;
                        engine.set_bounds(jj, l, u);
                        nodes += 1;
                        if nodes > opts.node_limit {
                            return Err(node_limit(model, opts, sopts, incumbent));
                        }
                        current = Some(engine.solve_warm()?);
                        continue;
                    }
                }
            }
        }
        // Backtrack to the open node with the best bound.
        open.retain(|n| !prune(n.bound, inc_obj));
        let Some(k) = (0..open.len()).min_by(|&a, &b| {
            open[a]
                .bound
                .partial_cmp(&open[b].bound)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(open[a].seq.cmp(&open[b].seq))
        }) else {
            break;
        };
        let node = open.swap_remove(k);
        for &j in &int_vars {
            let (l, u) = original[j];
            engine.set_bounds(j, l, u);
        }
        for &(j, l, u) in &node.changes {
            engine.set_bounds(j, l, u);
        }
        engine.set_basis(&node.basis);
        path = node.changes;
        nodes += 1;
        if nodes > opts.node_limit {
            return Err(node_limit(model, opts, sopts, incumbent));
        }
        current = Some(engine.solve_warm()?);
    }

    let iterations = engine.iterations;
    match incumbent {
        None => Ok(SolveResult {
            status: Status::Infeasible,
            x: vec![0.0; model.num_vars()],
            objective: f64::INFINITY,
            row_duals: vec![0.0; model.num_rows()],
            reduced_costs: vec![0.0; model.num_vars()],
            row_activity: vec![0.0; model.num_rows()],
            iterations,
            nodes,
            certificate: None,
        }),
        Some(x) => {
            let mut r = polish(model, &x, sopts)?;
            r.iterations += iterations;
            r.nodes = nodes;
            Ok(r)
        }
    }
}

fn current_bounds(original: &[(f64, f64)], path: &[(usize, f64, f64)], j: usize) -> (f64, f64) {
    path.iter()
        .rev()
        .find(|c| c.0 == j)
        .map(|c| (c.1, c.2))
        .unwrap_or(original[j])
}

/// Solves the LP left after fixing every integer variable by `round`.
fn solve_fixed(
    model: &LinearModel,
    x: &[f64],
    round: impl Fn(f64) -> f64,
    sopts: &SimplexOptions,
) -> Result<SolveResult, OptimError> {
    let mut fixed = model.relaxed();
    for (j, v) in model.vars().iter().enumerate() {
        if v.integer {
            let r = round(x[j]).clamp(v.lower, v.upper);
            fixed.set_bounds(super::VarId(j), r, r);
        }
    }
    let mut r = super::simplex::solve(&fixed, sopts)?;
    if r.status == Status::Optimal {
        for (j, v) in model.vars().iter().enumerate() {
            if v.integer {
                r.x[j] = r.x[j].round();
            }
        }
        r.objective = model.objective_value(&r.x);
    }
    Ok(r)
}

/// Fixes integers rounded up past the integrality tolerance, then to the
/// nearest value, and keeps the first assignment with a feasible LP.
fn rounding_heuristic(
    model: &LinearModel,
    x: &[f64],
    sopts: &SimplexOptions,
) -> Result<Option<SolveResult>, OptimError> {
    let r = solve_fixed(model, x, |v| (v - INTEGRALITY_TOL).ceil(), sopts)?;
    if r.status == Status::Optimal {
        return Ok(Some(r));
    }
    let r = solve_fixed(model, x, f64::round, sopts)?;
    Ok((r.status == Status::Optimal).then_some(r))
}

/// Re-solves the LP with integers fixed at `x` so the result carries duals
/// consistent with the reported commitment.
fn polish(model: &LinearModel, x: &[f64], sopts: &SimplexOptions) -> Result<SolveResult, OptimError> {
    let r = solve_fixed(model, x, f64::round, sopts)?;
    if r.status != Status::Optimal {
        return Err(OptimError::Numerical("fixed-integer re-solve lost feasibility".into()));
    }
    Ok(r)
}

fn node_limit(model: &LinearModel, opts: &MipOptions, sopts: &SimplexOptions, inc: Option<Vec<f64>>) -> OptimError {
    let incumbent = inc.and_then(|x| polish(model, &x, sopts).ok()).map(Box::new);
    OptimError::NodeLimit {
        limit: opts.node_limit,
        incumbent,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{solve_mip, LinearModel, MipOptions, Sense};

    #[test]
    fn knapsack() {
        let mut m = LinearModel::new("k");
        let x = m.add_binary("x", -3.0);
        let y = m.add_binary("y", -2.0);
        m.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        let r = solve_mip(&m, &MipOptions::default()).unwrap();
        assert!((r.objective + 3.0).abs() < 1e-9);
        assert_eq!(r.value(x), 1.0);
    }

    #[test]
    fn fractional_root_needs_branching() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = LinearModel::new("b");
        let a = m.add_integer("a", 0.0, 10.0, -5.0);
        let b = m.add_integer("b", 0.0, 10.0, -4.0);
        let c = m.add_integer("c", 0.0, 10.0, -3.0);
        m.add_constraint("r1", vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        m.add_constraint("r2", vec![(a, 4.0), (b, 1.0), (c, 2.0)], Sense::Le, 11.0);
        m.add_constraint("r3", vec![(a, 3.0), (b, 4.0), (c, 2.0)], Sense::Le, 8.0);
        let r = solve_mip(&m, &MipOptions::default()).unwrap();
        assert!((r.objective + 13.0).abs() < 1e-9, "{}", r.objective);
    }
}

//! Bounded revised simplex over `A x - s = 0`, `l <= (x, s) <= u`.
//!
//! Primal simplex runs a composite phase 1 (sum of basic infeasibilities) that
//! hands over to phase 2 as soon as the basis is feasible. The dual simplex is
//! used to re-optimize after bound changes in branch-and-bound. Pricing is
//! Dantzig with lowest-index ties, ratio tests are two-pass Harris, and a run
//! of degenerate pivots switches to Bland's rule until progress resumes.

use super::factor::{BasisFactor, Csc};
use super::{Certificate, LinearModel, OptimError, SolveResult, Status};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Iteration cap per solve; `None` scales with model size.
    pub max_iterations: Option<usize>,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            refactor_every: 100,
            bland_after: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Saved basis for warm starts.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    heads: Vec<usize>,
    state: Vec<VarState>,
}

enum Outcome {
    Optimal,
    Infeasible(Vec<f64>),
    Unbounded(Vec<f64>),
}

enum DualOutcome {
    Feasible,
    Infeasible(Vec<f64>),
    NeedPrimal,
}

pub(crate) struct Engine {
    a: Csc,
    n: usize,
    m: usize,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    heads: Vec<usize>,
    factor: BasisFactor,
    opts: SimplexOptions,
    pub iterations: usize,
    /// Per-solve iteration cap, counted from `solve_start`.
    limit: usize,
    solve_start: usize,
}

pub fn solve(model: &LinearModel, opts: &SimplexOptions) -> Result<SolveResult, OptimError> {
    let mut e = Engine::new(model, opts.clone())?;
    e.solve_cold()
}

fn build_csc(model: &LinearModel) -> Csc {
    let n = model.num_vars();
    let m = model.num_rows();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, r) in model.rows().iter().enumerate() {
        for &(v, c) in &r.terms {
            cols[v.0].push((i, c));
        }
    }
    let mut start = Vec::with_capacity(n + 1);
    let mut index = Vec::new();
    let mut value = Vec::new();
    start.push(0);
    for col in &mut cols {
        col.sort_by_key(|&(i, _)| i);
        // merge duplicates
        let mut k = 0;
        while k < col.len() {
            let i = col[k].0;
            let mut s = 0.0;
            while k < col.len() && col[k].0 == i {
                s += col[k].1;
                k += 1;
            }
            if s != 0.0 {
                index.push(i);
                value.push(s);
            }
        }
        start.push(index.len());
    }
    Csc {
        rows: m,
        cols: n,
        start,
        index,
        value,
    }
}

fn nonbasic_state(lo: f64, up: f64) -> VarState {
    if lo.is_finite() {
        VarState::Lower
    } else if up.is_finite() {
        VarState::Upper
    } else {
        VarState::Free
    }
}

impl Engine {
    pub fn new(model: &LinearModel, opts: SimplexOptions) -> Result<Self, OptimError> {
        let a = build_csc(model);
        let n = model.num_vars();
        let m = model.num_rows();
        let mut cost = model.objective().to_vec();
        cost.resize(n + m, 0.0);
        let mut lo: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
        let mut up: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
        lo.extend(model.rows().iter().map(|r| r.lower));
        up.extend(model.rows().iter().map(|r| r.upper));
        let mut state = vec![VarState::Basic; n + m];
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            state[j] = nonbasic_state(lo[j], up[j]);
            x[j] = match state[j] {
                VarState::Lower => lo[j],
                VarState::Upper => up[j],
                _ => 0.0,
            };
        }
        let heads: Vec<usize> = (n..n + m).collect();
        let factor = BasisFactor::new(&a, &heads).map_err(|_| OptimError::Numerical("slack basis".into()))?;
        let limit = opts.max_iterations.unwrap_or_else(|| 20_000usize.max(30 * (n + m)));
        let mut e = Self {
            a,
            n,
            m,
            cost,
            lo,
            up,
            x,
            state,
            heads,
            factor,
            opts,
            iterations: 0,
            limit,
            solve_start: 0,
        };
        e.compute_basic_values();
        Ok(e)
    }

    fn column_dense(&self, j: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.m];
        if j < self.n {
            for (i, v) in self.a.column(j) {
                c[i] = v;
            }
        } else {
            c[j - self.n] = -1.0;
        }
        c
    }

    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.a.dot(j, y)
        } else {
            -y[j - self.n]
        }
    }

    fn compute_basic_values(&mut self) {
        let mut r = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < self.n {
                for (i, v) in self.a.column(j) {
                    r[i] -= v * xj;
                }
            } else {
                r[j - self.n] += xj;
            }
        }
        let w = self.factor.ftran(&self.a, &r);
        for (p, &h) in self.heads.iter().enumerate() {
            self.x[h] = w[p];
        }
    }

    fn refactor(&mut self) -> Result<(), OptimError> {
        for _ in 0..self.m + 1 {
            match BasisFactor::new(&self.a, &self.heads) {
                Ok(f) => {
                    self.factor = f;
                    self.compute_basic_values();
                    return Ok(());
                }
                Err(repair) => {
                    for (pos, row) in repair {
                        let j = self.heads[pos];
                        let st = self.nearest_bound_state(j);
                        self.state[j] = st;
                        self.x[j] = self.bound_value(j, st);
                        let l = self.n + row;
                        self.heads[pos] = l;
                        self.state[l] = VarState::Basic;
                    }
                }
            }
        }
        Err(OptimError::Numerical("basis repair did not converge".into()))
    }

    fn nearest_bound_state(&self, j: usize) -> VarState {
        let (l, u, v) = (self.lo[j], self.up[j], self.x[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if v - l <= u - v {
                    VarState::Lower
                } else {
                    VarState::Upper
                }
            }
            (true, false) => VarState::Lower,
            (false, true) => VarState::Upper,
            (false, false) => VarState::Free,
        }
    }

    fn bound_value(&self, j: usize, st: VarState) -> f64 {
        match st {
            VarState::Lower => self.lo[j],
            VarState::Upper => self.up[j],
            _ => 0.0,
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.up[j] + PRIMAL_TOL {
            v - self.up[j]
        } else {
            0.0
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let cb: Vec<f64> = self.heads.iter().map(|&h| cost[h]).collect();
        self.factor.btran(&self.a, &cb)
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        cost[j] - self.dot_col(j, y)
    }

    fn maybe_refactor(&mut self) -> Result<(), OptimError> {
        if self.factor.eta_count() >= self.opts.refactor_every {
            self.refactor()?;
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<(), OptimError> {
        self.iterations += 1;
        if self.iterations - self.solve_start > self.limit {
            return Err(OptimError::IterationLimit(self.limit));
        }
        Ok(())
    }

    /// Primal simplex from the current basis.
    fn primal(&mut self) -> Result<Outcome, OptimError> {
        let total = self.n + self.m;
        let mut degenerate_run = 0usize;
        let mut phase_cost = vec![0.0; total];
        loop {
            let infeasible = self.heads.iter().any(|&h| self.infeasibility(h) > 0.0);
            let cost: &[f64] = if infeasible {
                phase_cost.iter_mut().for_each(|c| *c = 0.0);
                for &h in &self.heads {
                    let v = self.x[h];
                    if v < self.lo[h] - PRIMAL_TOL {
                        phase_cost[h] = -1.0;
                    } else if v > self.up[h] + PRIMAL_TOL {
                        phase_cost[h] = 1.0;
                    }
                }
                &phase_cost
            } else {
                &self.cost
            };
            let y = self.duals(cost);
            let bland = degenerate_run >= self.opts.bland_after;

            let mut enter = None;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                let score = match st {
                    VarState::Lower if d < -DUAL_TOL => -d,
                    VarState::Upper if d > DUAL_TOL => d,
                    VarState::Free if d.abs() > DUAL_TOL => d.abs(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, d));
                    break;
                }
                if score > best {
                    best = score;
                    enter = Some((j, d));
                }
            }
            let Some((q, dq)) = enter else {
                if infeasible {
                    return Ok(Outcome::Infeasible(y));
                }
                return Ok(Outcome::Optimal);
            };
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.factor.ftran(&self.a, &self.column_dense(q));

            // Harris pass 1
            let mut theta_max = f64::INFINITY;
            for (p, &h) in self.heads.iter().enumerate() {
                let rate = -dir * alpha[p];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                if let Some((lim, _)) = self.basic_limit(h, rate, PRIMAL_TOL, infeasible) {
                    theta_max = theta_max.min(lim);
                }
            }
            let flip = self.up[q] - self.lo[q];
            // pass 2
            let mut leave: Option<(usize, f64, VarState)> = None;
            if theta_max.is_finite() {
                for (p, &h) in self.heads.iter().enumerate() {
                    let rate = -dir * alpha[p];
                    if rate.abs() < PIVOT_TOL {
                        continue;
                    }
                    if let Some((lim, st)) = self.basic_limit(h, rate, 0.0, infeasible) {
                        if lim <= theta_max {
                            let better = match leave {
                                None => true,
                                Some((bp, _, _)) => {
                                    let (a_new, a_old) = (alpha[p].abs(), alpha[bp].abs());
                                    if bland {
                                        h < self.heads[bp]
                                    } else {
                                        a_new > a_old || (a_new == a_old && h < self.heads[bp])
                                    }
                                }
                            };
                            if better {
                                leave = Some((p, lim.max(0.0), st));
                            }
                        }
                    }
                }
            }
            self.tick()?;
            match leave {
                Some((_, t, _)) if flip.is_finite() && flip <= t => self.bound_flip(q, dir, flip, &alpha),
                None if flip.is_finite() => self.bound_flip(q, dir, flip, &alpha),
                None => {
                    if infeasible {
                        return Err(OptimError::Numerical("unbounded phase-1 direction".into()));
                    }
                    let mut ray = vec![0.0; self.n];
                    if q < self.n {
                        ray[q] = dir;
                    }
                    for (p, &h) in self.heads.iter().enumerate() {
                        if h < self.n {
                            ray[h] = -dir * alpha[p];
                        }
                    }
                    return Ok(Outcome::Unbounded(ray));
                }
                Some((p, t, st)) => {
                    if t < DEGENERATE_STEP {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                    self.pivot(q, p, dir * t, &alpha, st);
                    self.maybe_refactor()?;
                }
            }
        }
    }

    /// Step length at which basic `h` moving at `rate` hits a blocking bound,
    /// and the bound it lands on.
    fn basic_limit(&self, h: usize, rate: f64, tol: f64, phase1: bool) -> Option<(f64, VarState)> {
        let v = self.x[h];
        let (l, u) = (self.lo[h], self.up[h]);
        if phase1 && v < l - PRIMAL_TOL {
            return (rate > 0.0).then(|| ((l - v + tol) / rate, VarState::Lower));
        }
        if phase1 && v > u + PRIMAL_TOL {
            return (rate < 0.0).then(|| ((u - v - tol) / rate, VarState::Upper));
        }
        if rate < 0.0 {
            l.is_finite()
                .then(|| (((v - l).max(0.0) + tol) / -rate, VarState::Lower))
        } else {
            u.is_finite()
                .then(|| (((u - v).max(0.0) + tol) / rate, VarState::Upper))
        }
    }

    fn bound_flip(&mut self, q: usize, dir: f64, flip: f64, alpha: &[f64]) {
        let step = dir * flip;
        self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
        self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
        for (p, &h) in self.heads.iter().enumerate() {
            self.x[h] -= alpha[p] * step;
        }
    }

    /// Enters `q` with signed step `delta`, replacing basis position `p`
    /// whose variable leaves at bound `st`.
    fn pivot(&mut self, q: usize, p: usize, delta: f64, alpha: &[f64], st: VarState) {
        for (k, &h) in self.heads.iter().enumerate() {
            self.x[h] -= alpha[k] * delta;
        }
        self.x[q] += delta;
        let leaving = self.heads[p];
        let st = if self.lo[leaving] == self.up[leaving] {
            VarState::Lower
        } else {
            st
        };
        self.state[leaving] = st;
        self.x[leaving] = self.bound_value(leaving, st);
        self.state[q] = VarState::Basic;
        self.heads[p] = q;
        self.factor.push_eta(p, alpha);
    }

    /// Dual simplex from a dual-feasible basis.
    fn dual(&mut self) -> Result<DualOutcome, OptimError> {
        let total = self.n + self.m;
        loop {
            let y = self.duals(&self.cost);
            let mut d = vec![0.0; total];
            let mut flipped = false;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic {
                    continue;
                }
                d[j] = self.reduced_cost(j, &self.cost, &y);
                let wrong = match st {
                    VarState::Lower => d[j] < -DUAL_TOL && self.lo[j] != self.up[j],
                    VarState::Upper => d[j] > DUAL_TOL && self.lo[j] != self.up[j],
                    VarState::Free => d[j].abs() > DUAL_TOL,
                    VarState::Basic => false,
                };
                if wrong {
                    if self.lo[j].is_finite() && self.up[j].is_finite() {
                        let st = if st == VarState::Lower {
                            VarState::Upper
                        } else {
                            VarState::Lower
                        };
                        self.state[j] = st;
                        self.x[j] = self.bound_value(j, st);
                        flipped = true;
                    } else {
                        return Ok(DualOutcome::NeedPrimal);
                    }
                }
            }
            if flipped {
                self.compute_basic_values();
            }

            let mut leave = None;
            let mut worst = 0.0;
            for (p, &h) in self.heads.iter().enumerate() {
                let inf = self.infeasibility(h);
                if inf > worst {
                    worst = inf;
                    leave = Some(p);
                }
            }
            let Some(p) = leave else {
                return Ok(DualOutcome::Feasible);
            };
            let h = self.heads[p];
            let below = self.x[h] < self.lo[h];
            let sigma = if below { 1.0 } else { -1.0 };
            let mut e = vec![0.0; self.m];
            e[p] = 1.0;
            let rho = self.factor.btran(&self.a, &e);

            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut theta_max = f64::INFINITY;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let arj = self.dot_col(j, &rho);
                if arj.abs() < PIVOT_TOL {
                    continue;
                }
                let s = arj * sigma;
                let ok = match st {
                    VarState::Lower => s < 0.0,
                    VarState::Upper => s > 0.0,
                    VarState::Free => true,
                    VarState::Basic => false,
                };
                if !ok {
                    continue;
                }
                let dj = match st {
                    VarState::Lower => d[j].max(0.0),
                    VarState::Upper => (-d[j]).max(0.0),
                    _ => d[j].abs(),
                };
                theta_max = theta_max.min((dj + DUAL_TOL) / arj.abs());
                cands.push((j, dj / arj.abs(), arj));
            }
            if cands.is_empty() {
                let cert = rho.iter().map(|v| -sigma * v).collect();
                return Ok(DualOutcome::Infeasible(cert));
            }
            let mut pick: Option<(usize, f64)> = None;
            for &(j, ratio, arj) in &cands {
                if ratio <= theta_max {
                    match pick {
                        Some((_, a)) if arj.abs() <= a => {}
                        _ => pick = Some((j, arj.abs())),
                    }
                }
            }
            let (q, _) = pick.expect("candidate within Harris bound");
            self.tick()?;
            let alpha = self.factor.ftran(&self.a, &self.column_dense(q));
            let target = if below { self.lo[h] } else { self.up[h] };
            let delta = (self.x[h] - target) / alpha[p];
            for (k, &hk) in self.heads.iter().enumerate() {
                self.x[hk] -= alpha[k] * delta;
            }
            self.x[q] += delta;
            let st = if below { VarState::Lower } else { VarState::Upper };
            let st = if self.lo[h] == self.up[h] { VarState::Lower } else { st };
            self.state[h] = st;
            self.x[h] = target;
            self.state[q] = VarState::Basic;
            self.heads[p] = q;
            self.factor.push_eta(p, &alpha);
            self.maybe_refactor()?;
        }
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.heads.iter().map(|&h| self.infeasibility(h)).fold(0.0, f64::max)
    }

    pub fn solve_cold(&mut self) -> Result<SolveResult, OptimError> {
        self.solve_start = self.iterations;
        self.finish_primal()
    }

    /// Re-optimizes after bound changes, starting from the current basis.
    pub fn solve_warm(&mut self) -> Result<SolveResult, OptimError> {
        self.solve_start = self.iterations;
        self.refactor()?;
        match self.dual()? {
            DualOutcome::Infeasible(cert) => return Ok(self.non_optimal(Status::Infeasible, Certificate::Farkas(cert))),
            DualOutcome::Feasible | DualOutcome::NeedPrimal => {}
        }
        self.finish_primal()
    }

    fn finish_primal(&mut self) -> Result<SolveResult, OptimError> {
        for _ in 0..5 {
            let outcome = self.primal()?;
            self.refactor()?;
            match outcome {
                Outcome::Infeasible(y) => {
                    if self.max_basic_infeasibility() > 0.0 {
                        return Ok(self.non_optimal(Status::Infeasible, Certificate::Farkas(y)));
                    }
                }
                Outcome::Unbounded(ray) => {
                    return Ok(self.non_optimal(Status::Unbounded, Certificate::Ray(ray)));
                }
                Outcome::Optimal => {
                    if self.max_basic_infeasibility() == 0.0 {
                        return Ok(self.optimal_result());
                    }
                }
            }
        }
        Err(OptimError::Numerical(
            "simplex failed to settle after refactorization".into(),
        ))
    }

    fn non_optimal(&self, status: Status, cert: Certificate) -> SolveResult {
        SolveResult {
            status,
            x: self.x[..self.n].to_vec(),
            objective: if status == Status::Unbounded {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            row_duals: vec![0.0; self.m],
            reduced_costs: vec![0.0; self.n],
            row_activity: self.x[self.n..].to_vec(),
            iterations: self.iterations,
            nodes: 0,
            certificate: Some(cert),
        }
    }

    fn optimal_result(&self) -> SolveResult {
        let y = self.duals(&self.cost);
        let mut x = self.x[..self.n].to_vec();
        // Snap values within tolerance onto their bounds.
        for (j, v) in x.iter_mut().enumerate() {
            if *v < self.lo[j] {
                *v = self.lo[j];
            } else if *v > self.up[j] {
                *v = self.up[j];
            }
        }
        let mut activity = vec![0.0; self.m];
        for (j, &xj) in x.iter().enumerate() {
            for (i, v) in self.a.column(j) {
                activity[i] += v * xj;
            }
        }
        let reduced_costs = (0..self.n)
            .map(|j| {
                if self.state[j] == VarState::Basic {
                    0.0
                } else {
                    self.reduced_cost(j, &self.cost, &y)
                }
            })
            .collect();
        let objective = self.cost[..self.n].iter().zip(&x).map(|(c, v)| c * v).sum();
        SolveResult {
            status: Status::Optimal,
            x,
            objective,
            row_duals: y,
            reduced_costs,
            row_activity: activity,
            iterations: self.iterations,
            nodes: 0,
            certificate: None,
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            heads: self.heads.clone(),
            state: self.state.clone(),
        }
    }

    pub fn set_basis(&mut self, b: &Basis) {
        self.heads.clone_from(&b.heads);
        self.state.clone_from(&b.state);
        for j in 0..self.n + self.m {
            self.place_nonbasic(j);
        }
    }

    /// Keeps a nonbasic variable on a valid bound after its bounds change.
    fn place_nonbasic(&mut self, j: usize) {
        let st = self.state[j];
        if st == VarState::Basic {
            return;
        }
        let (l, u) = (self.lo[j], self.up[j]);
        let st = match st {
            VarState::Lower if l.is_finite() => VarState::Lower,
            VarState::Upper if u.is_finite() => VarState::Upper,
            _ => nonbasic_state(l, u),
        };
        self.state[j] = st;
        self.x[j] = self.bound_value(j, st);
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lo[j] = lo;
        self.up[j] = up;
        self.place_nonbasic(j);
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.up[j])
    }
}

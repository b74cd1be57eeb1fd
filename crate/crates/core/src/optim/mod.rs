//! Optimization kernel: linear programs with exact dual extraction and
//! mixed-integer programs by branch-and-bound over the same simplex core.
//!
//! Models are built with [`LinearModel`], an immutable-once-built description
//! of bounded variables and ranged linear rows. [`solve_lp`] runs a bounded
//! revised simplex and returns primal values, row duals and reduced costs;
//! [`solve_mip`] wraps it in a depth-first branch-and-bound.
//!
//! Dual sign convention: every row dual is the derivative of the optimal
//! objective with respect to the row bound that is active. For a minimization
//! a binding `<=` row therefore has a non-positive dual and a binding `>=` row
//! a non-negative one.

mod factor;
mod lp_format;
pub(crate) mod lu;
mod mip;
mod simplex;

use std::fmt;

use thiserror::Error;

pub use mip::MipOptions;
pub use simplex::SimplexOptions;

/// Primal feasibility tolerance reported on optimal results.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Relative duality-gap tolerance for optimal LPs.
pub const DUALITY_TOL: f64 = 1e-6;
/// Distance from the nearest integer below which a value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    /// Branch-and-bound branches on higher priorities first.
    pub priority: i32,
}

/// A linear row `lower <= sum(coef * x) <= upper`. One-sided rows carry an
/// infinite bound on the other side.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Constraint {
    pub fn sense(&self) -> Option<Sense> {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) if self.lower == self.upper => Some(Sense::Eq),
            (false, true) => Some(Sense::Le),
            (true, false) => Some(Sense::Ge),
            _ => None,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum()
    }
}

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model has integer variables; use solve_mip")]
    IntegerVariables,
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("branch-and-bound node limit {limit} reached")]
    NodeLimit {
        limit: usize,
        incumbent: Option<Box<SolveResult>>,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("solver backend unavailable: {0}")]
    Unavailable(String),
}

/// Minimization model over bounded variables and ranged rows.
#[derive(Clone, Debug, Default)]
pub struct LinearModel {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective: Vec<f64>,
    constant: f64,
}

impl LinearModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer: false,
            priority: 0,
        });
        self.objective.push(cost);
        VarId(self.vars.len() - 1)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        let id = self.add_var(name, lower, upper, cost);
        self.vars[id.0].integer = true;
        id
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.add_integer(name, 0.0, 1.0, cost)
    }

    pub fn set_priority(&mut self, var: VarId, priority: i32) {
        self.vars[var.0].priority = priority;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> RowId {
        let (lower, upper) = match sense {
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Ge => (rhs, f64::INFINITY),
            Sense::Eq => (rhs, rhs),
        };
        self.add_range(name, terms, lower, upper)
    }

    pub fn add_range(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, lower: f64, upper: f64) -> RowId {
        self.rows.push(Constraint {
            name: name.into(),
            terms,
            lower,
            upper,
        });
        RowId(self.rows.len() - 1)
    }

    /// Appends a coefficient to an existing row.
    pub fn add_term(&mut self, row: RowId, var: VarId, coef: f64) {
        self.rows[row.0].terms.push((var, coef));
    }

    pub fn set_row_bounds(&mut self, row: RowId, lower: f64, upper: f64) {
        let r = &mut self.rows[row.0];
        r.lower = lower;
        r.upper = upper;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.objective[var.0] = cost;
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn row(&self, id: RowId) -> &Constraint {
        &self.rows[id.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    /// The continuous relaxation: same model with integrality dropped.
    pub fn relaxed(&self) -> LinearModel {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.integer = false;
        }
        m
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.activity(x)).collect()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &val) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - val).max(val - v.upper);
        }
        for r in &self.rows {
            let a = r.activity(x);
            worst = worst.max(r.lower - a).max(a - r.upper);
        }
        worst
    }

    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(x)
            .filter(|(v, _)| v.integer)
            .map(|(_, &val)| (val - val.round()).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(OptimError::InvalidModel(format!(
                    "variable {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(OptimError::InvalidModel(format!(
                    "variable {} has an empty domain",
                    v.name
                )));
            }
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(OptimError::InvalidModel(format!(
                    "objective coefficient of {} is not finite",
                    self.vars[j].name
                )));
            }
        }
        for r in &self.rows {
            if r.lower.is_nan() || r.upper.is_nan() || r.lower > r.upper {
                return Err(OptimError::InvalidModel(format!(
                    "row {} has bounds [{}, {}]",
                    r.name, r.lower, r.upper
                )));
            }
            for &(v, c) in &r.terms {
                if v.0 >= self.vars.len() {
                    return Err(OptimError::InvalidModel(format!(
                        "row {} references unknown variable",
                        r.name
                    )));
                }
                if !c.is_finite() {
                    return Err(OptimError::InvalidModel(format!(
                        "row {} has a non-finite coefficient",
                        r.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Renders the model in CPLEX LP text format.
    pub fn to_lp_string(&self) -> String {
        lp_format::write(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// Proof of a non-optimal status.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    /// Row multipliers `y` such that `y^T A x` cannot reach the bound-implied
    /// range of `y^T [lower, upper]` over the variable box.
    Farkas(Vec<f64>),
    /// Improving direction over the structural variables.
    Ray(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub iterations: usize,
    pub nodes: usize,
    pub certificate: Option<Certificate>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.x[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.row_duals[r.0]
    }

    /// Lagrangian dual objective implied by the row duals and reduced costs.
    /// Equals the primal objective at an optimal basis.
    pub fn dual_objective(&self, model: &LinearModel) -> f64 {
        let mut obj = model.constant();
        for (r, &y) in model.rows().iter().zip(&self.row_duals) {
            obj += y * if y >= 0.0 {
                finite_or_zero(r.lower)
            } else {
                finite_or_zero(r.upper)
            };
        }
        for (v, &d) in model.vars().iter().zip(&self.reduced_costs) {
            obj += d * if d >= 0.0 {
                finite_or_zero(v.lower)
            } else {
                finite_or_zero(v.upper)
            };
        }
        obj
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Backend abstraction so an external solver can be slotted in behind the
/// same contract as the built-in kernel.
pub trait Solver: Send + Sync {
    fn name(&self) -> &str;
    fn solve_lp(&self, model: &LinearModel) -> Result<SolveResult, OptimError>;
    fn solve_mip(&self, model: &LinearModel, options: &MipOptions) -> Result<SolveResult, OptimError>;
}

#[derive(Clone, Debug, Default)]
pub struct InternalSolver {
    pub simplex: SimplexOptions,
}

impl Solver for InternalSolver {
    fn name(&self) -> &str {
        "internal"
    }

    fn solve_lp(&self, model: &LinearModel) -> Result<SolveResult, OptimError> {
        if model.has_integers() {
            return Err(OptimError::IntegerVariables);
        }
        model.validate()?;
        simplex::solve(model, &self.simplex)
    }

    fn solve_mip(&self, model: &LinearModel, options: &MipOptions) -> Result<SolveResult, OptimError> {
        model.validate()?;
        mip::solve(model, options, &self.simplex)
    }
}

/// Placeholder for an out-of-process solver. No external backend is linked
/// into this build, so every call reports [`OptimError::Unavailable`].
#[derive(Clone, Debug, Default)]
pub struct ExternalSolver;

impl Solver for ExternalSolver {
    fn name(&self) -> &str {
        "external"
    }

    fn solve_lp(&self, _model: &LinearModel) -> Result<SolveResult, OptimError> {
        Err(OptimError::Unavailable(
            "no external LP backend is linked; export the model with to_lp_string()".into(),
        ))
    }

    fn solve_mip(&self, _model: &LinearModel, _options: &MipOptions) -> Result<SolveResult, OptimError> {
        Err(OptimError::Unavailable(
            "no external MIP backend is linked; export the model with to_lp_string()".into(),
        ))
    }
}

/// Picks the backend named by `UMPCLEAR_SOLVER` (`internal` when unset).
pub fn solver_from_env() -> Result<Box<dyn Solver>, OptimError> {
    match std::env::var("UMPCLEAR_SOLVER").as_deref() {
        Err(_) | Ok("") | Ok("internal") => Ok(Box::new(InternalSolver::default())),
        Ok("external") => Ok(Box::new(ExternalSolver)),
        Ok(other) => Err(OptimError::Unavailable(format!("unknown solver '{other}'"))),
    }
}

pub fn solve_lp(model: &LinearModel) -> Result<SolveResult, OptimError> {
    InternalSolver::default().solve_lp(model)
}

pub fn solve_mip(model: &LinearModel, options: &MipOptions) -> Result<SolveResult, OptimError> {
    InternalSolver::default().solve_mip(model, options)
}

//! Dense linear programming.
//!
//! [`LpProblem`] is a plain container: an objective, a list of constraint rows and per-variable
//! bounds. [`solve`] converts it to standard form ([`to_standard_form`]) and runs a two-phase
//! primal simplex on a dense tableau.

mod dump;
mod simplex;
mod standard;

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use dump::dump;
pub use simplex::{solve, solve_with, SolverOptions};
pub use standard::{to_standard_form, ColumnMap, StandardForm};

/// Absolute pivot magnitude below which an entry is treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;
/// Absolute primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost threshold for optimality.
pub const OPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[serde(alias = "minimize")]
    Min,
    #[serde(alias = "maximize")]
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }

    /// Signed amount by which `lhs` breaks `lhs REL rhs`; zero or negative when satisfied.
    pub fn violation(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Relation::Le => lhs - rhs,
            Relation::Ge => rhs - lhs,
            Relation::Eq => (lhs - rhs).abs(),
        }
    }
}

/// One dense constraint row: `coeffs · x REL rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    #[serde(default)]
    pub label: String,
}

impl Constraint {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("problem has no variables")]
    NoVariables,
    #[error("constraint {row} has {found} coefficients, expected {expected}")]
    RowLength { row: usize, found: usize, expected: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    Bounds { var: usize, lower: f64, upper: f64 },
}

/// A linear program over `n_vars` continuous variables.
///
/// Bounds default to `[0, +inf)`; use `f64::NEG_INFINITY` / `f64::INFINITY` for free sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            lower: alloc::vec![0.0; n],
            upper: alloc::vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.add_labeled(coeffs, relation, rhs, String::new())
    }

    pub fn add_labeled(
        &mut self,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
        label: impl Into<String>,
    ) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs, label: label.into() });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if n == 0 {
            return Err(LpError::NoVariables);
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::RowLength { row, found: c.coeffs.len(), expected: n });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(LpError::NonFinite("constraint"));
            }
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::RowLength { row: usize::MAX, found: self.lower.len(), expected: n });
        }
        for var in 0..n {
            let (lower, upper) = (self.lower[var], self.upper[var]);
            if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
                return Err(LpError::NonFinite("bounds"));
            }
            if lower > upper {
                return Err(LpError::Bounds { var, lower, upper });
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest constraint or bound violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.relation.violation(c.lhs(x), c.rhs));
        let bounds = x
            .iter()
            .enumerate()
            .map(|(j, &v)| (self.lower[j] - v).max(v - self.upper[j]));
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot budget ran out; `primal` holds the last basic solution visited.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the caller's sense. Meaningful only when `status` is optimal.
    pub objective_value: f64,
    /// Values of the original variables.
    pub primal: Vec<f64>,
    /// Basic columns, indexed in the standard-form column space.
    pub basis: Vec<usize>,
    /// Standard-form reduced costs (min sense) at termination.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    /// For infeasible problems: original constraint row carrying the largest phase-one residual,
    /// if that residual sits on an original row rather than a bound row.
    pub infeasible_row: Option<usize>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

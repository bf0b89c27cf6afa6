//! Optimisation over the convex hull of a [`VertexMatrix`].
//!
//! The exploration LP has one weight variable per vertex and one coordinate variable per
//! dimension:
//!
//! ```text
//! min/max  f(z)
//! s.t.     z_d - Σ_i Z_id λ_i = 0     for every dimension d
//!          Σ_i λ_i = 1
//!          A z (<=|>=|=) b            user rows
//!          λ >= 0,  z_d >= 0 for nonnegative dimensions
//! ```
//!
//! Every optimum is a convex combination of vertices, hence feasible and within budget for the
//! model that produced them. Without user rows an optimum is always attained at a vertex.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::expr::{self, ParseError};
use crate::lp::{self, LpError, LpProblem, LpStatus, Relation, Sense};
use crate::mga::{self, MgaMethod};
use crate::model::{interpolate, DimensionKind, InterpolatedPoint, ModelError, VertexMatrix, WeightVector};
use crate::rng;

/// A point counts as a vertex when one weight is at least `1 - VERTEX_TOL`.
pub const VERTEX_TOL: f64 = 1e-7;
/// Relative tolerance for frontier dominance and monotonicity.
pub const FRONTIER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraintSpec {
    pub terms: Vec<(String, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub label: String,
}

impl LinearConstraintSpec {
    pub fn new(terms: Vec<(String, f64)>, relation: Relation, rhs: f64, label: impl Into<String>) -> Self {
        Self { terms, relation, rhs, label: label.into() }
    }

    /// Parse `2*wind+solar<=500`; the trimmed text becomes the label.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let c = expr::parse_constraint(text)?;
        Ok(Self { terms: c.terms, relation: c.relation, rhs: c.rhs, label: text.trim().into() })
    }

    /// `name REL rhs`.
    pub fn single(name: &str, relation: Relation, rhs: f64) -> Self {
        let label = format!("{name}{}{rhs}", relation.symbol());
        Self::new(vec![(name.into(), 1.0)], relation, rhs, label)
    }

    /// Check names against `vm` and return dense coefficients over its dimensions.
    pub fn resolve(&self, vm: &VertexMatrix) -> Result<Vec<f64>, EngineError> {
        resolve_terms(vm, &self.terms)
    }

    pub fn violation(&self, vm: &VertexMatrix, coords: &[f64]) -> Result<f64, EngineError> {
        let a = self.resolve(vm)?;
        Ok(self.relation.violation(lp::dot(&a, coords), self.rhs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
}

impl ObjectiveSpec {
    pub fn minimize(name: &str) -> Self {
        Self { terms: vec![(name.into(), 1.0)], sense: Sense::Min }
    }

    pub fn maximize(name: &str) -> Self {
        Self { terms: vec![(name.into(), 1.0)], sense: Sense::Max }
    }

    pub fn parse(text: &str, sense: Sense) -> Result<Self, ParseError> {
        Ok(Self { terms: expr::parse_expression(text)?, sense })
    }

    pub fn resolve(&self, vm: &VertexMatrix) -> Result<Vec<f64>, EngineError> {
        resolve_terms(vm, &self.terms)
    }
}

fn resolve_terms(vm: &VertexMatrix, terms: &[(String, f64)]) -> Result<Vec<f64>, EngineError> {
    if terms.is_empty() {
        return Err(EngineError::EmptyTerms);
    }
    let mut dense = vec![0.0; vm.n()];
    for (name, c) in terms {
        if !c.is_finite() {
            return Err(EngineError::NonFinite(name.clone()));
        }
        let d = vm.dim_index(name).ok_or_else(|| EngineError::UnknownDimension(name.clone()))?;
        dense[d] += c;
    }
    Ok(dense)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    /// Label of the user constraint that must be relaxed the most to restore feasibility.
    pub label: String,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("a linear expression needs at least one term")]
    EmptyTerms,
    #[error("non-finite coefficient for `{0}`")]
    NonFinite(String),
    #[error("constraints exclude the whole hull (most violated: `{}` by {})", .0.label, .0.violation)]
    Infeasible(InfeasibilityReport),
    #[error("solver stopped with status {0:?}")]
    Solver(LpStatus),
    #[error("steps must be at least 2, got {0}")]
    BadSteps(usize),
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("target slack {target} outside [0, {max}]")]
    SlackOutOfRange { target: f64, max: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationResult {
    pub status: ExploreStatus,
    pub point: Option<InterpolatedPoint>,
    /// Objective at `point`; NaN when infeasible.
    pub objective_value: f64,
    pub is_vertex: bool,
    /// Wall-clock solve time; zero without the `std` feature.
    pub solve_millis: f64,
    pub infeasibility: Option<InfeasibilityReport>,
}

impl ExplorationResult {
    pub fn is_optimal(&self) -> bool {
        self.status == ExploreStatus::Optimal
    }

    fn into_point(self) -> Result<(InterpolatedPoint, f64), EngineError> {
        match (self.point, self.infeasibility) {
            (Some(p), _) => Ok((p, self.objective_value)),
            (None, Some(r)) => Err(EngineError::Infeasible(r)),
            (None, None) => Err(EngineError::Solver(LpStatus::Infeasible)),
        }
    }
}

/// Variable and row counts of the exploration LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSize {
    /// `m + n` as built here.
    pub variables: usize,
    /// `n + 1 + d` as built here (bounds are not rows).
    pub rows: usize,
    /// `2m`, the count quoted in the method's original description.
    pub nominal_variables: usize,
    /// `3n + d + 1`, the count quoted in the method's original description.
    pub nominal_rows: usize,
}

pub fn problem_size(m: usize, n: usize, user_rows: usize) -> ProblemSize {
    ProblemSize {
        variables: m + n,
        rows: n + 1 + user_rows,
        nominal_variables: 2 * m,
        nominal_rows: 3 * n + user_rows + 1,
    }
}

/// Build the exploration LP: variables `λ` (indices `0..m`) then `z` (indices `m..m+n`).
pub fn build_exploration_problem(
    vm: &VertexMatrix,
    obj: &ObjectiveSpec,
    constraints: &[LinearConstraintSpec],
) -> Result<LpProblem, EngineError> {
    let c = obj.resolve(vm)?;
    let user: Vec<Vec<f64>> = constraints.iter().map(|k| k.resolve(vm)).collect::<Result<_, _>>()?;
    let (m, n) = (vm.m(), vm.n());
    let mut objective = vec![0.0; m + n];
    objective[m..].copy_from_slice(&c);
    let mut lp = LpProblem::new(obj.sense, objective);
    for (d, dim) in vm.dims().iter().enumerate() {
        let mut row = vec![0.0; m + n];
        for (i, r) in row.iter_mut().take(m).enumerate() {
            *r = -vm.value(i, d);
        }
        row[m + d] = 1.0;
        lp.add_labeled(row, Relation::Eq, 0.0, format!("hull:{}", dim.name));
        if !dim.nonnegative {
            lp.set_bounds(m + d, f64::NEG_INFINITY, f64::INFINITY);
        }
    }
    let mut convexity = vec![0.0; m + n];
    convexity[..m].iter_mut().for_each(|v| *v = 1.0);
    lp.add_labeled(convexity, Relation::Eq, 1.0, "convexity");
    for (spec, a) in constraints.iter().zip(user) {
        let mut row = vec![0.0; m];
        row.extend(a);
        lp.add_labeled(row, spec.relation, spec.rhs, spec.label.clone());
    }
    Ok(lp)
}

#[cfg(feature = "std")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

#[cfg(not(feature = "std"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

/// Weights from an LP solution, cleaned of round-off and renormalised.
fn weights_from(primal: &[f64], m: usize) -> Result<WeightVector, ModelError> {
    let mut w: Vec<f64> = primal[..m].iter().map(|&v| if v < 1e-12 { 0.0 } else { v }).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    WeightVector::new(w)
}

/// Optimise `obj` over the hull intersected with `constraints`.
pub fn explore(
    vm: &VertexMatrix,
    obj: &ObjectiveSpec,
    constraints: &[LinearConstraintSpec],
) -> Result<ExplorationResult, EngineError> {
    let c = obj.resolve(vm)?;
    let lp = build_exploration_problem(vm, obj, constraints)?;
    let (solution, millis) = timed(|| lp::solve(&lp));
    let solution = solution?;
    match solution.status {
        LpStatus::Optimal => {
            let weights = weights_from(&solution.primal, vm.m())?;
            let is_vertex = weights.max_weight() >= 1.0 - VERTEX_TOL;
            let point = interpolate(vm, &weights)?;
            let objective_value = lp::dot(&c, &point.coords);
            Ok(ExplorationResult {
                status: ExploreStatus::Optimal,
                point: Some(point),
                objective_value,
                is_vertex,
                solve_millis: millis,
                infeasibility: None,
            })
        }
        LpStatus::Infeasible => {
            let report = diagnose_infeasibility(vm, constraints)?;
            Ok(ExplorationResult {
                status: ExploreStatus::Infeasible,
                point: None,
                objective_value: f64::NAN,
                is_vertex: false,
                solve_millis: millis,
                infeasibility: Some(report),
            })
        }
        other => Err(EngineError::Solver(other)),
    }
}

/// Find the user constraint that needs the largest relaxation.
///
/// Solves the hull LP with one elastic variable per user row and minimises their sum; the row
/// with the largest elastic value is reported.
pub fn diagnose_infeasibility(
    vm: &VertexMatrix,
    constraints: &[LinearConstraintSpec],
) -> Result<InfeasibilityReport, EngineError> {
    let (m, n) = (vm.m(), vm.n());
    let k = constraints.len();
    if k == 0 {
        return Ok(InfeasibilityReport { label: "convexity".into(), violation: 0.0 });
    }
    let base = ObjectiveSpec { terms: vec![(vm.dims()[0].name.clone(), 0.0)], sense: Sense::Min };
    let mut lp = build_exploration_problem(vm, &base, constraints)?;
    // Elastic pairs (up, down) per user row, appended after λ and z.
    let extra = 2 * k;
    lp.objective.resize(m + n + extra, 0.0);
    lp.objective[m + n..].iter_mut().for_each(|v| *v = 1.0);
    lp.lower.resize(m + n + extra, 0.0);
    lp.upper.resize(m + n + extra, f64::INFINITY);
    let first_user = n + 1;
    for (row_idx, row) in lp.constraints.iter_mut().enumerate() {
        row.coeffs.resize(m + n + extra, 0.0);
        if let Some(u) = row_idx.checked_sub(first_user) {
            row.coeffs[m + n + 2 * u] = -1.0;
            row.coeffs[m + n + 2 * u + 1] = 1.0;
        }
    }
    let s = lp::solve(&lp)?;
    if !s.is_optimal() {
        return Err(EngineError::Solver(s.status));
    }
    let (worst, amount) = (0..k)
        .map(|u| (u, s.primal[m + n + 2 * u] + s.primal[m + n + 2 * u + 1]))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(InfeasibilityReport { label: constraints[worst].label.clone(), violation: amount })
}

/// Per-dimension `(min, max)` over the hull intersected with `constraints` (`2n` solves).
pub fn hull_summary(
    vm: &VertexMatrix,
    constraints: &[LinearConstraintSpec],
) -> Result<Vec<(f64, f64)>, EngineError> {
    vm.dims()
        .iter()
        .map(|dim| {
            let (_, lo) = explore(vm, &ObjectiveSpec::minimize(&dim.name), constraints)?.into_point()?;
            let (_, hi) = explore(vm, &ObjectiveSpec::maximize(&dim.name), constraints)?.into_point()?;
            Ok((lo, hi))
        })
        .collect()
}

/// Minimisation objective with coefficients uniform on the unit sphere over `names`.
pub fn random_objective(names: &[&str], seed: u64) -> ObjectiveSpec {
    let mut rng = rng::stream(seed, "random_objective");
    let v = mga::sphere_direction(names.len(), &mut rng);
    ObjectiveSpec { terms: names.iter().map(|s| String::from(*s)).zip(v).collect(), sense: Sense::Min }
}

/// Dimensions searched by local MGA: capacities, or every dimension if there are none.
fn search_dimensions(vm: &VertexMatrix) -> Vec<String> {
    let caps: Vec<String> = vm
        .dims()
        .iter()
        .filter(|d| d.kind == DimensionKind::Capacity)
        .map(|d| d.name.clone())
        .collect();
    if caps.is_empty() {
        vm.dims().iter().map(|d| d.name.clone()).collect()
    } else {
        caps
    }
}

/// Repeated exploration with MGA-style directions inside the (constrained) hull.
///
/// No budget row is added: the hull already lies within the original budget.
pub fn local_mga(
    vm: &VertexMatrix,
    constraints: &[LinearConstraintSpec],
    iterations: usize,
    method: MgaMethod,
    seed: u64,
) -> Result<Vec<ExplorationResult>, EngineError> {
    if iterations == 0 {
        return Err(EngineError::ZeroIterations);
    }
    let names = search_dimensions(vm);
    let mut rng = rng::stream(seed, "local_mga");
    let dirs = mga::directions(names.len(), iterations, method, &mut rng);
    let mut out = Vec::with_capacity(iterations);
    for dir in dirs {
        let obj = ObjectiveSpec { terms: names.iter().cloned().zip(dir).collect(), sense: Sense::Min };
        let r = explore(vm, &obj, constraints)?;
        if let Some(report) = &r.infeasibility {
            return Err(EngineError::Infeasible(report.clone()));
        }
        out.push(r);
    }
    Ok(out)
}

/// Rescale every vertex towards the least-cost vertex so that it lands on a tighter budget.
///
/// Vertex `i` becomes `s·Z_i + (1-s)·Z_lc` with `s = target_slack / budget_slack`, in vertex
/// order, skipping the least-cost vertex itself.
pub fn budget_interpolate(vm: &VertexMatrix, target_slack: f64) -> Result<Vec<InterpolatedPoint>, EngineError> {
    let max = vm.budget_slack();
    if !(0.0..=max).contains(&target_slack) {
        return Err(EngineError::SlackOutOfRange { target: target_slack, max });
    }
    let share = target_slack / max;
    let lc = vm.least_cost_index();
    (0..vm.m())
        .filter(|&i| i != lc)
        .map(|i| Ok(interpolate(vm, &WeightVector::pair(vm.m(), i, lc, share)?)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub epsilon: f64,
    pub traced_value: f64,
    pub objective_value: f64,
    pub point: InterpolatedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFrontier {
    pub traced_metric: String,
    pub objective_sense: Sense,
    pub points: Vec<FrontierPoint>,
    pub epsilon_grid: Vec<f64>,
}

fn close(a: f64, b: f64) -> f64 {
    FRONTIER_TOL * a.abs().max(b.abs()).max(1.0)
}

impl ParetoFrontier {
    /// Whether `a` dominates `b` (both metrics minimised after orienting the objective).
    pub fn dominates(&self, a: &FrontierPoint, b: &FrontierPoint) -> bool {
        let sign = if self.objective_sense == Sense::Min { 1.0 } else { -1.0 };
        let (at, bt) = (a.traced_value, b.traced_value);
        let (ao, bo) = (sign * a.objective_value, sign * b.objective_value);
        let tt = close(at, bt);
        let to = close(ao, bo);
        at <= bt + tt && ao <= bo + to && (at < bt - tt || ao < bo - to)
    }
}

/// Epsilon-constraint frontier between `objective` and `traced_metric` (which is capped).
///
/// The grid spans the traced metric's range over the constrained hull with `steps` evenly
/// spaced caps. Each cap is solved lexicographically: first the objective, then the traced
/// metric with the objective held at its optimum, so every point returned is efficient.
pub fn pareto_frontier(
    vm: &VertexMatrix,
    objective: &ObjectiveSpec,
    traced_metric: &str,
    steps: usize,
    constraints: &[LinearConstraintSpec],
) -> Result<ParetoFrontier, EngineError> {
    if steps < 2 {
        return Err(EngineError::BadSteps(steps));
    }
    let t = vm.dim_index(traced_metric).ok_or_else(|| EngineError::UnknownDimension(traced_metric.into()))?;
    let obj_dense = objective.resolve(vm)?;
    let (_, lo) = explore(vm, &ObjectiveSpec::minimize(traced_metric), constraints)?.into_point()?;
    let (_, hi) = explore(vm, &ObjectiveSpec::maximize(traced_metric), constraints)?.into_point()?;
    let epsilon_grid: Vec<f64> = (0..steps)
        .map(|k| if k + 1 == steps { hi } else { lo + (hi - lo) * k as f64 / (steps - 1) as f64 })
        .collect();

    let mut points = Vec::with_capacity(steps);
    let mut cons: Vec<LinearConstraintSpec> = constraints.to_vec();
    for (k, &eps) in epsilon_grid.iter().enumerate() {
        cons.push(LinearConstraintSpec::new(
            vec![(traced_metric.into(), 1.0)],
            Relation::Le,
            eps,
            format!("epsilon[{k}]"),
        ));
        let first = explore(vm, objective, &cons)?;
        let (_, best) = match first.into_point() {
            Ok(p) => p,
            Err(EngineError::Infeasible(_)) => {
                // The cap sits exactly on the hull minimum; give it round-off room.
                cons.last_mut().unwrap().rhs = eps + close(eps, eps);
                explore(vm, objective, &cons)?.into_point()?
            }
            Err(e) => return Err(e),
        };
        let hold = match objective.sense {
            Sense::Min => Relation::Le,
            Sense::Max => Relation::Ge,
        };
        let slack = if hold == Relation::Le { close(best, best) } else { -close(best, best) };
        cons.push(LinearConstraintSpec::new(objective.terms.clone(), hold, best + slack, "objective-hold"));
        let (point, traced_value) =
            explore(vm, &ObjectiveSpec::minimize(traced_metric), &cons)?.into_point()?;
        cons.truncate(constraints.len());
        let objective_value = lp::dot(&obj_dense, &point.coords);
        debug_assert!((point.coords[t] - traced_value).abs() <= close(traced_value, 0.0) + 1e-12);
        points.push(FrontierPoint { epsilon: eps, traced_value, objective_value, point });
    }
    points.sort_by(|a, b| a.traced_value.total_cmp(&b.traced_value));
    let mut frontier = ParetoFrontier {
        traced_metric: traced_metric.into(),
        objective_sense: objective.sense,
        points: Vec::new(),
        epsilon_grid,
    };
    let keep: Vec<bool> = points
        .iter()
        .map(|p| !points.iter().any(|q| frontier.dominates(q, p)))
        .collect();
    frontier.points = points.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect();
    Ok(frontier)
}

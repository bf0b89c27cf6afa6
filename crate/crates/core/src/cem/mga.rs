use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{build_cem_lp, metrics, solve_least_cost, CemError, CemLayout, CemSolution, ToyCemInstance};
use crate::lp::{self, LpProblem, Relation};
use crate::mga::{self, MgaMethod};
use crate::model::{DimensionInfo, DimensionKind, VertexMatrix, VertexMatrixParts};
use crate::rng;

pub const LEAST_COST_ID: &str = "least_cost";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgaRunConfig {
    pub budget_slack: f64,
    pub iterations: usize,
    pub method: MgaMethod,
    pub seed: u64,
}

impl MgaRunConfig {
    fn validate(&self) -> Result<(), CemError> {
        if !(self.budget_slack.is_finite() && self.budget_slack > 0.0) {
            return Err(CemError::InvalidInstance(format!("budget slack must be positive, got {}", self.budget_slack)));
        }
        if self.iterations == 0 {
            return Err(CemError::InvalidInstance("MGA needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Dimensions of the reduced projection, in column order:
///
/// * `<zone>.<tech>`: capacity of each resource (MW)
/// * `<tech>`: total capacity of each technology across zones (MW)
/// * `capacity_cost`: capital cost ($)
/// * `operational_cost`, `system_cost`, `emissions`: system metrics ($, $, t)
/// * `cost.<zone>`, `emissions.<zone>`: zonal metrics
pub fn projection_dims(inst: &ToyCemInstance) -> Vec<DimensionInfo> {
    let mut dims = Vec::new();
    for z in &inst.zones {
        for t in &z.technologies {
            dims.push(
                DimensionInfo::new(format!("{}.{}", z.id, t.name), DimensionKind::Capacity, "MW")
                    .located(z.id.clone(), t.name.clone()),
            );
        }
    }
    for name in inst.technology_names() {
        dims.push(DimensionInfo::new(name, DimensionKind::CapacityMetric, "MW").nonnegative(true));
    }
    dims.push(DimensionInfo::new("capacity_cost", DimensionKind::CapacityMetric, "$").nonnegative(true));
    for (name, units) in [("operational_cost", "$"), ("system_cost", "$"), ("emissions", "t")] {
        dims.push(DimensionInfo::new(name, DimensionKind::OperationalMetric, units).nonnegative(true));
    }
    for z in &inst.zones {
        dims.push(
            DimensionInfo::new(format!("cost.{}", z.id), DimensionKind::OperationalMetric, "$").nonnegative(true),
        );
    }
    for z in &inst.zones {
        dims.push(
            DimensionInfo::new(format!("emissions.{}", z.id), DimensionKind::OperationalMetric, "t")
                .nonnegative(true),
        );
    }
    dims
}

fn project(inst: &ToyCemInstance, x: &[f64]) -> Vec<f64> {
    let lay = CemLayout::of(inst);
    let met = metrics(inst, x);
    let mut row: Vec<f64> = x[..lay.n_capacity()].to_vec();
    for name in inst.technology_names() {
        let total = inst
            .zones
            .iter()
            .enumerate()
            .flat_map(|(z, zone)| {
                zone.technologies
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.name == name)
                    .map(move |(k, _)| (z, k))
            })
            .map(|(z, k)| x[lay.capacity(z, k)])
            .sum();
        row.push(total);
    }
    row.push(met.capacity_cost);
    row.push(met.operational_cost);
    row.push(met.total_cost);
    row.push(met.emissions);
    row.extend(&met.zone_cost);
    row.extend(&met.zone_emissions);
    row
}

/// Step-wise MGA: the least-cost solve happens in [`MgaRunner::new`], after which each
/// direction can be solved independently (and in any order) with [`MgaRunner::solve`].
#[derive(Debug, Clone)]
pub struct MgaRunner<'a> {
    inst: &'a ToyCemInstance,
    cfg: MgaRunConfig,
    least_cost: CemSolution,
    budget_lp: LpProblem,
    directions: Vec<Vec<f64>>,
}

impl<'a> MgaRunner<'a> {
    pub fn new(inst: &'a ToyCemInstance, cfg: MgaRunConfig) -> Result<Self, CemError> {
        cfg.validate()?;
        let least_cost = solve_least_cost(inst)?;
        let mut budget_lp = build_cem_lp(inst);
        let cost_row = budget_lp.objective.clone();
        budget_lp.add_labeled(cost_row, Relation::Le, (1.0 + cfg.budget_slack) * least_cost.objective, "budget");
        let n_cap = CemLayout::of(inst).n_capacity();
        let mut rng = rng::stream(cfg.seed, "mga");
        let directions = mga::directions(n_cap, cfg.iterations, cfg.method, &mut rng);
        Ok(Self { inst, cfg, least_cost, budget_lp, directions })
    }

    pub fn least_cost(&self) -> &CemSolution {
        &self.least_cost
    }

    /// Objective vectors over capacity variables, one per iteration.
    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Solve iteration `k` and return its reduced projection.
    pub fn solve(&self, k: usize) -> Result<Vec<f64>, CemError> {
        let mut lp = self.budget_lp.clone();
        lp.objective.iter_mut().for_each(|c| *c = 0.0);
        lp.objective[..self.directions[k].len()].copy_from_slice(&self.directions[k]);
        let s = lp::solve(&lp)?;
        if !s.is_optimal() {
            return Err(CemError::Mga { iteration: k, status: s.status });
        }
        Ok(project(self.inst, &s.primal))
    }

    /// Assemble the vertex matrix from the least-cost row and the per-iteration rows.
    pub fn assemble(&self, rows: Vec<Vec<f64>>) -> Result<VertexMatrix, CemError> {
        let mut ids: Vec<String> = Vec::with_capacity(rows.len() + 1);
        ids.push(LEAST_COST_ID.into());
        ids.extend((1..=rows.len()).map(|k| format!("mga{k:04}")));
        let mut all = Vec::with_capacity(rows.len() + 1);
        all.push(project(self.inst, &self.least_cost.x));
        all.extend(rows);
        Ok(VertexMatrix::new(VertexMatrixParts {
            dims: projection_dims(self.inst),
            vertex_ids: ids,
            rows: all,
            least_cost_id: LEAST_COST_ID.into(),
            budget_slack: self.cfg.budget_slack,
            cost_dimension: Some("system_cost".into()),
        })?)
    }
}

#[derive(Debug, Clone)]
pub struct MgaRun {
    pub matrix: VertexMatrix,
    pub least_cost: CemSolution,
}

/// Least-cost solve plus `cfg.iterations` budget-constrained solves, reduced to capacities and
/// metrics. Row 0 is the least-cost solution.
pub fn run_mga(inst: &ToyCemInstance, cfg: MgaRunConfig) -> Result<MgaRun, CemError> {
    let runner = MgaRunner::new(inst, cfg)?;
    let rows = (0..cfg.iterations).map(|k| runner.solve(k)).collect::<Result<Vec<_>, _>>()?;
    Ok(MgaRun { matrix: runner.assemble(rows)?, least_cost: runner.least_cost })
}

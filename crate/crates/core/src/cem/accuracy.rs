use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{fixed_capacity_dispatch, CapacityEntry, CemError, CemMetrics, ToyCemInstance};
use crate::model::{DimensionKind, InterpolatedPoint, VertexMatrix};
use crate::stats::Summary;

/// Actual values at or below this magnitude get no percent difference.
const ZERO_ACTUAL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RowStatus {
    Dispatched,
    Infeasible { zone: String, hour: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub index: usize,
    #[serde(flatten)]
    pub status: RowStatus,
    /// Interpolated values, one per entry of [`AccuracyReport::metrics`].
    pub estimated: Vec<f64>,
    /// Re-dispatched values; empty when the row is infeasible.
    pub actual: Vec<f64>,
    /// `100 (est - act) / act`; `None` where the actual is zero.
    pub percent_diff: Vec<Option<f64>>,
    /// Zonal shares of cost then emissions, as fractions.
    pub estimated_shares: Vec<f64>,
    pub actual_shares: Vec<f64>,
    /// Estimated minus actual share, in percentage points.
    pub share_diff: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub metrics: Vec<String>,
    /// `cost.<zone>` then `emissions.<zone>`.
    pub share_metrics: Vec<String>,
    pub rows: Vec<AccuracyRow>,
    pub percent_summary: Vec<Option<Summary>>,
    pub share_summary: Vec<Option<Summary>>,
    pub infeasible: usize,
}

impl AccuracyReport {
    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == name)
    }

    pub fn summary(&self, name: &str) -> Option<&Summary> {
        self.percent_summary[self.metric_index(name)?].as_ref()
    }
}

fn actual_value(name: &str, inst: &ToyCemInstance, m: &CemMetrics) -> f64 {
    let zonal = |prefix: &str, v: &[f64]| {
        let z = inst.zone_index(&name[prefix.len()..]).expect("zonal metric names come from the instance");
        v[z]
    };
    match name {
        "system_cost" => m.total_cost,
        "operational_cost" => m.operational_cost,
        "emissions" => m.emissions,
        n if n.starts_with("cost.") => zonal("cost.", &m.zone_cost),
        _ => zonal("emissions.", &m.zone_emissions),
    }
}

fn shares(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter().map(|v| if total.abs() > ZERO_ACTUAL { v / total } else { 0.0 }).collect()
}

/// Re-dispatch each interpolated point with its capacities fixed and compare the interpolated
/// operational metrics against the dispatched ones.
///
/// Infeasible re-dispatches are kept as rows (with no actuals) and counted, not dropped silently.
pub fn accuracy_report(
    inst: &ToyCemInstance,
    vm: &VertexMatrix,
    points: &[InterpolatedPoint],
) -> Result<AccuracyReport, CemError> {
    let mut metrics: Vec<String> = ["system_cost", "operational_cost", "emissions"].map(String::from).to_vec();
    let cost_zones: Vec<String> = inst.zones.iter().map(|z| format!("cost.{}", z.id)).collect();
    let emis_zones: Vec<String> = inst.zones.iter().map(|z| format!("emissions.{}", z.id)).collect();
    metrics.extend(cost_zones.iter().cloned());
    metrics.extend(emis_zones.iter().cloned());
    let mut cols = Vec::with_capacity(metrics.len());
    for name in &metrics {
        match vm.dim_index(name) {
            Some(d) if vm.dims()[d].kind == DimensionKind::OperationalMetric => cols.push(d),
            _ => return Err(CemError::MissingDimension(name.clone())),
        }
    }
    let mut cap_cols = Vec::new();
    for zone in &inst.zones {
        for t in &zone.technologies {
            let name = format!("{}.{}", zone.id, t.name);
            let d = vm.dim_index(&name).ok_or(CemError::MissingDimension(name))?;
            cap_cols.push((zone.id.clone(), t.name.clone(), d));
        }
    }
    let nz = inst.zones.len();
    let share_metrics: Vec<String> = cost_zones.iter().chain(&emis_zones).cloned().collect();

    let mut rows = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let estimated: Vec<f64> = cols.iter().map(|&d| p.coords[d]).collect();
        let est_zonal = &estimated[3..];
        let mut estimated_shares = shares(&est_zonal[..nz]);
        estimated_shares.extend(shares(&est_zonal[nz..]));
        let plan: Vec<CapacityEntry> = cap_cols
            .iter()
            .map(|(zone, technology, d)| CapacityEntry {
                zone: zone.clone(),
                technology: technology.clone(),
                capacity_mw: p.coords[*d],
            })
            .collect();
        let row = match fixed_capacity_dispatch(inst, &plan) {
            Ok(res) => {
                let actual: Vec<f64> = metrics.iter().map(|n| actual_value(n, inst, &res.metrics)).collect();
                let percent_diff = estimated
                    .iter()
                    .zip(&actual)
                    .map(|(e, a)| (a.abs() > ZERO_ACTUAL).then(|| 100.0 * (e - a) / a))
                    .collect();
                let mut actual_shares = shares(&res.metrics.zone_cost);
                actual_shares.extend(shares(&res.metrics.zone_emissions));
                let fam_total = |v: &[f64]| v.iter().sum::<f64>().abs() > ZERO_ACTUAL;
                let cost_ok = fam_total(&res.metrics.zone_cost);
                let emis_ok = fam_total(&res.metrics.zone_emissions);
                let share_diff = estimated_shares
                    .iter()
                    .zip(&actual_shares)
                    .enumerate()
                    .map(|(i, (e, a))| (if i < nz { cost_ok } else { emis_ok }).then(|| 100.0 * (e - a)))
                    .collect();
                AccuracyRow {
                    index,
                    status: RowStatus::Dispatched,
                    estimated,
                    actual,
                    percent_diff,
                    estimated_shares,
                    actual_shares,
                    share_diff,
                }
            }
            Err(CemError::DispatchInfeasible { zone, hour, .. }) => AccuracyRow {
                index,
                status: RowStatus::Infeasible { zone, hour },
                percent_diff: alloc::vec![None; estimated.len()],
                share_diff: alloc::vec![None; estimated_shares.len()],
                estimated,
                actual: Vec::new(),
                estimated_shares,
                actual_shares: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }

    let summarize = |width: usize, pick: &dyn Fn(&AccuracyRow) -> &Vec<Option<f64>>| -> Vec<Option<Summary>> {
        (0..width)
            .map(|i| {
                let vals: Vec<f64> = rows.iter().filter_map(|r| pick(r)[i]).collect();
                Summary::of(&vals)
            })
            .collect()
    };
    let percent_summary = summarize(metrics.len(), &|r| &r.percent_diff);
    let share_summary = summarize(share_metrics.len(), &|r| &r.share_diff);
    let infeasible = rows.iter().filter(|r| matches!(r.status, RowStatus::Infeasible { .. })).count();
    Ok(AccuracyReport { metrics, share_metrics, rows, percent_summary, share_summary, infeasible })
}

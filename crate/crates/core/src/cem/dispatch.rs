use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{build_cem_lp, metrics, CemError, CemLayout, CemMetrics, ToyCemInstance};
use crate::lp::{self, LpStatus, Relation, Sense};

/// Capacities within this of zero are treated as zero; anything more negative is rejected.
const NEGATIVE_CAPACITY_TOL: f64 = 1e-9;

/// One row of a capacity plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEntry {
    pub zone: String,
    pub technology: String,
    pub capacity_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    pub metrics: CemMetrics,
    /// Full solution vector in [`CemLayout`] order.
    pub x: Vec<f64>,
}

fn capacity_vector(inst: &ToyCemInstance, plan: &[CapacityEntry]) -> Result<Vec<f64>, CemError> {
    let lay = CemLayout::of(inst);
    let mut caps: Vec<Option<f64>> = vec![None; lay.n_capacity()];
    for e in plan {
        let unknown = || CemError::UnknownResource { zone: e.zone.clone(), technology: e.technology.clone() };
        let z = inst.zone_index(&e.zone).ok_or_else(unknown)?;
        let k = inst.zones[z].technologies.iter().position(|t| t.name == e.technology).ok_or_else(unknown)?;
        if !e.capacity_mw.is_finite() || e.capacity_mw < -NEGATIVE_CAPACITY_TOL {
            return Err(CemError::NegativeCapacity {
                zone: e.zone.clone(),
                technology: e.technology.clone(),
                value: e.capacity_mw,
            });
        }
        caps[lay.capacity(z, k)] = Some(e.capacity_mw.max(0.0));
    }
    let mut out = Vec::with_capacity(caps.len());
    for (z, zone) in inst.zones.iter().enumerate() {
        for (k, t) in zone.technologies.iter().enumerate() {
            match caps[lay.capacity(z, k)] {
                Some(c) => out.push(c),
                None => {
                    return Err(CemError::MissingCapacity { zone: zone.id.clone(), technology: t.name.clone() })
                }
            }
        }
    }
    Ok(out)
}

/// Re-solve the instance with every capacity pinned to `plan`, optimizing dispatch and flows
/// only. If demand cannot be met, the error names the zone and hour with the largest shortfall.
pub fn fixed_capacity_dispatch(inst: &ToyCemInstance, plan: &[CapacityEntry]) -> Result<DispatchResult, CemError> {
    inst.validate()?;
    let caps = capacity_vector(inst, plan)?;
    let mut lp = build_cem_lp(inst);
    for (j, &c) in caps.iter().enumerate() {
        lp.set_bounds(j, c, c);
    }
    let s = lp::solve(&lp)?;
    match s.status {
        LpStatus::Optimal => {
            let mut x = s.primal;
            // Pinned columns come back exactly at their bound.
            x[..caps.len()].copy_from_slice(&caps);
            Ok(DispatchResult { metrics: metrics(inst, &x), x })
        }
        LpStatus::Infeasible => Err(locate_shortfall(inst, &caps)?),
        other => Err(CemError::Dispatch(other)),
    }
}

/// Elastic re-solve: one unserved-energy column per balance row, minimizing total unserved.
fn locate_shortfall(inst: &ToyCemInstance, caps: &[f64]) -> Result<CemError, CemError> {
    let lay = CemLayout::of(inst);
    let base = build_cem_lp(inst);
    let nv = base.n_vars();
    let n_bal = inst.zones.len() * inst.hours;
    let mut objective = vec![0.0; nv + n_bal];
    objective[nv..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = lp::LpProblem::new(Sense::Min, objective);
    for (r, row) in base.constraints.iter().enumerate() {
        let mut coeffs = row.coeffs.clone();
        coeffs.resize(nv + n_bal, 0.0);
        if r < n_bal {
            coeffs[nv + r] = 1.0;
        }
        lp.add_labeled(coeffs, row.relation, row.rhs, row.label.clone());
    }
    for j in 0..nv {
        lp.set_bounds(j, base.lower[j], base.upper[j]);
    }
    for (j, &c) in caps.iter().enumerate() {
        lp.set_bounds(j, c, c);
    }
    debug_assert!(lp.constraints[..n_bal].iter().all(|c| c.relation == Relation::Eq));
    let s = lp::solve(&lp)?;
    if !s.is_optimal() {
        return Err(CemError::Dispatch(s.status));
    }
    let (mut zone, mut hour, mut worst) = (0, 0, f64::NEG_INFINITY);
    for z in 0..inst.zones.len() {
        for h in 0..inst.hours {
            let u = s.primal[nv + lay.balance_row(z, h)];
            if u > worst {
                (zone, hour, worst) = (z, h, u);
            }
        }
    }
    Ok(CemError::DispatchInfeasible { zone: inst.zones[zone].id.clone(), hour, shortfall: worst })
}

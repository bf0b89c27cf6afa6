//! A small multi-zone capacity-expansion model.
//!
//! Decisions are capacity per (zone, technology), hourly dispatch per (zone, technology) and
//! hourly flow on each transmission line. The objective is capital cost plus variable cost:
//!
//! ```text
//! min  Σ c_zk x_zk + Σ d_zk y_zkt
//! s.t. Σ_k y_zkt + inflow_zt - outflow_zt = demand_zt      (balance, per zone-hour)
//!      y_zkt <= a_zkt x_zk                               (availability)
//!      -limit_l <= f_lt <= limit_l
//!      x, y >= 0
//! ```
//!
//! The model is deliberately pure LP so that convex-combination arguments hold exactly.

mod accuracy;
mod dispatch;
mod mga;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::lp::{self, LpError, LpProblem, LpStatus, Relation, Sense};
use crate::model::ModelError;

pub use accuracy::{accuracy_report, AccuracyReport, AccuracyRow, RowStatus};
pub use dispatch::{fixed_capacity_dispatch, CapacityEntry, DispatchResult};
pub use mga::{projection_dims, run_mga, MgaRun, MgaRunConfig, MgaRunner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub name: String,
    /// $/MW over the modelled period.
    pub capital_cost: f64,
    /// $/MWh.
    pub variable_cost: f64,
    /// t/MWh.
    pub emissions_rate: f64,
    /// Fraction of capacity available in each hour.
    pub availability: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    /// MWh per hour.
    pub demand: Vec<f64>,
    pub technologies: Vec<Technology>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: String,
    pub to: String,
    /// MW in either direction.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyCemInstance {
    pub hours: usize,
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CemError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("least-cost solve ended with status {0:?}")]
    LeastCost(LpStatus),
    #[error("MGA iteration {iteration} ended with status {status:?}")]
    Mga { iteration: usize, status: LpStatus },
    #[error("capacities cannot meet demand in zone `{zone}` at hour {hour} (short {shortfall} MWh)")]
    DispatchInfeasible { zone: String, hour: usize, shortfall: f64 },
    #[error("dispatch ended with status {0:?}")]
    Dispatch(LpStatus),
    #[error("no capacity given for `{zone}.{technology}`")]
    MissingCapacity { zone: String, technology: String },
    #[error("capacity for unknown resource `{zone}.{technology}`")]
    UnknownResource { zone: String, technology: String },
    #[error("negative capacity {value} for `{zone}.{technology}`")]
    NegativeCapacity { zone: String, technology: String, value: f64 },
    #[error("dataset lacks dimension `{0}`")]
    MissingDimension(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-zone scale of demand; zones past the list reuse the last entry.
const ZONE_DEMAND: [f64; 3] = [1000.0, 800.0, 300.0];
const ZONE_WIND: [f64; 3] = [1.2, 0.9, 0.8];
const ZONE_SOLAR: [f64; 3] = [0.8, 1.0, 1.2];

fn pick(table: &[f64; 3], z: usize) -> f64 {
    table[z.min(table.len() - 1)]
}

impl ToyCemInstance {
    /// The desk-scale default: `zones` zones on a ring of lines, four technologies each
    /// (`natural_gas`, `wind`, `solar`, `baseload`), sinusoidal daily profiles.
    pub fn desk_scale(zones: usize, hours: usize) -> Self {
        let day = |h: usize| 2.0 * PI * (h % 24) as f64 / 24.0;
        let zones: Vec<Zone> = (0..zones)
            .map(|z| {
                let phase = 0.7 * z as f64;
                let demand = (0..hours)
                    .map(|h| pick(&ZONE_DEMAND, z) * (1.0 + 0.25 * libm::sin(day(h) - 2.0 + 0.2 * phase)))
                    .collect();
                let wind = (0..hours)
                    .map(|h| {
                        let a = 0.35 + 0.25 * libm::sin(day(h) + phase) + 0.1 * libm::cos(2.0 * day(h));
                        (pick(&ZONE_WIND, z) * a).clamp(0.0, 1.0)
                    })
                    .collect();
                let solar = (0..hours)
                    .map(|h| {
                        let hod = (h % 24) as f64;
                        let s = libm::sin(PI * (hod - 6.0) / 12.0).max(0.0);
                        (pick(&ZONE_SOLAR, z) * 0.8 * s).clamp(0.0, 1.0)
                    })
                    .collect();
                let tech = |name: &str, capital: f64, variable: f64, emissions: f64, availability| Technology {
                    name: name.into(),
                    capital_cost: capital,
                    variable_cost: variable,
                    emissions_rate: emissions,
                    availability,
                };
                Zone {
                    id: format!("z{}", z + 1),
                    demand,
                    technologies: vec![
                        tech("natural_gas", 150.0, 30.0, 0.4, vec![0.95; hours]),
                        tech("wind", 350.0, 0.0, 0.0, wind),
                        tech("solar", 250.0, 0.0, 0.0, solar),
                        tech("baseload", 600.0, 10.0, 0.9, vec![0.9; hours]),
                    ],
                }
            })
            .collect();
        let limits = [300.0, 200.0, 150.0];
        let n = zones.len();
        let lines = match n {
            0 | 1 => Vec::new(),
            2 => vec![Line { from: zones[0].id.clone(), to: zones[1].id.clone(), limit: limits[0] }],
            _ => (0..n)
                .map(|i| Line {
                    from: zones[i].id.clone(),
                    to: zones[(i + 1) % n].id.clone(),
                    limit: limits[i.min(2)],
                })
                .collect(),
        };
        Self { hours, zones, lines }
    }

    pub fn validate(&self) -> Result<(), CemError> {
        let bad = |msg: String| Err(CemError::InvalidInstance(msg));
        if self.hours == 0 {
            return bad("hours must be at least 1".into());
        }
        if self.zones.is_empty() {
            return bad("no zones".into());
        }
        for (i, z) in self.zones.iter().enumerate() {
            if self.zones[..i].iter().any(|o| o.id == z.id) {
                return bad(format!("duplicate zone `{}`", z.id));
            }
            if z.demand.len() != self.hours {
                return bad(format!("zone `{}` demand has {} hours", z.id, z.demand.len()));
            }
            if z.demand.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return bad(format!("zone `{}` has negative or non-finite demand", z.id));
            }
            if z.technologies.is_empty() {
                return bad(format!("zone `{}` has no technologies", z.id));
            }
            for (k, t) in z.technologies.iter().enumerate() {
                if z.technologies[..k].iter().any(|o| o.name == t.name) {
                    return bad(format!("duplicate technology `{}` in `{}`", t.name, z.id));
                }
                if t.availability.len() != self.hours {
                    return bad(format!("`{}.{}` availability has {} hours", z.id, t.name, t.availability.len()));
                }
                if t.availability.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return bad(format!("`{}.{}` availability outside [0, 1]", z.id, t.name));
                }
                let costs = [t.capital_cost, t.variable_cost, t.emissions_rate];
                if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
                    return bad(format!("`{}.{}` has negative or non-finite cost data", z.id, t.name));
                }
            }
            if z.technologies.iter().all(|t| t.availability.iter().all(|&a| a == 0.0)) && self.lines.is_empty() {
                return bad(format!("no technology can serve zone `{}`", z.id));
            }
        }
        for l in &self.lines {
            if self.zone_index(&l.from).is_none() || self.zone_index(&l.to).is_none() {
                return bad(format!("line `{}-{}` references an unknown zone", l.from, l.to));
            }
            if !(l.limit.is_finite() && l.limit >= 0.0) {
                return bad(format!("line `{}-{}` has an invalid limit", l.from, l.to));
            }
        }
        Ok(())
    }

    pub fn zone_index(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    /// Unique technology names in first-seen order.
    pub fn technology_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for z in &self.zones {
            for t in &z.technologies {
                if !names.contains(&t.name) {
                    names.push(t.name.clone());
                }
            }
        }
        names
    }
}

/// Variable indexing of [`build_cem_lp`].
#[derive(Debug, Clone, PartialEq)]
pub struct CemLayout {
    /// First capacity index of each zone.
    zone_start: Vec<usize>,
    n_cap: usize,
    hours: usize,
    n_lines: usize,
}

impl CemLayout {
    pub fn of(inst: &ToyCemInstance) -> Self {
        let mut zone_start = Vec::with_capacity(inst.zones.len());
        let mut n_cap = 0;
        for z in &inst.zones {
            zone_start.push(n_cap);
            n_cap += z.technologies.len();
        }
        Self { zone_start, n_cap, hours: inst.hours, n_lines: inst.lines.len() }
    }

    /// Number of capacity variables (they come first).
    pub fn n_capacity(&self) -> usize {
        self.n_cap
    }

    pub fn n_vars(&self) -> usize {
        self.n_cap + self.n_cap * self.hours + self.n_lines * self.hours
    }

    pub fn capacity(&self, zone: usize, tech: usize) -> usize {
        self.zone_start[zone] + tech
    }

    pub fn dispatch(&self, zone: usize, tech: usize, hour: usize) -> usize {
        self.n_cap + self.capacity(zone, tech) * self.hours + hour
    }

    pub fn flow(&self, line: usize, hour: usize) -> usize {
        self.n_cap * (1 + self.hours) + line * self.hours + hour
    }

    /// Row index of the balance row for `(zone, hour)`.
    pub fn balance_row(&self, zone: usize, hour: usize) -> usize {
        zone * self.hours + hour
    }
}

/// The least-cost LP. Rows: balance per zone-hour (first, zone-major), then availability per
/// resource-hour. Line limits are variable bounds.
pub fn build_cem_lp(inst: &ToyCemInstance) -> LpProblem {
    let lay = CemLayout::of(inst);
    let nv = lay.n_vars();
    let mut objective = vec![0.0; nv];
    for (z, zone) in inst.zones.iter().enumerate() {
        for (k, t) in zone.technologies.iter().enumerate() {
            objective[lay.capacity(z, k)] = t.capital_cost;
            for h in 0..inst.hours {
                objective[lay.dispatch(z, k, h)] = t.variable_cost;
            }
        }
    }
    let mut lp = LpProblem::new(Sense::Min, objective);
    for (z, zone) in inst.zones.iter().enumerate() {
        for h in 0..inst.hours {
            let mut row = vec![0.0; nv];
            for k in 0..zone.technologies.len() {
                row[lay.dispatch(z, k, h)] = 1.0;
            }
            for (l, line) in inst.lines.iter().enumerate() {
                if line.to == zone.id {
                    row[lay.flow(l, h)] += 1.0;
                }
                if line.from == zone.id {
                    row[lay.flow(l, h)] -= 1.0;
                }
            }
            lp.add_labeled(row, Relation::Eq, zone.demand[h], format!("balance:{}:{h}", zone.id));
        }
    }
    for (z, zone) in inst.zones.iter().enumerate() {
        for (k, t) in zone.technologies.iter().enumerate() {
            for h in 0..inst.hours {
                let mut row = vec![0.0; nv];
                row[lay.dispatch(z, k, h)] = 1.0;
                row[lay.capacity(z, k)] = -t.availability[h];
                lp.add_labeled(row, Relation::Le, 0.0, format!("avail:{}.{}:{h}", zone.id, t.name));
            }
        }
    }
    for (l, line) in inst.lines.iter().enumerate() {
        for h in 0..inst.hours {
            lp.set_bounds(lay.flow(l, h), -line.limit, line.limit);
        }
    }
    lp
}

/// Cost and emissions accounting of a full solution vector.
///
/// Zonal cost is the capital cost of in-zone resources plus the variable cost of in-zone
/// generation; transmission carries no cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemMetrics {
    pub capacity_cost: f64,
    pub operational_cost: f64,
    pub total_cost: f64,
    pub emissions: f64,
    pub zone_capacity_cost: Vec<f64>,
    pub zone_operational_cost: Vec<f64>,
    pub zone_cost: Vec<f64>,
    pub zone_emissions: Vec<f64>,
}

pub fn metrics(inst: &ToyCemInstance, x: &[f64]) -> CemMetrics {
    let lay = CemLayout::of(inst);
    let nz = inst.zones.len();
    let mut m = CemMetrics {
        capacity_cost: 0.0,
        operational_cost: 0.0,
        total_cost: 0.0,
        emissions: 0.0,
        zone_capacity_cost: vec![0.0; nz],
        zone_operational_cost: vec![0.0; nz],
        zone_cost: vec![0.0; nz],
        zone_emissions: vec![0.0; nz],
    };
    for (z, zone) in inst.zones.iter().enumerate() {
        for (k, t) in zone.technologies.iter().enumerate() {
            m.zone_capacity_cost[z] += t.capital_cost * x[lay.capacity(z, k)];
            let generation: f64 = (0..inst.hours).map(|h| x[lay.dispatch(z, k, h)]).sum();
            m.zone_operational_cost[z] += t.variable_cost * generation;
            m.zone_emissions[z] += t.emissions_rate * generation;
        }
        m.zone_cost[z] = m.zone_capacity_cost[z] + m.zone_operational_cost[z];
    }
    m.capacity_cost = m.zone_capacity_cost.iter().sum();
    m.operational_cost = m.zone_operational_cost.iter().sum();
    m.total_cost = m.capacity_cost + m.operational_cost;
    m.emissions = m.zone_emissions.iter().sum();
    m
}

/// A solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CemSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub metrics: CemMetrics,
}

impl CemSolution {
    pub fn capacities(&self, inst: &ToyCemInstance) -> Vec<CapacityEntry> {
        let lay = CemLayout::of(inst);
        inst.zones
            .iter()
            .enumerate()
            .flat_map(|(z, zone)| {
                let lay = &lay;
                let x = &self.x;
                zone.technologies.iter().enumerate().map(move |(k, t)| CapacityEntry {
                    zone: zone.id.clone(),
                    technology: t.name.clone(),
                    capacity_mw: x[lay.capacity(z, k)],
                })
            })
            .collect()
    }
}

pub fn solve_least_cost(inst: &ToyCemInstance) -> Result<CemSolution, CemError> {
    inst.validate()?;
    let lp = build_cem_lp(inst);
    let s = lp::solve(&lp)?;
    if !s.is_optimal() {
        return Err(CemError::LeastCost(s.status));
    }
    let metrics = metrics(inst, &s.primal);
    Ok(CemSolution { objective: s.objective_value, metrics, x: s.primal })
}

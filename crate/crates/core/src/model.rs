//! The reduced iterate set and convex-combination interpolation.
//!
//! A [`VertexMatrix`] holds `m` solutions projected onto `n` named dimensions: capacity
//! decisions, affine functions of capacity (exact under interpolation) and operational metrics
//! (estimates under interpolation, since re-dispatching a blended fleet can do better than
//! blending the dispatches).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::rng;

/// Weights below zero by less than this are clamped to zero.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-12;
/// Absolute tolerance on the weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Relative tolerance of the budget check at load.
pub const BUDGET_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    Capacity,
    OperationalMetric,
    CapacityMetric,
}

impl DimensionKind {
    /// Whether interpolated values of this kind are exact.
    pub fn is_exact(self) -> bool {
        !matches!(self, DimensionKind::OperationalMetric)
    }

    pub fn default_nonnegative(self) -> bool {
        matches!(self, DimensionKind::Capacity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionInfo {
    pub name: String,
    pub kind: DimensionKind,
    #[serde(default)]
    pub units: String,
    pub nonnegative: bool,
    /// Zone of a per-zone capacity, used when exporting capacities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology: Option<String>,
}

impl DimensionInfo {
    pub fn new(name: impl Into<String>, kind: DimensionKind, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            units: units.into(),
            nonnegative: kind.default_nonnegative(),
            zone: None,
            technology: None,
        }
    }

    pub fn nonnegative(mut self, flag: bool) -> Self {
        self.nonnegative = flag;
        self
    }

    pub fn located(mut self, zone: impl Into<String>, technology: impl Into<String>) -> Self {
        self.zone = Some(zone.into());
        self.technology = Some(technology.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetPolicy {
    #[default]
    Error,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetViolation {
    pub vertex_id: String,
    pub cost: f64,
    pub limit: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("need at least 2 vertices, found {0}")]
    TooFewVertices(usize),
    #[error("need at least one dimension")]
    NoDimensions,
    #[error("duplicate dimension name `{0}`")]
    DuplicateDimension(String),
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("unknown vertex id `{0}`")]
    UnknownVertex(String),
    #[error("vertex `{vertex}` has {found} values, expected {expected}")]
    RowLength { vertex: String, found: usize, expected: usize },
    #[error("non-finite value for vertex `{vertex}`, dimension `{dimension}`")]
    NonFinite { vertex: String, dimension: String },
    #[error("vertex `{vertex}` has negative value {value} in nonnegative dimension `{dimension}`")]
    Negative { vertex: String, dimension: String, value: f64 },
    #[error("budget slack must be positive and finite, got {0}")]
    BadSlack(f64),
    #[error("vertex `{}` costs {} which exceeds the budget {} by {}", .0.vertex_id, .0.cost, .0.limit, .0.excess)]
    Budget(BudgetViolation),
    #[error("weight vector has {found} entries, expected {expected}")]
    WeightLength { expected: usize, found: usize },
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("non-finite weight at {0}")]
    NonFiniteWeight(usize),
    #[error("support is empty")]
    EmptySupport,
    #[error("vertex index {0} out of range")]
    BadIndex(usize),
    #[error("count must be at least 1")]
    ZeroCount,
    #[error("dimension `{0}` is an operational metric; its interpolated value is only an estimate")]
    NotExact(String),
}

/// Convex-combination weights over the vertices of a [`VertexMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validate `weights`: each at least `-1e-12` (tiny negatives are clamped to zero) and summing
    /// to one within `1e-9`.
    pub fn new(mut weights: Vec<f64>) -> Result<Self, ModelError> {
        for (index, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(ModelError::NonFiniteWeight(index));
            }
            if *w < -NEGATIVE_WEIGHT_TOL {
                return Err(ModelError::NegativeWeight { index, value: *w });
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ModelError::WeightSum(sum));
        }
        Ok(Self(weights))
    }

    pub fn unit(m: usize, i: usize) -> Self {
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        Self(w)
    }

    /// `share` on vertex `i` and `1 - share` on vertex `j`.
    pub fn pair(m: usize, i: usize, j: usize, share: f64) -> Result<Self, ModelError> {
        let mut w = vec![0.0; m];
        w[i] += share;
        w[j] += 1.0 - share;
        Self::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        WeightVector::new(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedPoint {
    pub weights: WeightVector,
    pub coords: Vec<f64>,
    pub exactness: Vec<Exactness>,
}

impl InterpolatedPoint {
    pub fn coord(&self, vm: &VertexMatrix, name: &str) -> Option<f64> {
        vm.dim_index(name).map(|d| self.coords[d])
    }
}

/// Raw ingredients of a [`VertexMatrix`], validated by [`VertexMatrix::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMatrixParts {
    pub dims: Vec<DimensionInfo>,
    pub vertex_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub least_cost_id: String,
    pub budget_slack: f64,
    pub cost_dimension: Option<String>,
}

/// `m` vertices × `n` dimensions, immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMatrix {
    dims: Vec<DimensionInfo>,
    vertex_ids: Vec<String>,
    values: Vec<f64>,
    least_cost: usize,
    budget_slack: f64,
    cost_dim: Option<usize>,
}

impl VertexMatrix {
    /// Validate with [`BudgetPolicy::Error`].
    pub fn new(parts: VertexMatrixParts) -> Result<Self, ModelError> {
        Self::with_policy(parts, BudgetPolicy::Error).map(|(vm, _)| vm)
    }

    /// Validate, returning budget violations as warnings when `policy` is [`BudgetPolicy::Warn`].
    pub fn with_policy(
        parts: VertexMatrixParts,
        policy: BudgetPolicy,
    ) -> Result<(Self, Vec<BudgetViolation>), ModelError> {
        let VertexMatrixParts { dims, vertex_ids, rows, least_cost_id, budget_slack, cost_dimension } =
            parts;
        let n = dims.len();
        if n == 0 {
            return Err(ModelError::NoDimensions);
        }
        let m = rows.len();
        if m < 2 {
            return Err(ModelError::TooFewVertices(m));
        }
        if vertex_ids.len() != m {
            return Err(ModelError::TooFewVertices(vertex_ids.len().min(m)));
        }
        for (i, d) in dims.iter().enumerate() {
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(ModelError::DuplicateDimension(d.name.clone()));
            }
        }
        for (i, id) in vertex_ids.iter().enumerate() {
            if vertex_ids[..i].contains(id) {
                return Err(ModelError::DuplicateVertex(id.clone()));
            }
        }
        if !(budget_slack.is_finite() && budget_slack > 0.0) {
            return Err(ModelError::BadSlack(budget_slack));
        }
        let least_cost = vertex_ids
            .iter()
            .position(|v| *v == least_cost_id)
            .ok_or(ModelError::UnknownVertex(least_cost_id))?;
        let cost_dim = match cost_dimension {
            Some(name) => Some(
                dims.iter().position(|d| d.name == name).ok_or(ModelError::UnknownDimension(name))?,
            ),
            None => None,
        };

        let mut values = Vec::with_capacity(m * n);
        for (row, id) in rows.into_iter().zip(&vertex_ids) {
            if row.len() != n {
                return Err(ModelError::RowLength { vertex: id.clone(), found: row.len(), expected: n });
            }
            for (v, d) in row.iter().zip(&dims) {
                if !v.is_finite() {
                    return Err(ModelError::NonFinite { vertex: id.clone(), dimension: d.name.clone() });
                }
                if d.nonnegative && *v < 0.0 {
                    return Err(ModelError::Negative {
                        vertex: id.clone(),
                        dimension: d.name.clone(),
                        value: *v,
                    });
                }
            }
            values.extend(row);
        }

        let vm = Self { dims, vertex_ids, values, least_cost, budget_slack, cost_dim };
        let violations = vm.budget_violations();
        match (policy, violations.first()) {
            (BudgetPolicy::Error, Some(v)) => Err(ModelError::Budget(v.clone())),
            _ => Ok((vm, violations)),
        }
    }

    fn budget_violations(&self) -> Vec<BudgetViolation> {
        let Some(limit) = self.budget_limit(self.budget_slack) else {
            return Vec::new();
        };
        let c = self.cost_dim.unwrap_or_default();
        (0..self.m())
            .filter_map(|i| {
                let cost = self.value(i, c);
                let excess = cost - limit;
                (excess > BUDGET_REL_TOL * limit.abs()).then(|| BudgetViolation {
                    vertex_id: self.vertex_ids[i].clone(),
                    cost,
                    limit,
                    excess,
                })
            })
            .collect()
    }

    /// `(1 + slack) · C*` when a cost dimension is declared.
    pub fn budget_limit(&self, slack: f64) -> Option<f64> {
        self.least_cost_cost().map(|c| (1.0 + slack) * c)
    }

    pub fn least_cost_cost(&self) -> Option<f64> {
        self.cost_dim.map(|c| self.value(self.least_cost, c))
    }

    pub fn m(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[DimensionInfo] {
        &self.dims
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertex_ids
    }

    pub fn least_cost_index(&self) -> usize {
        self.least_cost
    }

    pub fn least_cost_id(&self) -> &str {
        &self.vertex_ids[self.least_cost]
    }

    pub fn budget_slack(&self) -> f64 {
        self.budget_slack
    }

    pub fn cost_dimension(&self) -> Option<usize> {
        self.cost_dim
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertex_ids.iter().position(|v| v == id)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn value(&self, i: usize, d: usize) -> f64 {
        self.values[i * self.n() + d]
    }

    pub fn column(&self, d: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.m()).map(move |i| self.value(i, d))
    }

    /// Columnwise `(min, max)` over the vertices.
    pub fn column_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.n())
            .map(|d| {
                self.column(d)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            })
            .collect()
    }

    pub fn exactness(&self) -> Vec<Exactness> {
        self.dims
            .iter()
            .map(|d| if d.kind.is_exact() { Exactness::Exact } else { Exactness::Estimate })
            .collect()
    }

    /// Copy with vertex rows reordered: row `k` of the result is row `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, ModelError> {
        let parts = VertexMatrixParts {
            dims: self.dims.clone(),
            vertex_ids: order.iter().map(|&i| self.vertex_ids[i].clone()).collect(),
            rows: order.iter().map(|&i| self.row(i).to_vec()).collect(),
            least_cost_id: self.least_cost_id().into(),
            budget_slack: self.budget_slack,
            cost_dimension: self.cost_dim.map(|c| self.dims[c].name.clone()),
        };
        Self::with_policy(parts, BudgetPolicy::Warn).map(|(vm, _)| vm)
    }

    /// Deconstruct into parts (for serialisation).
    pub fn to_parts(&self) -> VertexMatrixParts {
        VertexMatrixParts {
            dims: self.dims.clone(),
            vertex_ids: self.vertex_ids.clone(),
            rows: (0..self.m()).map(|i| self.row(i).to_vec()).collect(),
            least_cost_id: self.least_cost_id().into(),
            budget_slack: self.budget_slack,
            cost_dimension: self.cost_dim.map(|c| self.dims[c].name.clone()),
        }
    }

    pub(crate) fn check_weights(&self, w: &WeightVector) -> Result<(), ModelError> {
        if w.len() != self.m() {
            return Err(ModelError::WeightLength { expected: self.m(), found: w.len() });
        }
        Ok(())
    }
}

/// The convex combination `Zᵀw`.
pub fn interpolate(vm: &VertexMatrix, w: &WeightVector) -> Result<InterpolatedPoint, ModelError> {
    vm.check_weights(w)?;
    let mut coords = vec![0.0; vm.n()];
    for (i, &wi) in w.as_slice().iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (c, &z) in coords.iter_mut().zip(vm.row(i)) {
            *c += wi * z;
        }
    }
    Ok(InterpolatedPoint { weights: w.clone(), coords, exactness: vm.exactness() })
}

/// `count` random convex combinations of the `support` vertices.
///
/// Weights are flat-Dirichlet over the support (normalised unit exponentials), drawn from the
/// `batch_interpolate` stream of `seed`.
pub fn batch_interpolate(
    vm: &VertexMatrix,
    count: usize,
    seed: u64,
    support: &[usize],
) -> Result<Vec<InterpolatedPoint>, ModelError> {
    if support.is_empty() {
        return Err(ModelError::EmptySupport);
    }
    if count == 0 {
        return Err(ModelError::ZeroCount);
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= vm.m()) {
        return Err(ModelError::BadIndex(bad));
    }
    let mut rng = rng::stream(seed, "batch_interpolate");
    (0..count)
        .map(|_| {
            let draws: Vec<f64> = support.iter().map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            let mut w = vec![0.0; vm.m()];
            for (&i, d) in support.iter().zip(&draws) {
                w[i] += d / total;
            }
            interpolate(vm, &WeightVector::new(w)?)
        })
        .collect()
}

/// Exact value of `Σ coeff_d · z_d` at the combination `w`, computed vertex-wise as
/// `Σ_i w_i (c · z_i)`.
///
/// Only capacity and capacity-metric dimensions are accepted.
pub fn evaluate_affine_metric<S: AsRef<str>>(
    vm: &VertexMatrix,
    w: &WeightVector,
    coeffs: &[(S, f64)],
) -> Result<f64, ModelError> {
    vm.check_weights(w)?;
    let mut resolved = Vec::with_capacity(coeffs.len());
    for (name, c) in coeffs {
        let name = name.as_ref();
        let d = vm.dim_index(name).ok_or_else(|| ModelError::UnknownDimension(name.into()))?;
        if !vm.dims[d].kind.is_exact() {
            return Err(ModelError::NotExact(name.into()));
        }
        resolved.push((d, *c));
    }
    Ok(w
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &wi)| {
            let metric: f64 = resolved.iter().map(|&(d, c)| c * vm.value(i, d)).sum();
            wi * metric
        })
        .sum())
}

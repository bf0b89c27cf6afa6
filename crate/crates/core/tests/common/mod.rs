#![allow(dead_code)]

pub mod oracle;

use std::sync::OnceLock;

use nearopt_core::cem::{run_mga, MgaRun, MgaRunConfig, ToyCemInstance};
use nearopt_core::mga::MgaMethod;
use nearopt_core::model::{DimensionInfo, DimensionKind, VertexMatrix, VertexMatrixParts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOY_SEED: u64 = 42;

/// Random hull with `n - 1` capacity dimensions plus a `cost` column in `[100, 110]`, so every
/// vertex sits inside a 10% budget.
pub fn random_matrix(seed: u64, m: usize, n: usize) -> VertexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims: Vec<DimensionInfo> =
        (0..n - 1).map(|d| DimensionInfo::new(format!("d{d}"), DimensionKind::Capacity, "MW")).collect();
    dims.push(DimensionInfo::new("cost", DimensionKind::OperationalMetric, "$").nonnegative(true));
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut r: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..100.0)).collect();
            r.push(rng.random_range(100.0..110.0));
            r
        })
        .collect();
    let lc = (0..m).min_by(|&a, &b| rows[a][n - 1].total_cmp(&rows[b][n - 1])).unwrap();
    rows[lc][n - 1] = 100.0;
    VertexMatrix::new(VertexMatrixParts {
        dims,
        vertex_ids: (0..m).map(|i| format!("v{i}")).collect(),
        rows,
        least_cost_id: format!("v{lc}"),
        budget_slack: 0.1,
        cost_dimension: Some("cost".into()),
    })
    .unwrap()
}

pub fn toy_config() -> MgaRunConfig {
    MgaRunConfig { budget_slack: 0.10, iterations: 200, method: MgaMethod::RandomVector, seed: TOY_SEED }
}

/// The default 3-zone, 24-hour instance with 200 random-vector iterates, computed once.
pub fn toy() -> &'static (ToyCemInstance, MgaRun) {
    static RUN: OnceLock<(ToyCemInstance, MgaRun)> = OnceLock::new();
    RUN.get_or_init(|| {
        let inst = ToyCemInstance::desk_scale(3, 24);
        let run = run_mga(&inst, toy_config()).unwrap();
        (inst, run)
    })
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

mod common;

use common::toy;
use nearopt_core::cem::{
    accuracy_report, fixed_capacity_dispatch, projection_dims, run_mga, CapacityEntry, MgaRunConfig, MgaRunner,
    RowStatus, ToyCemInstance,
};
use nearopt_core::explore::{explore, random_objective, LinearConstraintSpec};
use nearopt_core::lp::Relation;
use nearopt_core::mga::{minmax_bracket, MgaMethod};
use nearopt_core::model::{batch_interpolate, interpolate, DimensionKind, InterpolatedPoint, VertexMatrix, WeightVector};

fn plan_of(inst: &ToyCemInstance, vm: &VertexMatrix, p: &InterpolatedPoint) -> Vec<CapacityEntry> {
    inst.zones
        .iter()
        .flat_map(|z| {
            z.technologies.iter().map(move |t| {
                let name = format!("{}.{}", z.id, t.name);
                CapacityEntry {
                    zone: z.id.clone(),
                    technology: t.name.clone(),
                    capacity_mw: p.coords[vm.dim_index(&name).unwrap()],
                }
            })
        })
        .collect()
}

fn interior(vm: &VertexMatrix, count: usize, seed: u64) -> Vec<InterpolatedPoint> {
    let all: Vec<usize> = (0..vm.m()).collect();
    batch_interpolate(vm, count, seed, &all).unwrap()
}

#[test]
fn default_run_has_every_iterate_within_budget() {
    let (_, run) = toy();
    let vm = &run.matrix;
    assert_eq!(vm.m(), 201);
    assert_eq!(vm.least_cost_index(), 0);
    let c_star = run.least_cost.objective;
    assert_eq!(vm.least_cost_cost().unwrap(), vm.value(0, vm.dim_index("system_cost").unwrap()));
    let sc = vm.dim_index("system_cost").unwrap();
    for i in 0..vm.m() {
        assert!(vm.value(i, sc) <= 1.10 * c_star * (1.0 + 1e-9), "row {i}");
        assert!(vm.value(i, sc) >= c_star * (1.0 - 1e-9), "row {i}");
    }
}

#[test]
fn vanishing_slack_pins_every_iterate_to_the_optimum() {
    let inst = ToyCemInstance::desk_scale(2, 6);
    for method in [MgaMethod::RandomVector, MgaMethod::Minmax] {
        let cfg = MgaRunConfig { budget_slack: 1e-9, iterations: 12, method, seed: 1 };
        let run = run_mga(&inst, cfg).unwrap();
        let sc = run.matrix.dim_index("system_cost").unwrap();
        for v in run.matrix.column(sc) {
            assert!((v - run.least_cost.objective).abs() <= 1e-7 * run.least_cost.objective);
        }
    }
}

#[test]
fn minmax_run_starts_with_brackets() {
    let inst = ToyCemInstance::desk_scale(3, 4);
    let cfg = MgaRunConfig { budget_slack: 0.1, iterations: 30, method: MgaMethod::Minmax, seed: 0 };
    let runner = MgaRunner::new(&inst, cfg).unwrap();
    let n_cap = 12;
    for k in 0..2 * n_cap {
        assert_eq!(runner.directions()[k], minmax_bracket(n_cap, k));
    }
    let caps = projection_dims(&inst).iter().filter(|d| d.kind == DimensionKind::Capacity).count();
    assert_eq!(caps, n_cap);
}

#[test]
fn run_is_deterministic_per_seed() {
    let inst = ToyCemInstance::desk_scale(2, 8);
    let cfg = MgaRunConfig { budget_slack: 0.1, iterations: 15, method: MgaMethod::RandomVector, seed: 5 };
    let a = run_mga(&inst, cfg).unwrap().matrix;
    let b = run_mga(&inst, cfg).unwrap().matrix;
    assert_eq!(a, b);
    let c = run_mga(&inst, MgaRunConfig { seed: 6, ..cfg }).unwrap().matrix;
    assert_ne!(a, c);
}

#[test]
fn interpolated_costs_overestimate_and_stay_in_budget() {
    let (inst, run) = toy();
    let vm = &run.matrix;
    let c_star = run.least_cost.objective;
    let (sc, oc) = (vm.dim_index("system_cost").unwrap(), vm.dim_index("operational_cost").unwrap());
    for p in interior(vm, 50, 77) {
        let d = fixed_capacity_dispatch(inst, &plan_of(inst, vm, &p)).unwrap();
        assert!(p.coords[oc] >= d.metrics.operational_cost - 1e-9 * d.metrics.operational_cost.abs());
        assert!(p.coords[sc] >= d.metrics.total_cost - 1e-9 * d.metrics.total_cost.abs());
        assert!(d.metrics.total_cost <= 1.10 * c_star * (1.0 + 1e-9));
        let cap_sum = d.metrics.capacity_cost + d.metrics.operational_cost;
        assert!((d.metrics.total_cost - cap_sum).abs() <= 1e-9 * cap_sum);
    }
}

#[test]
fn emissions_estimates_lie_within_vertex_range() {
    let (inst, run) = toy();
    let vm = &run.matrix;
    let ranges = vm.column_ranges();
    let mut names = vec!["emissions".to_string()];
    names.extend(inst.zones.iter().map(|z| format!("emissions.{}", z.id)));
    for p in interior(vm, 200, 3) {
        for n in &names {
            let d = vm.dim_index(n).unwrap();
            let (lo, hi) = ranges[d];
            assert!(p.coords[d] >= lo - 1e-9 * lo.abs().max(1.0) && p.coords[d] <= hi + 1e-9 * hi.abs().max(1.0));
        }
    }
}

#[test]
fn explored_points_are_dispatchable() {
    let (inst, run) = toy();
    let vm = &run.matrix;
    let caps: Vec<&str> =
        vm.dims().iter().filter(|d| d.kind == DimensionKind::Capacity).map(|d| d.name.as_str()).collect();
    let (lo, hi) = vm.column_ranges()[vm.dim_index("natural_gas").unwrap()];
    let cap = LinearConstraintSpec::single("natural_gas", Relation::Le, lo + 0.4 * (hi - lo));
    for seed in 0..10 {
        let cons = if seed % 2 == 0 { vec![] } else { vec![cap.clone()] };
        let r = explore(vm, &random_objective(&caps, seed), &cons).unwrap();
        let p = r.point.unwrap();
        fixed_capacity_dispatch(inst, &plan_of(inst, vm, &p)).unwrap();
    }
}

#[test]
fn accuracy_rows_at_vertices_and_interior() {
    let (inst, run) = toy();
    let vm = &run.matrix;
    let mut points: Vec<InterpolatedPoint> =
        [0, 1, 100, 200].iter().map(|&i| interpolate(vm, &WeightVector::unit(vm.m(), i)).unwrap()).collect();
    points.extend(interior(vm, 20, 9));
    let rep = accuracy_report(inst, vm, &points).unwrap();
    assert_eq!(rep.infeasible, 0);
    let sc = rep.metric_index("system_cost").unwrap();
    let nz = inst.zones.len();
    for row in &rep.rows {
        assert_eq!(row.status, RowStatus::Dispatched);
        assert!(row.percent_diff[sc].unwrap() >= -1e-9);
        for shares in [&row.estimated_shares, &row.actual_shares] {
            assert!((shares[..nz].iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((shares[nz..].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
    // The least-cost vertex is dispatched optimally already.
    assert!(rep.rows[0].percent_diff[sc].unwrap().abs() < 1e-7);
    assert_eq!(rep.summary("system_cost").unwrap().count, points.len());
}

#[test]
fn accuracy_report_needs_metric_columns() {
    let (inst, run) = toy();
    let mut parts = run.matrix.to_parts();
    let d = parts.dims.iter().position(|d| d.name == "cost.z2").unwrap();
    parts.dims.remove(d);
    parts.rows.iter_mut().for_each(|r| {
        r.remove(d);
    });
    let vm = VertexMatrix::new(parts).unwrap();
    let p = interpolate(&vm, &WeightVector::unit(vm.m(), 0)).unwrap();
    assert!(accuracy_report(inst, &vm, &[p]).is_err());
}

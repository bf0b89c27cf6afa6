mod common;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nearopt::io::{self, Metadata};
use nearopt::service::{router, AppState};
use nearopt_core::cem::fixed_capacity_dispatch;
use serde_json::{json, Value};
use tower::ServiceExt;

const DATASET: &str = "toy";

fn fixture() -> (AppState, Router) {
    let state = AppState::new();
    state.add_dataset(DATASET, common::toy().1.matrix.clone());
    (state.clone(), router(state))
}

struct Reply {
    status: StatusCode,
    cache: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let cache = resp.headers().get("x-cache").map(|v| v.to_str().unwrap().to_owned());
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, cache, body }
}

async fn session(app: &Router) -> String {
    let r = call(app, Method::POST, "/sessions", Some(json!({ "dataset": DATASET }))).await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["id"].as_str().unwrap().to_owned()
}

fn range(summary: &Value, name: &str) -> (f64, f64) {
    let row = summary["summary"].as_array().unwrap().iter().find(|r| r["name"] == name).unwrap();
    (row["min"].as_f64().unwrap(), row["max"].as_f64().unwrap())
}

#[tokio::test]
async fn health_and_catalog() {
    let (_, app) = fixture();
    let r = call(&app, Method::GET, "/health", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "ok");

    let r = call(&app, Method::GET, "/datasets", None).await;
    assert_eq!(r.json()["datasets"][0], json!({ "id": DATASET, "m": 201, "n": 26 }));

    let r = call(&app, Method::GET, "/datasets/toy/dimensions", None).await;
    let cat = r.json();
    assert_eq!(cat["least_cost_id"], "least_cost");
    assert_eq!(cat["cost_dimension"], "system_cost");
    assert_eq!(cat["dimensions"].as_array().unwrap().len(), 26);
    assert_eq!(cat["dimensions"][0]["kind"], "capacity");
    assert_eq!(cat["ranges"].as_array().unwrap().len(), 26);

    let r = call(&app, Method::GET, "/datasets/toy/vertices", None).await;
    let v = r.json();
    assert_eq!(v["rows"].as_array().unwrap().len(), 201);
    assert_eq!(v["vertex_ids"][1], "mga0001");

    let r = call(&app, Method::GET, "/datasets/nope/dimensions", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"]["code"], "not_found");
}

#[tokio::test]
async fn upload_then_query() {
    let (_, app) = fixture();
    let vm = &common::toy().1.matrix;
    let mut csv = Vec::new();
    io::write_iterates(vm, &mut csv).unwrap();
    let body = json!({
        "id": "uploaded",
        "iterates_csv": String::from_utf8(csv).unwrap(),
        "metadata": Metadata::of(vm),
    });
    let r = call(&app, Method::POST, "/datasets", Some(body.clone())).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["m"], 201);
    let r = call(&app, Method::POST, "/datasets", Some(body)).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let bad = json!({ "iterates_csv": "iterate_id,x\nleast_cost,1\n", "metadata": { "dimensions": [] } });
    let r = call(&app, Method::POST, "/datasets", Some(bad)).await;
    assert!(r.status.is_client_error(), "{}", r.status);
    assert!(r.json()["error"]["message"].is_string());
}

#[tokio::test]
async fn sessions_are_independent() {
    let (_, app) = fixture();
    let a = session(&app).await;
    let b = session(&app).await;
    assert_ne!(a, b);
    let r = call(&app, Method::POST, &format!("/sessions/{a}/constraints"), Some(json!({ "constraint": "wind>=100" })))
        .await;
    assert_eq!(r.status, StatusCode::OK);
    let r = call(&app, Method::GET, &format!("/sessions/{b}"), None).await;
    assert_eq!(r.json()["constraints"], json!([]));
    let r = call(&app, Method::POST, "/sessions", Some(json!({ "dataset": "missing" }))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = call(&app, Method::GET, "/sessions/s999", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn constraints_shrink_and_restore() {
    let (_, app) = fixture();
    let s = session(&app).await;
    let base = call(&app, Method::GET, &format!("/sessions/{s}/summary"), None).await.json();
    assert_eq!(base["feasible"], true);
    let (gas_lo, gas_hi) = range(&base, "natural_gas");
    let cap = (gas_lo + gas_hi) / 2.0;

    let path = format!("/sessions/{s}/constraints");
    let r = call(&app, Method::POST, &path, Some(json!({ "constraint": format!("natural_gas<={cap}") }))).await;
    let narrowed = r.json();
    assert_eq!(r.status, StatusCode::OK);
    let (lo, hi) = range(&narrowed, "natural_gas");
    assert!(hi <= cap + 1e-6 * cap && lo >= gas_lo - 1e-6 * gas_lo.abs().max(1.0));
    for dim in ["wind", "solar", "system_cost", "emissions"] {
        let (blo, bhi) = range(&base, dim);
        let (nlo, nhi) = range(&narrowed, dim);
        let tol = 1e-7 * bhi.abs().max(1.0);
        assert!(nlo >= blo - tol && nhi <= bhi + tol, "{dim} grew");
    }

    // A tautology leaves every range where it was.
    let r = call(&app, Method::POST, &path, Some(json!({ "constraint": "wind>=0" }))).await;
    for (a, b) in narrowed["summary"].as_array().unwrap().iter().zip(r.json()["summary"].as_array().unwrap()) {
        let (a, b) = (a["max"].as_f64().unwrap(), b["max"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0));
    }

    // Contradiction: flagged, with the offending label, not a server error.
    let r = call(&app, Method::POST, &path, Some(json!({ "constraint": format!("natural_gas>={}", gas_hi * 2.0) })))
        .await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["feasible"], false);
    assert_eq!(v["summary"], Value::Null);
    assert!(v["infeasibility"]["label"].as_str().unwrap().starts_with("natural_gas"));
    assert!(v["infeasibility"]["violation"].as_f64().unwrap() > 0.0);

    // Explore under the contradiction reports 422 with the same label.
    let r = call(&app, Method::POST, &format!("/sessions/{s}/explore"), Some(json!({ "objective": "wind" }))).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["code"], "infeasible");

    // Deleting everything restores the unconstrained summary.
    for idx in [2, 1, 0] {
        let r = call(&app, Method::DELETE, &format!("{path}/{idx}"), None).await;
        assert_eq!(r.status, StatusCode::OK);
    }
    let r = call(&app, Method::DELETE, &format!("{path}/0"), None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let back = call(&app, Method::GET, &format!("/sessions/{s}/summary"), None).await.json();
    assert_eq!(back["summary"], base["summary"]);
}

#[tokio::test]
async fn parse_errors_point_at_the_input() {
    let (_, app) = fixture();
    let s = session(&app).await;
    let r = call(&app, Method::POST, &format!("/sessions/{s}/constraints"), Some(json!({ "constraint": "wind <= " })))
        .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let e = r.json()["error"].clone();
    assert_eq!(e["code"], "parse_error");
    assert_eq!(e["detail"]["input"], "wind <= ");
    assert!(e["detail"]["caret"].as_str().unwrap().contains('^'));

    let r = call(&app, Method::POST, &format!("/sessions/{s}/constraints"), Some(json!({ "constraint": "hydro<=5" })))
        .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["code"], "unknown_dimension");

    let r = call(&app, Method::POST, &format!("/sessions/{s}/explore"), Some(json!({ "nonsense": 1 }))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn explore_recovers_least_cost_and_caches() {
    let (_, app) = fixture();
    let s = session(&app).await;
    let path = format!("/sessions/{s}/explore");
    let body = json!({ "objective": "system_cost", "sense": "min" });
    let first = call(&app, Method::POST, &path, Some(body.clone())).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(first.cache.as_deref(), Some("miss"));
    let v = first.json();
    let lc = common::toy().1.least_cost.objective;
    let got = v["objective_value"].as_f64().unwrap();
    assert!((got - lc).abs() <= 1e-9 * lc, "{got} vs {lc}");
    assert_eq!(v["status"], "optimal");

    let second = call(&app, Method::POST, &path, Some(body)).await;
    assert_eq!(second.cache.as_deref(), Some("hit"));
    assert_eq!(first.body, second.body);

    // A new constraint changes the key.
    call(&app, Method::POST, &format!("/sessions/{s}/constraints"), Some(json!({ "constraint": "wind>=10" }))).await;
    let third = call(&app, Method::POST, &path, Some(json!({ "objective": "system_cost", "sense": "min" }))).await;
    assert_eq!(third.cache.as_deref(), Some("miss"));
}

#[tokio::test]
async fn pareto_has_requested_steps() {
    let (_, app) = fixture();
    let s = session(&app).await;
    let body = json!({ "objective": "system_cost", "traced": "emissions", "steps": 11 });
    let r = call(&app, Method::POST, &format!("/sessions/{s}/pareto"), Some(body)).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["epsilon_grid"].as_array().unwrap().len(), 11);
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 11);
    let traced: Vec<f64> = pts.iter().map(|p| p["traced_value"].as_f64().unwrap()).collect();
    assert!(traced.windows(2).all(|w| w[0] <= w[1]));
    assert!(v["solve_millis"].as_f64().unwrap() >= 0.0);

    let r = call(&app, Method::POST, &format!("/sessions/{s}/pareto"), Some(json!({ "objective": "system_cost", "traced": "emissions", "steps": 1 })))
        .await;
    assert!(r.status.is_client_error());
}

#[tokio::test]
async fn budget_rescales_every_vertex() {
    let (_, app) = fixture();
    let s = session(&app).await;
    let r = call(&app, Method::POST, &format!("/sessions/{s}/budget"), Some(json!({ "slack": 0.06 }))).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert!((v["share"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 200);
    assert_eq!(v["source_ids"].as_array().unwrap().len(), 200);
    let vm = &common::toy().1.matrix;
    let cost = vm.dim_index("system_cost").unwrap();
    let limit = 1.06 * common::toy().1.least_cost.objective;
    for p in points {
        assert!(p["coords"][cost].as_f64().unwrap() <= limit * (1.0 + 1e-9));
    }
    let r = call(&app, Method::POST, &format!("/sessions/{s}/budget"), Some(json!({ "slack": 0.2 }))).await;
    assert!(r.status.is_client_error());
}

#[tokio::test]
async fn interpolate_and_export() {
    let (_, app) = fixture();
    let s = session(&app).await;
    let r = call(&app, Method::POST, &format!("/sessions/{s}/interpolate"), Some(json!({ "count": 5, "seed": 3, "support": [0, 4, 9] })))
        .await;
    assert_eq!(r.status, StatusCode::OK);
    let pts = r.json()["points"].as_array().unwrap().clone();
    assert_eq!(pts.len(), 5);
    for p in &pts {
        let w: Vec<f64> = p["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().enumerate().all(|(i, &x)| x == 0.0 || [0, 4, 9].contains(&i)));
    }

    let m = common::toy().1.matrix.m();
    let mut w = vec![0.0; m];
    w[0] = 0.7;
    w[5] = 0.2;
    let short = json!({ "weights": w });
    let r = call(&app, Method::POST, &format!("/sessions/{s}/interpolate"), Some(short)).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["code"], "invalid_input");

    w[5] = 0.3;
    let r = call(&app, Method::POST, &format!("/sessions/{s}/export"), Some(json!({ "weights": w }))).await;
    assert_eq!(r.status, StatusCode::OK);
    let caps = io::read_capacities(r.body.as_slice()).unwrap();
    assert_eq!(caps.len(), 12);
    let inst = &common::toy().0;
    let res = fixed_capacity_dispatch(inst, &caps).expect("a convex combination of feasible plans is feasible");
    assert!(res.metrics.operational_cost > 0.0);
}

#[tokio::test]
async fn snapshot_restores_sessions() {
    let (state, app) = fixture();
    let s = session(&app).await;
    call(&app, Method::POST, &format!("/sessions/{s}/constraints"), Some(json!({ "constraint": "solar<=400" }))).await;
    let before = call(&app, Method::GET, &format!("/sessions/{s}/summary"), None).await.json();

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sessions.json");
    state.write_snapshot(&file).unwrap();

    let (fresh, app2) = fixture();
    assert_eq!(fresh.restore_snapshot(&file).unwrap(), 1);
    let r = call(&app2, Method::GET, &format!("/sessions/{s}"), None).await;
    assert_eq!(r.json()["constraints"][0]["text"], "solar<=400");
    let after = call(&app2, Method::GET, &format!("/sessions/{s}/summary"), None).await.json();
    assert_eq!(before["summary"], after["summary"]);
    // New ids never collide with restored ones.
    let other = session(&app2).await;
    assert_ne!(other, s);
}

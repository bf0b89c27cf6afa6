use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

fn nearopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nearopt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn toycem(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["toycem", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    nearopt(&args)
}

/// Default dataset written once by the binary itself.
fn dataset() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-dataset");
        let _ = std::fs::remove_dir_all(&dir);
        let o = toycem(&dir, &["--seed", "7"]);
        assert!(o.status.success(), "{}", stderr(&o));
        dir
    })
}

fn data_arg() -> &'static str {
    dataset().to_str().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let c = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[c].parse().unwrap()).collect()
}

#[test]
fn toycem_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = toycem(d, &["--seed", "7", "--mga", "25"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["iterates.csv", "metadata.json", "instance.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = tmp.path().join("c");
    toycem(&c, &["--seed", "8", "--mga", "25"]);
    assert_ne!(std::fs::read(a.join("iterates.csv")).unwrap(), std::fs::read(c.join("iterates.csv")).unwrap());
}

#[test]
fn single_iteration_gives_two_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = toycem(tmp.path(), &["--mga", "1", "--zones", "2", "--hours", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("iterates.csv")).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "least_cost");
    assert_eq!(rows[2][0], "mga0001");
}

#[test]
fn default_dataset_shape() {
    let text = std::fs::read_to_string(dataset().join("iterates.csv")).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 202);
    assert_eq!(rows[0].len(), 27);
}

#[test]
fn explore_writes_one_point() {
    let o = nearopt(&["explore", "--data", data_arg(), "--min", "system_cost"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let cost = column(&rows, "system_cost")[0];
    let obj = column(&rows, "objective_value")[0];
    assert!((cost - obj).abs() <= 1e-9 * cost);
    assert!(rows[0].iter().any(|h| h == "w.least_cost"));

    let o = nearopt(&["explore", "--data", data_arg(), "--max", "wind", "-c", "solar<=100", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let dims = v["dimensions"].as_array().unwrap();
    let solar = dims.iter().position(|d| d == "solar").unwrap();
    assert!(v["points"][0]["coords"][solar].as_f64().unwrap() <= 100.0 + 1e-6);
}

#[test]
fn infeasible_constraints_exit_two() {
    let o = nearopt(&["explore", "--data", data_arg(), "--min", "wind", "-c", "wind>=1e9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wind>=1e9"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    let o = nearopt(&["explore", "--data", data_arg(), "--min", "wind", "-c", "wind <="]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains('^'));
    let o = nearopt(&["explore", "--data", data_arg()]);
    assert_eq!(o.status.code(), Some(1));
    let o = nearopt(&["explore", "--data", "/definitely/not/here", "--min", "wind"]);
    assert_eq!(o.status.code(), Some(1));
    let o = nearopt(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("toycem"));
}

#[test]
fn pareto_and_budget_outputs() {
    let o = nearopt(&[
        "pareto", "--data", data_arg(), "--objective", "system_cost", "--trace", "emissions", "--steps", "11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 12);
    let traced = column(&rows, "emissions");
    assert!(traced.windows(2).all(|w| w[0] <= w[1]));

    let o = nearopt(&["budget", "--data", data_arg(), "--slack", "0.06", "--dims-only"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0].len(), 27);
    let lc: f64 = {
        let text = std::fs::read_to_string(dataset().join("iterates.csv")).unwrap();
        column(&csv_rows(&text), "system_cost")[0]
    };
    assert!(column(&rows, "system_cost").iter().all(|&c| c <= 1.06 * lc * (1.0 + 1e-9)));
}

#[test]
fn localmga_respects_constraints() {
    let o = nearopt(&[
        "localmga", "--data", data_arg(), "-c", "natural_gas<=1574", "--iterations", "10", "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 11);
    assert!(column(&rows, "natural_gas").iter().all(|&g| g <= 1574.0 + 1e-6));
}

#[test]
fn interp_export_dispatch_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nearopt(&["interp", "--data", data_arg(), "--count", "4", "--seed", "1", "--support", "0,3,5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_rows(&stdout(&o)).len(), 5);

    let mut w = vec![0.0; 201];
    w[0] = 0.5;
    w[3] = 0.5;
    let wfile = tmp.path().join("w.json");
    std::fs::write(&wfile, serde_json::to_string(&w).unwrap()).unwrap();
    let caps = tmp.path().join("capacities.csv");
    let o = nearopt(&[
        "export", "--data", data_arg(), "--weights-file", wfile.to_str().unwrap(), "--out", caps.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let inst = dataset().join("instance.json");
    let o = nearopt(&["dispatch", "--instance", inst.to_str().unwrap(), "--capacities", caps.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["operational_cost"].as_f64().unwrap() > 0.0);

    // Zero capacity everywhere cannot meet demand.
    let text = std::fs::read_to_string(&caps).unwrap();
    let zeroed: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 0 { format!("{l}\n") } else { format!("{},0\n", l.rsplit_once(',').unwrap().0) })
        .collect();
    std::fs::write(&caps, zeroed).unwrap();
    let o = nearopt(&["dispatch", "--instance", inst.to_str().unwrap(), "--capacities", caps.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hour"), "{}", stderr(&o));

    std::fs::write(&wfile, serde_json::to_string(&vec![0.9 / 201.0; 201]).unwrap()).unwrap();
    let o = nearopt(&["interp", "--data", data_arg(), "--weights-file", wfile.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn accuracy_report_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = tmp.path().join("summary.json");
    let o = nearopt(&["accuracy", "--data", data_arg(), "--n", "20", "--seed", "5", "--summary", summary.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 21);
    assert!(rows[1..].iter().all(|r| r[1] == "dispatched"));
    // Interpolated system cost never undershoots the re-dispatched cost.
    assert!(column(&rows, "pct.system_cost").iter().all(|&p| p >= -1e-9));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["rows"], 20);
    assert_eq!(v["infeasible"], 0);
    assert_eq!(v["percent_diff"]["system_cost"]["count"], 20);
    assert!(stderr(&o).contains("system cost"));
}

#[test]
fn serve_reports_startup_errors() {
    let o = nearopt(&["serve", "--data", "/definitely/not/here", "--port", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not exist"), "{}", stderr(&o));

    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let o = nearopt(&["serve", "--data", data_arg(), "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot bind"), "{}", stderr(&o));
}

#[test]
fn serve_answers_health() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_nearopt"))
        .args(["serve", "--data", data_arg(), "--port", "0"])
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server prints its address").unwrap();
        if let Some(rest) = line.split("listening on http://").nth(1) {
            break rest.trim().to_owned();
        }
    };
    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut reply = String::new();
    stream.read_to_string(&mut reply).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"status\":\"ok\""), "{reply}");
    assert!(reply.contains("\"datasets\":1"), "{reply}");
}

#[test]
fn accuracy_on_a_single_vertex() {
    let tmp = tempfile::tempdir().unwrap();
    let mut w = vec![0.0; 201];
    w[17] = 1.0;
    let wfile = tmp.path().join("unit.json");
    std::fs::write(&wfile, serde_json::to_string(&w).unwrap()).unwrap();
    let o = nearopt(&["accuracy", "--data", data_arg(), "--n", "1", "--weights-file", wfile.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert!(column(&rows, "pct.system_cost")[0] >= -1e-9);
    // Without --summary the summary goes to stderr as JSON.
    assert!(stderr(&o).contains("\"percent_diff\""));
}

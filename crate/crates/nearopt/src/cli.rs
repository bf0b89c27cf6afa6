//! Command-line front end. Exit codes: 0 success, 1 usage or IO error, 2 infeasible model or
//! constraints. Data goes to stdout (or `--out`), diagnostics to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nearopt_core::cem::{
    accuracy_report, fixed_capacity_dispatch, run_mga, AccuracyReport, CemError, MgaRunConfig, RowStatus,
    ToyCemInstance,
};
use nearopt_core::explore::{
    budget_interpolate, explore, local_mga, pareto_frontier, EngineError, ExploreStatus, LinearConstraintSpec,
    ObjectiveSpec,
};
use nearopt_core::lp::{LpStatus, Sense};
use nearopt_core::mga::MgaMethod;
use nearopt_core::model::{batch_interpolate, interpolate, BudgetPolicy, InterpolatedPoint, VertexMatrix, WeightVector};
use nearopt_core::rng;

use crate::io::{self, IoError, PointRow};
use crate::service;

#[derive(Debug, Parser)]
#[command(name = "nearopt", version, about = "Explore the hull of near-optimal planning solutions")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the desk-scale capacity-expansion model, run MGA and write a dataset.
    Toycem(ToycemArgs),
    /// Optimise one objective over the hull.
    Explore(ExploreArgs),
    /// Trace an epsilon-constraint frontier between an objective and a capped metric.
    Pareto(ParetoArgs),
    /// Rescale every vertex towards least cost to fit a tighter budget slack.
    Budget(BudgetArgs),
    /// Run MGA-style searches inside the (constrained) hull.
    Localmga(LocalMgaArgs),
    /// Interpolate explicit or random weights.
    Interp(InterpArgs),
    /// Write the capacities of a weighted point as capacities.csv.
    Export(ExportArgs),
    /// Dispatch the model with capacities fixed from capacities.csv.
    Dispatch(DispatchArgs),
    /// Compare interpolated operational metrics against fixed-capacity dispatch.
    Accuracy(AccuracyArgs),
    /// Serve datasets over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Policy {
    Error,
    Warn,
}

impl From<Policy> for BudgetPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Error => BudgetPolicy::Error,
            Policy::Warn => BudgetPolicy::Warn,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    RandomVector,
    Minmax,
}

impl From<Method> for MgaMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::RandomVector => MgaMethod::RandomVector,
            Method::Minmax => MgaMethod::Minmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SenseArg {
    Min,
    Max,
}

impl From<SenseArg> for Sense {
    fn from(s: SenseArg) -> Self {
        match s {
            SenseArg::Min => Sense::Min,
            SenseArg::Max => Sense::Max,
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Directory holding iterates.csv and metadata.json.
    #[arg(long, required_unless_present_all = ["iterates", "metadata"], conflicts_with_all = ["iterates", "metadata"])]
    data: Option<PathBuf>,
    #[arg(long, requires = "metadata")]
    iterates: Option<PathBuf>,
    #[arg(long, requires = "iterates")]
    metadata: Option<PathBuf>,
    /// What to do with iterates over the declared budget.
    #[arg(long, value_enum, default_value = "error")]
    budget_policy: Policy,
    /// Constraint such as `2*wind+solar<=500`; repeatable.
    #[arg(short = 'c', long = "constraint")]
    constraints: Vec<String>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop extra and weight columns so the CSV reloads as an iterate file.
    #[arg(long)]
    dims_only: bool,
}

#[derive(Debug, Args)]
struct ToycemArgs {
    #[arg(long, default_value_t = 3)]
    zones: usize,
    #[arg(long, default_value_t = 24)]
    hours: usize,
    /// Read this instance instead of generating one.
    #[arg(long, conflicts_with_all = ["zones", "hours"])]
    instance: Option<PathBuf>,
    /// Number of MGA iterations.
    #[arg(long, default_value_t = 200)]
    mga: usize,
    #[arg(long, default_value_t = 0.10)]
    slack: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "random-vector")]
    method: Method,
    /// Output directory for instance.json, iterates.csv and metadata.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("goal").required(true).args(["min", "max"])))]
struct ExploreArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "EXPR")]
    min: Option<String>,
    #[arg(long, value_name = "EXPR")]
    max: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ParetoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "EXPR")]
    objective: String,
    #[arg(long, value_enum, default_value = "min")]
    sense: SenseArg,
    /// Metric capped along the grid.
    #[arg(long, value_name = "NAME")]
    trace: String,
    #[arg(long, default_value_t = 11)]
    steps: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    slack: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct LocalMgaArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, value_enum, default_value = "minmax")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct InterpArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON weights: one array, or an array of arrays.
    #[arg(long, conflicts_with_all = ["count", "support"])]
    weights_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vertex indices to combine (default: all).
    #[arg(long, value_delimiter = ',')]
    support: Option<Vec<usize>>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON array of weights.
    #[arg(long)]
    weights_file: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DispatchArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    capacities: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AccuracyArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model instance (default: instance.json next to the iterates).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Number of random interpolates.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random vertices the interpolates combine (all if larger than the set).
    #[arg(long, default_value_t = 4)]
    support_size: usize,
    /// Use these weights instead of random ones.
    #[arg(long, conflicts_with = "support_size")]
    weights_file: Option<PathBuf>,
    /// Summary statistics as JSON (default: stderr).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory of datasets (itself, or subdirectories, holding iterates.csv + metadata.json).
    #[arg(long)]
    data: PathBuf,
    /// Session snapshot restored at startup and written at shutdown.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "error")]
    budget_policy: Policy,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Engine(EngineError),
    #[error(transparent)]
    Cem(CemError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Infeasible(r) => {
                CliError::Infeasible(format!("constraint `{}` is violated by {} at best", r.label, r.violation))
            }
            other => CliError::Engine(other),
        }
    }
}

impl From<CemError> for CliError {
    fn from(e: CemError) -> Self {
        match e {
            CemError::DispatchInfeasible { .. }
            | CemError::LeastCost(LpStatus::Infeasible)
            | CemError::Mga { status: LpStatus::Infeasible, .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Cem(other),
        }
    }
}

impl From<nearopt_core::model::ModelError> for CliError {
    fn from(e: nearopt_core::model::ModelError) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run(args: impl IntoIterator<Item = OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Toycem(a) => toycem(a, stderr),
        Command::Explore(a) => cmd_explore(a, stdout, stderr),
        Command::Pareto(a) => cmd_pareto(a, stdout, stderr),
        Command::Budget(a) => cmd_budget(a, stdout, stderr),
        Command::Localmga(a) => cmd_localmga(a, stdout, stderr),
        Command::Interp(a) => cmd_interp(a, stdout, stderr),
        Command::Export(a) => cmd_export(a, stdout, stderr),
        Command::Dispatch(a) => cmd_dispatch(a, stdout),
        Command::Accuracy(a) => cmd_accuracy(a, stdout, stderr),
        Command::Serve(a) => cmd_serve(a, stderr),
    }
}

fn toycem(a: ToycemArgs, stderr: &mut dyn Write) -> Result<(), CliError> {
    if a.mga == 0 {
        return Err(CliError::Usage("--mga must be at least 1".into()));
    }
    let inst = match &a.instance {
        Some(p) => io::read_instance(p)?,
        None => ToyCemInstance::desk_scale(a.zones, a.hours),
    };
    let cfg = MgaRunConfig { budget_slack: a.slack, iterations: a.mga, method: a.method.into(), seed: a.seed };
    let run = run_mga(&inst, cfg)?;
    fs::create_dir_all(&a.out).map_err(|source| IoError::File { path: a.out.clone(), source })?;
    io::write_instance(&inst, &a.out.join(io::INSTANCE_FILE))?;
    io::write_dataset_dir(&run.matrix, &a.out)?;
    writeln!(
        stderr,
        "least cost {:.6} $; wrote {} iterates x {} dimensions to {}",
        run.least_cost.objective,
        run.matrix.m(),
        run.matrix.n(),
        a.out.display()
    )?;
    Ok(())
}

struct Loaded {
    vm: VertexMatrix,
    constraints: Vec<LinearConstraintSpec>,
    dir: Option<PathBuf>,
}

fn load(a: &DataArgs, stderr: &mut dyn Write) -> Result<Loaded, CliError> {
    let policy = a.budget_policy.into();
    let (vm, warnings) = match (&a.data, &a.iterates, &a.metadata) {
        (Some(dir), _, _) => io::load_dataset_dir(dir, policy)?,
        (None, Some(it), Some(meta)) => io::load_vertex_matrix(it, meta, policy)?,
        _ => return Err(CliError::Usage("give --data or both --iterates and --metadata".into())),
    };
    for w in warnings {
        writeln!(stderr, "warning: iterate `{}` exceeds the budget by {}", w.vertex_id, w.excess)?;
    }
    let mut constraints = Vec::new();
    for text in &a.constraints {
        let spec = LinearConstraintSpec::parse(text)
            .map_err(|e| CliError::Usage(format!("bad constraint: {e}\n{}", e.caret(text))))?;
        spec.resolve(&vm)?;
        constraints.push(spec);
    }
    let dir = a.data.clone().or_else(|| a.iterates.as_ref().and_then(|p| p.parent().map(Path::to_path_buf)));
    Ok(Loaded { vm, constraints, dir })
}

fn parse_objective(text: &str, sense: Sense) -> Result<ObjectiveSpec, CliError> {
    ObjectiveSpec::parse(text, sense).map_err(|e| CliError::Usage(format!("bad objective: {e}\n{}", e.caret(text))))
}

fn emit_points(
    vm: &VertexMatrix,
    rows: &[PointRow],
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    match out.format {
        Format::Csv => io::write_points_csv(vm, rows, out.dims_only, &mut buf)?,
        Format::Json => io::write_points_json(vm, rows, &mut buf)?,
    }
    write_output(out.out.as_deref(), &buf, stdout)
}

fn write_output(path: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|source| IoError::File { path: p.into(), source })?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn cmd_explore(a: ExploreArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let d = load(&a.data, stderr)?;
    let obj = match (&a.min, &a.max) {
        (Some(e), _) => parse_objective(e, Sense::Min)?,
        (_, Some(e)) => parse_objective(e, Sense::Max)?,
        _ => unreachable!("clap requires --min or --max"),
    };
    let r = explore(&d.vm, &obj, &d.constraints)?;
    if r.status == ExploreStatus::Infeasible {
        return Err(EngineError::Infeasible(r.infeasibility.expect("report present")).into());
    }
    writeln!(
        stderr,
        "objective {} ({}), {:.3} ms",
        r.objective_value,
        if r.is_vertex { "vertex" } else { "face" },
        r.solve_millis
    )?;
    let row = PointRow {
        id: "explore".into(),
        extra: vec![("objective_value".into(), r.objective_value)],
        point: r.point.expect("optimal results carry a point"),
    };
    emit_points(&d.vm, &[row], &a.output, stdout)
}

fn cmd_pareto(a: ParetoArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let d = load(&a.data, stderr)?;
    let obj = parse_objective(&a.objective, a.sense.into())?;
    let f = pareto_frontier(&d.vm, &obj, &a.trace, a.steps, &d.constraints)?;
    writeln!(stderr, "{} frontier points from {} caps", f.points.len(), f.epsilon_grid.len())?;
    let rows: Vec<PointRow> = f
        .points
        .into_iter()
        .enumerate()
        .map(|(k, p)| PointRow {
            id: format!("pareto{:02}", k + 1),
            extra: vec![("epsilon".into(), p.epsilon), ("objective_value".into(), p.objective_value)],
            point: p.point,
        })
        .collect();
    emit_points(&d.vm, &rows, &a.output, stdout)
}

fn cmd_budget(a: BudgetArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let d = load(&a.data, stderr)?;
    if !d.constraints.is_empty() {
        writeln!(stderr, "warning: budget rescaling ignores --constraint")?;
    }
    let points = budget_interpolate(&d.vm, a.slack)?;
    writeln!(stderr, "share {} of each vertex, {} points", a.slack / d.vm.budget_slack(), points.len())?;
    let lc = d.vm.least_cost_index();
    let ids = d.vm.vertex_ids().iter().enumerate().filter(|(i, _)| *i != lc).map(|(_, id)| id.clone());
    let rows: Vec<PointRow> = ids.zip(points).map(|(id, point)| PointRow { id, extra: vec![], point }).collect();
    emit_points(&d.vm, &rows, &a.output, stdout)
}

fn cmd_localmga(a: LocalMgaArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let d = load(&a.data, stderr)?;
    let out = local_mga(&d.vm, &d.constraints, a.iterations, a.method.into(), a.seed)?;
    let vertices = out.iter().filter(|r| r.is_vertex).count();
    writeln!(stderr, "{} solutions, {vertices} at original vertices", out.len())?;
    let rows: Vec<PointRow> = out
        .into_iter()
        .enumerate()
        .map(|(k, r)| PointRow {
            id: format!("local{:04}", k + 1),
            extra: vec![("objective_value".into(), r.objective_value)],
            point: r.point.expect("local MGA results are optimal"),
        })
        .collect();
    emit_points(&d.vm, &rows, &a.output, stdout)
}

fn read_weights(path: &Path, vm: &VertexMatrix) -> Result<Vec<InterpolatedPoint>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File { path: path.into(), source })?;
    let sets = io::parse_weights(&text)?;
    let mut out = Vec::with_capacity(sets.len());
    for w in sets {
        out.push(interpolate(vm, &WeightVector::new(w)?)?);
    }
    Ok(out)
}

fn cmd_interp(a: InterpArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let d = load(&a.data, stderr)?;
    let points = match &a.weights_file {
        Some(p) => read_weights(p, &d.vm)?,
        None => {
            let support = a.support.clone().unwrap_or_else(|| (0..d.vm.m()).collect());
            batch_interpolate(&d.vm, a.count, a.seed, &support)?
        }
    };
    let rows: Vec<PointRow> = points
        .into_iter()
        .enumerate()
        .map(|(k, point)| PointRow { id: format!("p{:04}", k + 1), extra: vec![], point })
        .collect();
    emit_points(&d.vm, &rows, &a.output, stdout)
}

fn cmd_export(a: ExportArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let d = load(&a.data, stderr)?;
    let points = read_weights(&a.weights_file, &d.vm)?;
    let [point] = points.as_slice() else {
        return Err(CliError::Usage("export takes exactly one weight vector".into()));
    };
    let mut buf = Vec::new();
    io::write_capacities(&io::capacities_of(&d.vm, point)?, &mut buf)?;
    write_output(a.out.as_deref(), &buf, stdout)
}

fn cmd_dispatch(a: DispatchArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let inst = io::read_instance(&a.instance)?;
    let file = fs::File::open(&a.capacities).map_err(|source| IoError::File { path: a.capacities.clone(), source })?;
    let plan = io::read_capacities(file)?;
    let res = fixed_capacity_dispatch(&inst, &plan)?;
    let mut buf = serde_json::to_vec_pretty(&res.metrics).map_err(IoError::from)?;
    buf.push(b'\n');
    write_output(a.out.as_deref(), &buf, stdout)
}

fn accuracy_csv(rep: &AccuracyReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["index", "status", "zone", "hour"].map(String::from).to_vec();
    for m in &rep.metrics {
        header.extend([format!("est.{m}"), format!("act.{m}"), format!("pct.{m}")]);
    }
    for m in &rep.share_metrics {
        header.extend([format!("share_est.{m}"), format!("share_act.{m}"), format!("share_diff.{m}")]);
    }
    w.write_record(&header).map_err(IoError::from)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for r in &rep.rows {
        let mut rec = vec![r.index.to_string()];
        match &r.status {
            RowStatus::Dispatched => rec.extend(["dispatched".into(), String::new(), String::new()]),
            RowStatus::Infeasible { zone, hour } => rec.extend(["infeasible".into(), zone.clone(), hour.to_string()]),
        }
        for i in 0..rep.metrics.len() {
            rec.push(r.estimated[i].to_string());
            rec.push(opt(r.actual.get(i).copied()));
            rec.push(opt(r.percent_diff[i]));
        }
        for i in 0..rep.share_metrics.len() {
            rec.push(r.estimated_shares[i].to_string());
            rec.push(opt(r.actual_shares.get(i).copied()));
            rec.push(opt(r.share_diff[i]));
        }
        w.write_record(&rec).map_err(IoError::from)?;
    }
    w.into_inner().map_err(|e| CliError::Io(IoError::Format(e.to_string())))
}

fn accuracy_summary(rep: &AccuracyReport) -> serde_json::Value {
    let percent: serde_json::Map<String, serde_json::Value> = rep
        .metrics
        .iter()
        .zip(&rep.percent_summary)
        .map(|(m, s)| (m.clone(), serde_json::json!(s)))
        .collect();
    let shares: serde_json::Map<String, serde_json::Value> = rep
        .share_metrics
        .iter()
        .zip(&rep.share_summary)
        .map(|(m, s)| (m.clone(), serde_json::json!(s)))
        .collect();
    serde_json::json!({
        "rows": rep.rows.len(),
        "infeasible": rep.infeasible,
        "percent_diff": percent,
        "share_diff_points": shares,
    })
}

fn cmd_accuracy(a: AccuracyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let d = load(&a.data, stderr)?;
    let inst_path = match (&a.instance, &d.dir) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join(io::INSTANCE_FILE),
        (None, None) => return Err(CliError::Usage("--instance is required".into())),
    };
    let inst = io::read_instance(&inst_path)?;
    let points = match &a.weights_file {
        Some(p) => read_weights(p, &d.vm)?,
        None => {
            if a.n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let support: Vec<usize> = if a.support_size >= d.vm.m() {
                (0..d.vm.m()).collect()
            } else {
                let mut r = rng::stream(a.seed, "accuracy_support");
                let mut s = rand::seq::index::sample(&mut r, d.vm.m(), a.support_size).into_vec();
                s.sort_unstable();
                s
            };
            batch_interpolate(&d.vm, a.n, a.seed, &support)?
        }
    };
    let rep = accuracy_report(&inst, &d.vm, &points)?;
    let summary = accuracy_summary(&rep);
    let body = match a.format {
        Format::Csv => accuracy_csv(&rep)?,
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(&rep).map_err(IoError::from)?;
            v.push(b'\n');
            v
        }
    };
    write_output(a.out.as_deref(), &body, stdout)?;
    let mut v = serde_json::to_vec_pretty(&summary).map_err(IoError::from)?;
    v.push(b'\n');
    match &a.summary {
        Some(p) => fs::write(p, v).map_err(|source| IoError::File { path: p.clone(), source })?,
        None => stderr.write_all(&v)?,
    }
    if let Some(s) = rep.summary("system_cost") {
        writeln!(
            stderr,
            "system cost: mean {:+.3}%, min {:+.3}%, max {:+.3}% over {} rows ({} infeasible)",
            s.mean, s.min, s.max, s.count, rep.infeasible
        )?;
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs, stderr: &mut dyn Write) -> Result<(), CliError> {
    let datasets = service::load_data_dir(&a.data, a.budget_policy.into())?;
    if datasets.is_empty() {
        writeln!(stderr, "warning: no datasets found under {}", a.data.display())?;
    }
    let state = service::AppState::new();
    for (id, vm) in datasets {
        writeln!(stderr, "dataset `{id}`: {} iterates x {} dimensions", vm.m(), vm.n())?;
        state.add_dataset(id, vm);
    }
    if let Some(p) = a.snapshot.as_deref().filter(|p| p.exists()) {
        let n = state.restore_snapshot(p)?;
        writeln!(stderr, "restored {n} sessions from {}", p.display())?;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {addr}: {e}")))?;
        writeln!(stderr, "listening on http://{}", listener.local_addr()?)?;
        let shutdown = shutdown_signal();
        service::serve(listener, state, a.snapshot.clone(), shutdown).await?;
        Ok(())
    })
}

/// Resolves on Ctrl-C, or SIGTERM where there is one.
async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("SIGTERM handler installs");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

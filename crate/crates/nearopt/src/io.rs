//! On-disk formats: `iterates.csv` + `metadata.json`, `capacities.csv`, `instance.json`, and
//! point tables.
//!
//! Floats are written in Rust's shortest round-trip form, so write → read is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nearopt_core::cem::{CapacityEntry, ToyCemInstance};
use nearopt_core::model::{
    BudgetPolicy, BudgetViolation, DimensionInfo, DimensionKind, InterpolatedPoint, ModelError, VertexMatrix,
    VertexMatrixParts,
};
use serde::{Deserialize, Serialize};

pub const ITERATES_FILE: &str = "iterates.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const INSTANCE_FILE: &str = "instance.json";
pub const ID_COLUMN: &str = "iterate_id";
pub const WEIGHT_PREFIX: &str = "w.";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::File { path: path.into(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File { path: path.into(), source })
}

/// A dimension as written in `metadata.json`; `nonnegative` defaults by kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionRecord {
    pub name: String,
    pub kind: DimensionKind,
    #[serde(default)]
    pub units: String,
    #[serde(default)]
    pub nonnegative: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology: Option<String>,
}

impl From<DimensionRecord> for DimensionInfo {
    fn from(r: DimensionRecord) -> Self {
        let mut d = DimensionInfo::new(r.name, r.kind, r.units);
        if let Some(flag) = r.nonnegative {
            d = d.nonnegative(flag);
        }
        d.zone = r.zone;
        d.technology = r.technology;
        d
    }
}

impl From<&DimensionInfo> for DimensionRecord {
    fn from(d: &DimensionInfo) -> Self {
        Self {
            name: d.name.clone(),
            kind: d.kind,
            units: d.units.clone(),
            nonnegative: Some(d.nonnegative),
            zone: d.zone.clone(),
            technology: d.technology.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub dimensions: Vec<DimensionRecord>,
    pub least_cost_id: String,
    pub budget_slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_dimension: Option<String>,
}

impl Metadata {
    pub fn of(vm: &VertexMatrix) -> Self {
        Self {
            dimensions: vm.dims().iter().map(DimensionRecord::from).collect(),
            least_cost_id: vm.least_cost_id().to_string(),
            budget_slack: vm.budget_slack(),
            cost_dimension: vm.cost_dimension().map(|d| vm.dims()[d].name.clone()),
        }
    }
}

/// Parse iterates and metadata text into a validated matrix.
///
/// The CSV header must be `iterate_id` followed by exactly the metadata dimension names, in
/// the same order.
pub fn parse_vertex_matrix(
    iterates: impl Read,
    metadata: Metadata,
    policy: BudgetPolicy,
) -> Result<(VertexMatrix, Vec<BudgetViolation>), IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(iterates);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some(ID_COLUMN) {
        return Err(IoError::Format(format!("first CSV column must be `{ID_COLUMN}`")));
    }
    let names: Vec<&str> = header.iter().skip(1).collect();
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(IoError::Model(ModelError::DuplicateDimension(name.to_string())));
        }
        if !metadata.dimensions.iter().any(|d| d.name == *name) {
            return Err(IoError::Format(format!("CSV column `{name}` is not declared in metadata")));
        }
    }
    for (i, d) in metadata.dimensions.iter().enumerate() {
        if names.get(i) != Some(&d.name.as_str()) {
            let found = names.get(i).map_or("nothing".to_string(), |n| format!("`{n}`"));
            return Err(IoError::Format(format!(
                "CSV column {} should be dimension `{}`, found {found}",
                i + 2,
                d.name
            )));
        }
    }
    if names.len() != metadata.dimensions.len() {
        return Err(IoError::Format(format!(
            "CSV has {} dimension columns, metadata declares {}",
            names.len(),
            metadata.dimensions.len()
        )));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let row = rec
            .iter()
            .skip(1)
            .zip(&names)
            .map(|(cell, name)| {
                cell.parse::<f64>().map_err(|_| {
                    IoError::Format(format!("row {} (`{id}`), column `{name}`: `{cell}` is not a number", line + 2))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        ids.push(id);
        rows.push(row);
    }
    let parts = VertexMatrixParts {
        dims: metadata.dimensions.into_iter().map(DimensionInfo::from).collect(),
        vertex_ids: ids,
        rows,
        least_cost_id: metadata.least_cost_id,
        budget_slack: metadata.budget_slack,
        cost_dimension: metadata.cost_dimension,
    };
    Ok(VertexMatrix::with_policy(parts, policy)?)
}

pub fn load_vertex_matrix(
    iterates: &Path,
    metadata: &Path,
    policy: BudgetPolicy,
) -> Result<(VertexMatrix, Vec<BudgetViolation>), IoError> {
    let meta: Metadata = serde_json::from_reader(open(metadata)?)
        .map_err(|e| IoError::Format(format!("{}: {e}", metadata.display())))?;
    parse_vertex_matrix(open(iterates)?, meta, policy)
}

/// Load `iterates.csv` and `metadata.json` from `dir`.
pub fn load_dataset_dir(dir: &Path, policy: BudgetPolicy) -> Result<(VertexMatrix, Vec<BudgetViolation>), IoError> {
    load_vertex_matrix(&dir.join(ITERATES_FILE), &dir.join(METADATA_FILE), policy)
}

fn float(v: f64) -> String {
    format!("{v}")
}

pub fn write_iterates(vm: &VertexMatrix, out: impl Write) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(vm.dims().iter().map(|d| d.name.clone()));
    w.write_record(&header)?;
    for (i, id) in vm.vertex_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(vm.row(i).iter().map(|&v| float(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata(vm: &VertexMatrix, mut out: impl Write) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut out, &Metadata::of(vm))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_dataset_dir(vm: &VertexMatrix, dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.into(), source })?;
    let mut f = create(&dir.join(ITERATES_FILE))?;
    write_iterates(vm, &mut f)?;
    f.flush()?;
    let mut f = create(&dir.join(METADATA_FILE))?;
    write_metadata(vm, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<ToyCemInstance, IoError> {
    serde_json::from_reader(open(path)?).map_err(|e| IoError::Format(format!("{}: {e}", path.display())))
}

pub fn write_instance(inst: &ToyCemInstance, path: &Path) -> Result<(), IoError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, inst)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Per-(zone, technology) capacities of a point, from the capacity-kind dimensions.
///
/// Zone and technology come from dimension metadata, or from splitting `<zone>.<tech>` names.
pub fn capacities_of(vm: &VertexMatrix, point: &InterpolatedPoint) -> Result<Vec<CapacityEntry>, IoError> {
    let entries: Vec<CapacityEntry> = vm
        .dims()
        .iter()
        .zip(&point.coords)
        .filter(|(d, _)| d.kind == DimensionKind::Capacity)
        .map(|(d, &v)| {
            let (zone, technology) = match (&d.zone, &d.technology) {
                (Some(z), Some(t)) => (z.clone(), t.clone()),
                _ => match d.name.split_once('.') {
                    Some((z, t)) => (z.to_string(), t.to_string()),
                    None => (String::new(), d.name.clone()),
                },
            };
            CapacityEntry { zone, technology, capacity_mw: v }
        })
        .collect();
    if entries.is_empty() {
        return Err(IoError::Format("dataset has no capacity dimensions to export".into()));
    }
    Ok(entries)
}

pub fn write_capacities(entries: &[CapacityEntry], out: impl Write) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["zone", "technology", "capacity_mw"])?;
    for e in entries {
        w.write_record([e.zone.as_str(), e.technology.as_str(), &float(e.capacity_mw)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_capacities(input: impl Read) -> Result<Vec<CapacityEntry>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["zone", "technology", "capacity_mw"] {
        return Err(IoError::Format(format!("capacities header must be `zone,technology,capacity_mw`, got `{}`", header.join(","))));
    }
    Ok(rdr.deserialize().collect::<Result<Vec<CapacityEntry>, _>>()?)
}

/// One row of a point table.
#[derive(Debug, Clone, Serialize)]
pub struct PointRow {
    pub id: String,
    /// Extra leading columns such as a frontier cap; omitted from `--dims-only` output.
    pub extra: Vec<(String, f64)>,
    pub point: InterpolatedPoint,
}

/// CSV with `iterate_id`, every dimension, then extras and `w.<vertex id>` weights unless
/// `dims_only` (in which case the table reloads as an iterate file).
pub fn write_points_csv(vm: &VertexMatrix, rows: &[PointRow], dims_only: bool, out: impl Write) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(vm.dims().iter().map(|d| d.name.clone()));
    if !dims_only {
        if let Some(r) = rows.first() {
            header.extend(r.extra.iter().map(|(k, _)| k.clone()));
        }
        header.extend(vm.vertex_ids().iter().map(|id| format!("{WEIGHT_PREFIX}{id}")));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.id.clone()];
        rec.extend(r.point.coords.iter().map(|&v| float(v)));
        if !dims_only {
            rec.extend(r.extra.iter().map(|(_, v)| float(*v)));
            rec.extend(r.point.weights.as_slice().iter().map(|&v| float(v)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points_json(vm: &VertexMatrix, rows: &[PointRow], mut out: impl Write) -> Result<(), IoError> {
    let points: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let mut obj = serde_json::json!({
                "id": r.id,
                "coords": r.point.coords,
                "weights": r.point.weights,
                "exactness": r.point.exactness,
            });
            for (k, v) in &r.extra {
                obj[k] = serde_json::json!(v);
            }
            obj
        })
        .collect();
    let doc = serde_json::json!({
        "dimensions": vm.dims().iter().map(|d| &d.name).collect::<Vec<_>>(),
        "vertex_ids": vm.vertex_ids(),
        "points": points,
    });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Weight vectors from JSON: one array of numbers, or an array of such arrays.
pub fn parse_weights(text: &str) -> Result<Vec<Vec<f64>>, IoError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Weights {
        One(Vec<f64>),
        Many(Vec<Vec<f64>>),
    }
    match serde_json::from_str(text)? {
        Weights::One(w) => Ok(vec![w]),
        Weights::Many(ws) => Ok(ws),
    }
}

//! File formats: graph and condition JSON input, CSV and JSON output with the
//! run configuration echoed into every file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::conditions::{ConditionCB, ConditionPreset, ConditionYR, OuterBoundary};
use crate::graph::{Graph, GraphError, MetricGraph};
use crate::linalg::CMatrix;

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = concat!("bilap ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("edges {with:?} carry a length but edges {without:?} do not")]
    MixedLengths { with: Vec<usize>, without: Vec<usize> },
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeSpec {
    source: usize,
    target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSpec {
    vertices: usize,
    edges: Vec<EdgeSpec>,
}

/// A graph file with all lengths present gives a metric graph.
#[derive(Debug, Clone)]
pub enum ParsedGraph {
    Combinatorial(Graph),
    Metric(MetricGraph),
}

impl ParsedGraph {
    pub fn graph(&self) -> &Graph {
        match self {
            ParsedGraph::Combinatorial(g) => g,
            ParsedGraph::Metric(m) => m.graph(),
        }
    }

    /// The metric graph, with unit lengths when none were given.
    pub fn into_metric(self) -> Result<MetricGraph, GraphError> {
        match self {
            ParsedGraph::Combinatorial(g) => MetricGraph::equilateral(g, 1.0),
            ParsedGraph::Metric(m) => Ok(m),
        }
    }
}

pub fn parse_graph_str(text: &str) -> Result<ParsedGraph, IoError> {
    let spec: GraphSpec = serde_json::from_str(text)
        .map_err(|e| IoError::SchemaError(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let edges: Vec<(usize, usize)> = spec.edges.iter().map(|e| (e.source, e.target)).collect();
    let (with, without): (Vec<usize>, Vec<usize>) =
        (0..spec.edges.len()).partition(|&i| spec.edges[i].length.is_some());
    let graph = Graph::new(spec.vertices, edges)?;
    if without.is_empty() && !with.is_empty() {
        let lengths = spec.edges.iter().map(|e| e.length.unwrap_or_default()).collect();
        Ok(ParsedGraph::Metric(MetricGraph::new(graph, lengths)?))
    } else if with.is_empty() {
        Ok(ParsedGraph::Combinatorial(graph))
    } else {
        Err(IoError::MixedLengths { with, without })
    }
}

pub fn parse_graph_json(path: &Path) -> Result<ParsedGraph, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_graph_str(&text)
}

pub fn graph_to_json(graph: &Graph, lengths: Option<&[f64]>) -> String {
    let spec = GraphSpec {
        vertices: graph.vertex_count(),
        edges: graph
            .edges()
            .iter()
            .enumerate()
            .map(|(i, &(source, target))| EdgeSpec {
                source,
                target,
                length: lengths.map(|l| l[i]),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&spec).expect("graph specs serialize")
}

/// A vertex condition as read from JSON.
#[derive(Debug, Clone)]
pub enum ConditionInput {
    Preset(ConditionPreset),
    YR(ConditionYR),
    CB(ConditionCB),
}

/// Complex matrix as rows of `[re, im]` pairs.
pub fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn matrix_from_json(v: &Value, name: &str) -> Result<CMatrix, IoError> {
    let schema = |msg: &str| IoError::SchemaError(format!("{name}: {msg}"));
    let rows = v.as_array().ok_or_else(|| schema("expected an array of rows"))?;
    let nrows = rows.len();
    let mut entries = Vec::new();
    let mut ncols = None;
    for row in rows {
        let row = row.as_array().ok_or_else(|| schema("row is not an array"))?;
        if *ncols.get_or_insert(row.len()) != row.len() {
            return Err(schema("rows have different lengths"));
        }
        for z in row {
            let pair = z.as_array().filter(|p| p.len() == 2);
            let pair = pair.ok_or_else(|| schema("entries must be [re, im] pairs"))?;
            let re = pair[0].as_f64().ok_or_else(|| schema("non-numeric entry"))?;
            let im = pair[1].as_f64().ok_or_else(|| schema("non-numeric entry"))?;
            entries.push(Complex64::new(re, im));
        }
    }
    Ok(CMatrix::from_row_slice(nrows, ncols.unwrap_or(0), &entries))
}

fn param(params: Option<&Value>, key: &str) -> Result<f64, IoError> {
    params
        .and_then(|p| p.get(key))
        .and_then(Value::as_f64)
        .ok_or_else(|| IoError::SchemaError(format!("kiik needs numeric params.{key}")))
}

/// `{"preset": name, "params": {...}}`, `{"Y_basis", "R"}` or `{"C", "B"}`.
pub fn parse_condition_str(text: &str) -> Result<ConditionInput, IoError> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| IoError::SchemaError(e.to_string()))?;
    if let Some(inner) = v.get_mut("result").map(Value::take) {
        v = inner;
    }
    if let Some(name) = v.get("preset").and_then(Value::as_str) {
        let params = v.get("params");
        let preset = if name == "kiik" {
            let outer = params
                .and_then(|p| p.get("outer"))
                .and_then(Value::as_str)
                .unwrap_or("clamped");
            ConditionPreset::Kiik {
                alpha: param(params, "alpha")?,
                beta: param(params, "beta")?,
                gamma: param(params, "gamma")?,
                outer: outer
                    .parse::<OuterBoundary>()
                    .map_err(|e| IoError::SchemaError(e.to_string()))?,
            }
        } else {
            ConditionPreset::from_name(name).map_err(|e| IoError::SchemaError(e.to_string()))?
        };
        return Ok(ConditionInput::Preset(preset));
    }
    if let (Some(y), Some(r)) = (v.get("Y_basis"), v.get("R")) {
        let y = matrix_from_json(y, "Y_basis")?;
        let r = matrix_from_json(r, "R")?;
        let cond = ConditionYR::from_spanning_set(&y, &embed_r(&y, &r)?, "custom")
            .map_err(|e| IoError::SchemaError(e.to_string()))?;
        return Ok(ConditionInput::YR(cond));
    }
    if let (Some(c), Some(b)) = (v.get("C"), v.get("B")) {
        return Ok(ConditionInput::CB(ConditionCB {
            c: matrix_from_json(c, "C")?,
            b: matrix_from_json(b, "B")?,
        }));
    }
    Err(IoError::SchemaError(
        "expected \"preset\", \"Y_basis\"/\"R\" or \"C\"/\"B\"".into(),
    ))
}

/// `R` is given in the coordinates of the supplied basis; lift it to the
/// trace space through the pseudo-inverse of that basis.
fn embed_r(y: &CMatrix, r: &CMatrix) -> Result<CMatrix, IoError> {
    if r.nrows() != y.ncols() || r.ncols() != y.ncols() {
        return Err(IoError::SchemaError(format!(
            "R is {}x{} but Y_basis has {} columns",
            r.nrows(),
            r.ncols(),
            y.ncols()
        )));
    }
    let pinv = y
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| IoError::SchemaError(e.to_string()))?;
    Ok(pinv.adjoint() * r * pinv)
}

pub fn parse_condition_json(path: &Path) -> Result<ConditionInput, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_condition_str(&text)
}

pub fn condition_yr_to_json(cond: &ConditionYR) -> Value {
    serde_json::json!({
        "Y_basis": matrix_to_json(&cond.y_basis),
        "R": matrix_to_json(&cond.r),
    })
}

pub fn condition_cb_to_json(cond: &ConditionCB) -> Value {
    serde_json::json!({
        "C": matrix_to_json(&cond.c),
        "B": matrix_to_json(&cond.b),
    })
}

/// Everything that determines a run; echoed into every output file.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub graph: Option<String>,
    pub condition: Option<String>,
    pub mesh: Option<usize>,
    pub times: Option<String>,
    pub seed: u64,
    pub out: Option<String>,
    pub tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn new(command: impl Into<String>) -> Self {
        RunConfig {
            command: command.into(),
            seed: 42,
            ..Default::default()
        }
    }

    /// The override for `name`, or `default`.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

/// `a:b:n`, `n` geometrically spaced points from `a` to `b`.
pub fn parse_time_grid(spec: &str) -> Result<Vec<f64>, IoError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || IoError::SchemaError(format!("time grid '{spec}' is not a:b:n with 0 < a <= b"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(a > 0.0) || !(b >= a) || n == 0 {
        return Err(bad());
    }
    Ok(crate::discrete::geometric_grid(a, b, n))
}

/// `NAME=VALUE`.
pub fn parse_tolerance(spec: &str) -> Result<(String, f64), IoError> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| IoError::SchemaError(format!("tolerance '{spec}' is not NAME=VALUE")))?;
    let value: f64 = value
        .parse()
        .map_err(|_| IoError::SchemaError(format!("tolerance '{spec}' has a non-numeric value")))?;
    Ok((name.to_string(), value))
}

/// JSON document with schema version, tool version and config.
pub fn json_document(config: &RunConfig, result: &impl Serialize) -> String {
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "tool": TOOL_VERSION,
        "config": config,
        "result": result,
    });
    serde_json::to_string_pretty(&doc).expect("documents serialize")
}

/// CSV text preceded by `#` comment lines holding the schema version, tool
/// version and config.
pub fn csv_document<R: AsRef<[String]>>(config: &RunConfig, header: &[&str], rows: &[R]) -> Result<String, IoError> {
    let mut out = format!(
        "# schema_version: {SCHEMA_VERSION}\n# tool: {TOOL_VERSION}\n# config: {}\n",
        serde_json::to_string(config).expect("config serializes")
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref())?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::SchemaError(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, IoError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn spectrum_rows(values: &[f64]) -> Vec<Vec<String>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), format!("{v:e}")])
        .collect()
}

pub fn trajectory_rows(traj: &crate::fem::Trajectory) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (t, values) in traj.times.iter().zip(&traj.values) {
        for (node, v) in values.iter().enumerate() {
            rows.push(vec![format!("{t:e}"), node.to_string(), format!("{v:e}")]);
        }
    }
    rows
}

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::template::{placeholders, render};
use super::with_workers;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.json";

/// Placeholders every template may use besides the declared parameters.
const BUILTINS: [&str; 2] = ["run_dir", "run_id"];

/// A command as one whitespace-separated string or an explicit argv list.
/// Either way the command runs without a shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommandTemplate {
    Line(String),
    Argv(Vec<String>),
}

impl CommandTemplate {
    pub fn argv(&self) -> Vec<String> {
        match self {
            CommandTemplate::Line(s) => s.split_whitespace().map(str::to_string).collect(),
            CommandTemplate::Argv(v) => v.clone(),
        }
    }
}

fn default_metric_path() -> String {
    "{run_dir}/metrics.json".into()
}

fn default_select_metric() -> String {
    "map50".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Parameter name to its ordered values (strings or numbers).
    pub parameters: BTreeMap<String, Vec<Value>>,
    pub command: CommandTemplate,
    #[serde(default = "default_metric_path")]
    pub metric_path: String,
    #[serde(default = "default_select_metric")]
    pub select_metric: String,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.parameters.is_empty() {
            return Err(Error::Config("grid needs at least one parameter".into()));
        }
        for (name, values) in &self.parameters {
            if BUILTINS.contains(&name.as_str()) {
                return Err(Error::Config(format!("parameter name {name:?} is reserved")));
            }
            if values.is_empty() {
                return Err(Error::Config(format!("parameter {name:?} has no values")));
            }
            if let Some(v) = values.iter().find(|v| !(v.is_string() || v.is_number())) {
                return Err(Error::Config(format!("parameter {name:?} has non-scalar value {v}")));
            }
        }
        let mut templates = self.command.argv();
        templates.push(self.metric_path.clone());
        for t in &templates {
            for p in placeholders(t) {
                if !self.parameters.contains_key(&p) && !BUILTINS.contains(&p.as_str()) {
                    return Err(Error::UnknownPlaceholder(p));
                }
            }
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.parameters.values().map(Vec::len).product()
    }
}

pub fn read_grid_spec(path: &Path) -> Result<GridSpec> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: usize,
    pub parameters: BTreeMap<String, Value>,
    pub command: Vec<String>,
    pub run_dir: PathBuf,
    pub metric_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub select_metric: String,
    pub runs: Vec<RunConfig>,
}

/// Cartesian product of the grid: parameter names in lexicographic order,
/// the first name varying slowest, values in their listed order.
pub fn expand_grid(g: &GridSpec, out_dir: &Path) -> Result<RunManifest> {
    g.validate()?;
    let names: Vec<&String> = g.parameters.keys().collect();
    let lists: Vec<&Vec<Value>> = g.parameters.values().collect();
    let argv = g.command.argv();
    let mut digits = vec![0usize; names.len()];
    let mut runs = Vec::with_capacity(g.run_count());
    for run_id in 0..g.run_count() {
        let parameters: BTreeMap<String, Value> =
            names.iter().zip(&digits).zip(&lists).map(|((n, &i), l)| ((*n).clone(), l[i].clone())).collect();
        let run_dir = out_dir.join(format!("run_{run_id:04}"));
        let mut values: BTreeMap<String, String> = parameters.iter().map(|(k, v)| (k.clone(), value_text(v))).collect();
        values.insert("run_dir".into(), run_dir.to_string_lossy().into_owned());
        values.insert("run_id".into(), run_id.to_string());
        let command = argv.iter().map(|a| render(a, &values)).collect::<Result<_>>()?;
        let metric_path = PathBuf::from(render(&g.metric_path, &values)?);
        runs.push(RunConfig { run_id, parameters, command, run_dir, metric_path });

        for pos in (0..digits.len()).rev() {
            digits[pos] += 1;
            if digits[pos] < lists[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(RunManifest { select_metric: g.select_metric.clone(), runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: usize,
    pub exit_code: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn execute_one(run: &RunConfig) -> RunOutcome {
    let attempt = || -> std::result::Result<Option<i32>, String> {
        let (program, args) = run.command.split_first().ok_or("empty command")?;
        std::fs::create_dir_all(&run.run_dir).map_err(|e| e.to_string())?;
        let stdout = File::create(run.run_dir.join("stdout.log")).map_err(|e| e.to_string())?;
        let stderr = File::create(run.run_dir.join("stderr.log")).map_err(|e| e.to_string())?;
        let status = Command::new(program)
            .args(args)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .status()
            .map_err(|e| format!("cannot start {program:?}: {e}"))?;
        Ok(status.code())
    };
    match attempt() {
        Ok(exit_code) => RunOutcome { run_id: run.run_id, exit_code, error: None },
        Err(e) => RunOutcome { run_id: run.run_id, exit_code: None, error: Some(e) },
    }
}

/// Run every command of the manifest with at most `workers` concurrent
/// processes (`0` = one per core). Outcomes are ordered by run id.
pub fn execute_manifest(m: &RunManifest, workers: usize) -> Result<Vec<RunOutcome>> {
    with_workers(workers, || m.runs.par_iter().map(execute_one).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: usize,
    pub parameters: BTreeMap<String, Value>,
    pub status: RunStatus,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// `run_id,status,<parameters>,<metrics>,note`, columns sorted by name.
    pub fn to_csv(&self) -> String {
        let mut params: Vec<&String> = self.rows.iter().flat_map(|r| r.parameters.keys()).collect();
        params.sort();
        params.dedup();
        let mut metrics: Vec<&String> = self.rows.iter().flat_map(|r| r.metrics.keys()).collect();
        metrics.sort();
        metrics.dedup();
        let mut header = vec!["run_id".to_string(), "status".into()];
        header.extend(params.iter().map(|p| p.to_string()));
        header.extend(metrics.iter().map(|m| m.to_string()));
        header.push("note".into());
        let mut out = csv_line(&header);
        for r in &self.rows {
            let status = match r.status {
                RunStatus::Ok => "OK",
                RunStatus::Failed => "FAILED",
            };
            let mut cells = vec![r.run_id.to_string(), status.into()];
            cells.extend(params.iter().map(|p| r.parameters.get(*p).map(value_text).unwrap_or_default()));
            cells.extend(metrics.iter().map(|m| r.metrics.get(*m).map(|v| v.to_string()).unwrap_or_default()));
            cells.push(r.note.clone().unwrap_or_default());
            out.push_str(&csv_line(&cells));
        }
        out
    }
}

pub(crate) fn csv_line(cells: &[String]) -> String {
    let quoted: Vec<String> = cells
        .iter()
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect();
    format!("{}\n", quoted.join(","))
}

/// Flatten nested objects into dotted names; every leaf must be a number.
fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, f64>) -> std::result::Result<(), String> {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&key(k), child, out)?;
            }
            Ok(())
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), child, out)?;
            }
            Ok(())
        }
        Value::Number(n) => {
            out.insert(prefix.to_string(), n.as_f64().ok_or("unrepresentable number")?);
            Ok(())
        }
        other => Err(format!("metric {prefix:?} is not numeric: {other}")),
    }
}

fn read_metrics(path: &Path) -> std::result::Result<BTreeMap<String, f64>, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| format!("corrupt metric file: {e}"))?;
    if !value.is_object() {
        return Err("metric file is not a JSON object".into());
    }
    let mut out = BTreeMap::new();
    flatten("", &value, &mut out)?;
    Ok(out)
}

/// One row per run; unreadable or non-numeric metric files become FAILED rows.
pub fn collect_results(m: &RunManifest) -> ResultsTable {
    let rows = m
        .runs
        .iter()
        .map(|run| {
            let (status, metrics, note) = match read_metrics(&run.metric_path) {
                Ok(metrics) => (RunStatus::Ok, metrics, None),
                Err(e) => (RunStatus::Failed, BTreeMap::new(), Some(e)),
            };
            ResultRow { run_id: run.run_id, parameters: run.parameters.clone(), status, metrics, note }
        })
        .collect();
    ResultsTable { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

/// Best non-FAILED row carrying `metric`; ties go to the lowest run id
/// whatever the row order.
pub fn select_best<'a>(t: &'a ResultsTable, metric: &str, direction: Direction) -> Result<&'a ResultRow> {
    let mut best: Option<(&ResultRow, f64)> = None;
    for row in &t.rows {
        if row.status != RunStatus::Ok {
            continue;
        }
        let Some(&v) = row.metrics.get(metric) else { continue };
        if v.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bv)) => {
                let cmp = match direction {
                    Direction::Maximize => v.total_cmp(&bv),
                    Direction::Minimize => bv.total_cmp(&v),
                };
                cmp.is_gt() || (cmp.is_eq() && row.run_id < b.run_id)
            }
        };
        if better {
            best = Some((row, v));
        }
    }
    best.map(|b| b.0).ok_or_else(|| Error::NoValidRuns(metric.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn grid(params: Value, command: &str) -> GridSpec {
        serde_json::from_value(json!({ "parameters": params, "command": command })).unwrap()
    }

    #[test]
    fn expansion_order_and_rendering() {
        let g = grid(json!({"size": ["n", "s", "m"], "lr": ["a", "b"]}), "train --lr {lr} --size {size} {run_dir}");
        let m = expand_grid(&g, Path::new("out")).unwrap();
        assert_eq!(m.runs.len(), 6);
        // "lr" sorts before "size", so it varies slowest.
        assert_eq!(m.runs[0].command, ["train", "--lr", "a", "--size", "n", "out/run_0000"]);
        assert_eq!(m.runs[1].command[4], "s");
        assert_eq!(m.runs[3].command[2], "b");
        assert_eq!(m.runs[5].metric_path, PathBuf::from("out/run_0005/metrics.json"));
    }

    #[test]
    fn numbers_render_as_json() {
        let g = grid(json!({"lr": [0.01, 2]}), "t {lr}");
        let m = expand_grid(&g, Path::new("o")).unwrap();
        assert_eq!(m.runs[0].command[1], "0.01");
        assert_eq!(m.runs[1].command[1], "2");
    }

    #[test]
    fn invalid_grids() {
        assert_eq!(expand_grid(&grid(json!({"a": [1]}), "x {b}"), Path::new("o")).unwrap_err().code(), "UNKNOWN_PLACEHOLDER");
        assert!(expand_grid(&grid(json!({"a": []}), "x"), Path::new("o")).is_err());
        assert!(expand_grid(&grid(json!({}), "x"), Path::new("o")).is_err());
        assert!(expand_grid(&grid(json!({"a": [[1]]}), "x"), Path::new("o")).is_err());
    }

    fn row(run_id: usize, v: Option<f64>) -> ResultRow {
        ResultRow {
            run_id,
            parameters: BTreeMap::new(),
            status: if v.is_some() { RunStatus::Ok } else { RunStatus::Failed },
            metrics: v.map(|v| BTreeMap::from([("map50".to_string(), v)])).unwrap_or_default(),
            note: None,
        }
    }

    #[test]
    fn select_best_examples() {
        let t = ResultsTable { rows: vec![row(0, Some(0.3)), row(1, Some(0.7)), row(2, Some(0.5))] };
        assert_eq!(select_best(&t, "map50", Direction::Maximize).unwrap().run_id, 1);
        assert_eq!(select_best(&t, "map50", Direction::Minimize).unwrap().run_id, 0);
        let t = ResultsTable { rows: vec![row(1, Some(0.7)), row(0, Some(0.7))] };
        assert_eq!(select_best(&t, "map50", Direction::Maximize).unwrap().run_id, 0);
        let t = ResultsTable { rows: vec![row(0, None), row(1, None)] };
        assert_eq!(select_best(&t, "map50", Direction::Maximize).unwrap_err().code(), "NO_VALID_RUNS");
    }

    #[test]
    fn flatten_nested_metrics() {
        let mut out = BTreeMap::new();
        flatten("", &json!({"map50": 0.5, "per_class": {"body": 0.25}}), &mut out).unwrap();
        assert_eq!(out["per_class.body"], 0.25);
        assert!(flatten("", &json!({"map50": "high"}), &mut BTreeMap::new()).is_err());
    }
}

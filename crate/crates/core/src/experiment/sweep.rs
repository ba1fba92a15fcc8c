use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::csv_line;
use super::mock::{mock_detect, MockDetectorConfig};
use super::template::{placeholders, render};
use super::with_workers;
use crate::coco::{self, read_predictions, to_canonical_json};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalReport};
use crate::photometric::{darken_dataset_static, ANNOTATIONS_FILE};

pub const CURVE_FILE: &str = "curve.csv";
const PLACEHOLDERS: [&str; 5] = ["dataset", "images_root", "predictions", "level", "out"];

/// Where each level's predictions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Mock(MockDetectorConfig),
    /// argv template; may use `{dataset}`, `{images_root}`, `{predictions}`,
    /// `{level}` and `{out}`. The command must write `{predictions}`.
    Command(Vec<String>),
}

impl Default for Detector {
    fn default() -> Self {
        Detector::Mock(MockDetectorConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub levels: Vec<i64>,
    pub detector: Detector,
    pub eval: EvalConfig,
    /// Concurrent levels; `0` = one per core.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { levels: vec![0, 20, 40, 60, 80], detector: Detector::default(), eval: EvalConfig::default(), workers: 0 }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("sweep needs at least one level".into()));
        }
        if let Some(&d) = self.levels.iter().find(|d| !(0..=100).contains(*d)) {
            return Err(Error::DarkenRange(d));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep levels must be strictly increasing".into()));
        }
        match &self.detector {
            Detector::Mock(m) => m.validate()?,
            Detector::Command(argv) => {
                if argv.is_empty() {
                    return Err(Error::Config("detector command is empty".into()));
                }
                for p in argv.iter().flat_map(|a| placeholders(a)) {
                    if !PLACEHOLDERS.contains(&p.as_str()) {
                        return Err(Error::UnknownPlaceholder(p));
                    }
                }
            }
        }
        self.eval.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub darkening_percent: i64,
    pub failed: bool,
    pub map50: Option<f64>,
    /// AP at IoU 0.5 per evaluation group.
    pub groups: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveTable {
    pub group_names: Vec<String>,
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn map50_column(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.map50).collect()
    }

    /// `darkening_percent,map50,<groups>`; failed rows carry `FAILED`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["darkening_percent".to_string(), "map50".into()];
        header.extend(self.group_names.iter().cloned());
        let mut out = csv_line(&header);
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            let mut cells = vec![r.darkening_percent.to_string()];
            if r.failed {
                cells.push("FAILED".into());
                cells.extend(self.group_names.iter().map(|_| String::new()));
            } else {
                cells.push(cell(r.map50));
                cells.extend(self.group_names.iter().map(|g| cell(r.groups.get(g).copied().flatten())));
            }
            out.push_str(&csv_line(&cells));
        }
        out
    }
}

pub fn level_dir(out_dir: &Path, d: i64) -> PathBuf {
    out_dir.join(format!("level_{d:03}"))
}

fn run_detector(detector: &Detector, dir: &Path, d: i64) -> Result<PathBuf> {
    let dataset_json = dir.join(ANNOTATIONS_FILE);
    let predictions = dir.join("predictions.json");
    match detector {
        Detector::Mock(cfg) => {
            let dataset = coco::read_dataset(&dataset_json)?;
            let set = mock_detect(&dataset, dir, cfg)?;
            std::fs::write(&predictions, to_canonical_json(&set)?).map_err(|e| Error::io(&predictions, e))?;
        }
        Detector::Command(template) => {
            let values: BTreeMap<String, String> = [
                ("dataset", dataset_json.to_string_lossy().into_owned()),
                ("images_root", dir.to_string_lossy().into_owned()),
                ("predictions", predictions.to_string_lossy().into_owned()),
                ("level", d.to_string()),
                ("out", dir.to_string_lossy().into_owned()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            let argv: Vec<String> = template.iter().map(|a| render(a, &values)).collect::<Result<_>>()?;
            let status = Command::new(&argv[0])
                .args(&argv[1..])
                .stdin(Stdio::null())
                .status()
                .map_err(|e| Error::Command(format!("cannot start {:?}: {e}", argv[0])))?;
            if !status.success() {
                return Err(Error::Command(format!("detector exited with {status} at level {d}")));
            }
        }
    }
    Ok(predictions)
}

fn run_level(dataset_json: &Path, images_root: &Path, d: i64, cfg: &SweepConfig, out_dir: &Path) -> Result<EvalReport> {
    let dir = level_dir(out_dir, d);
    let dataset = darken_dataset_static(dataset_json, images_root, d, &dir)?;
    let predictions_path = run_detector(&cfg.detector, &dir, d)?;
    let predictions = read_predictions(&predictions_path, &dataset)?;
    let report = evaluate(&dataset, &predictions, &cfg.eval)?;
    let eval_path = dir.join("eval.json");
    std::fs::write(&eval_path, to_canonical_json(&report)?).map_err(|e| Error::io(&eval_path, e))?;
    Ok(report)
}

/// Darken the dataset to every level, detect, evaluate and tabulate. Each
/// level lives in `out_dir/level_DDD/`; a failing level becomes a FAILED row.
pub fn darkening_sweep(dataset_json: &Path, images_root: &Path, cfg: &SweepConfig, out_dir: &Path) -> Result<CurveTable> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let reports: Vec<Result<EvalReport>> = with_workers(cfg.workers, || {
        cfg.levels.par_iter().map(|&d| run_level(dataset_json, images_root, d, cfg, out_dir)).collect()
    })?;

    let threshold = cfg.eval.map50_index();
    let mut table = CurveTable::default();
    for (&d, report) in cfg.levels.iter().zip(reports) {
        let row = match report {
            Ok(r) => {
                for g in &r.groups {
                    if !table.group_names.contains(&g.group) {
                        table.group_names.push(g.group.clone());
                    }
                }
                let groups = r.groups.iter().map(|g| (g.group.clone(), threshold.and_then(|t| g.results[t].ap))).collect();
                CurveRow { darkening_percent: d, failed: false, map50: r.map50, groups, note: None }
            }
            Err(e) => CurveRow {
                darkening_percent: d,
                failed: true,
                map50: None,
                groups: BTreeMap::new(),
                note: Some(format!("{}: {e}", e.code())),
            },
        };
        table.rows.push(row);
    }
    let csv = out_dir.join(CURVE_FILE);
    std::fs::write(&csv, table.to_csv()).map_err(|e| Error::io(&csv, e))?;
    let json = out_dir.join("curve.json");
    std::fs::write(&json, to_canonical_json(&table)?).map_err(|e| Error::io(&json, e))?;
    Ok(table)
}

//! Command-line front end. Every subcommand prints one JSON summary line on
//! stdout; diagnostics go to stderr. Exit codes: 0 success, 1 operational
//! failure, 2 usage error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::coco::{self, to_canonical_json};
use crate::error::{Error, Result};
use crate::eval::{self, EvalConfig, EvalMode, Grouping};
use crate::experiment::{self, Detector, Direction, MockDetectorConfig, SweepConfig};
use crate::photometric::{self, ANNOTATIONS_FILE};
use crate::scene::{self, RandomisationConfig, SceneSpec, DEFAULT_MIN_VISIBILITY, SCENES_FILE};

#[derive(Debug, Parser)]
#[command(name = "palletbench", version, about = "Pallet instance-segmentation dataset and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Lint a COCO dataset; exits 1 when defects are found.
    Validate(ValidateArgs),
    /// Generate randomised scenes, render them and export a dataset.
    Generate(GenerateArgs),
    /// Render and export a dataset from a saved scenes file.
    Export(ExportArgs),
    /// Darken every image of a dataset by a fixed or random percentage.
    Darken(DarkenArgs),
    /// Evaluate a detector over increasingly darkened copies of a dataset.
    SweepDarken(SweepArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Compare two prediction sets for the same dataset.
    Stability(StabilityArgs),
    /// Expand a hyper-parameter grid into a run manifest (optionally run it).
    GridExpand(GridExpandArgs),
    /// Collect per-run metrics of a manifest and pick the best run.
    GridCollect(GridCollectArgs),
    /// Emit ground truth as predictions, thinned by image brightness.
    MockDetect(MockDetectArgs),
    /// Merge two datasets with dense renumbering.
    Merge(MergeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Mask,
    Bbox,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
#[allow(clippy::enum_variant_names)]
enum GroupingArg {
    ByClass,
    ByArrangement,
    ByClassAndArrangement,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mask => EvalMode::Mask,
            ModeArg::Bbox => EvalMode::Bbox,
        }
    }
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::ByClass => Grouping::ByClass,
            GroupingArg::ByArrangement => Grouping::ByArrangement,
            GroupingArg::ByClassAndArrangement => Grouping::ByClassAndArrangement,
        }
    }
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// COCO annotations JSON.
    #[arg(long)]
    dataset: PathBuf,
    /// Directory image file names are relative to; enables missing-file checks.
    #[arg(long)]
    images_root: Option<PathBuf>,
    /// Directory for the full defect report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Randomisation config JSON (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_VISIBILITY)]
    min_visibility: f64,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Scenes JSON written by `generate`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_VISIBILITY)]
    min_visibility: f64,
}

#[derive(Debug, Args)]
struct DarkenArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Defaults to the directory holding the dataset JSON.
    #[arg(long)]
    images_root: Option<PathBuf>,
    /// Darkening percent, or the maximum percent with --random.
    #[arg(long)]
    darken: i64,
    /// Draw a per-image level in [0, darken] from --seed.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// IoU thresholds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    iou: Vec<f64>,
    #[arg(long, value_enum, default_value = "mask")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "by_class")]
    grouping: GroupingArg,
}

impl EvalArgs {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            iou_thresholds: self.iou.clone(),
            mode: self.mode.into(),
            grouping: self.grouping.into(),
            ..EvalConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    images_root: Option<PathBuf>,
    /// Sweep config JSON (levels, detector, eval, workers); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Darkening percents, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<i64>>,
    /// Mock detector seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Mock detector mask jitter.
    #[arg(long)]
    jitter_px: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    iou: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    grouping: Option<GroupingArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
    /// Directory for the JSON and CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Exactly two prediction files.
    #[arg(long, num_args = 2, required = true)]
    predictions: Vec<PathBuf>,
    /// Minimum IoU for a pair to count as matched.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridExpandArgs {
    /// Grid spec JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also run every command.
    #[arg(long)]
    execute: bool,
    /// Concurrent runs with --execute; 0 = one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct GridCollectArgs {
    /// Run manifest written by grid-expand.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pick the lowest value instead of the highest.
    #[arg(long)]
    minimize: bool,
}

#[derive(Debug, Args)]
struct MockDetectArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    images_root: Option<PathBuf>,
    /// Mock detector config JSON; --seed and --jitter-px override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jitter_px: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// Exactly two datasets; records of the first keep the lower ids.
    #[arg(long, num_args = 2, required = true)]
    dataset: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome { summary, code }) => {
            println!("{summary}");
            code
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            1
        }
    }
}

struct Outcome {
    summary: Value,
    code: i32,
}

impl From<Value> for Outcome {
    fn from(summary: Value) -> Self {
        Outcome { summary, code: 0 }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn images_root(explicit: Option<PathBuf>, dataset: &Path) -> PathBuf {
    explicit.unwrap_or_else(|| photometric::default_images_root(dataset))
}

fn dispatch(cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::Validate(a) => validate(a),
        Cmd::Generate(a) => generate(a).map(Into::into),
        Cmd::Export(a) => export(a).map(Into::into),
        Cmd::Darken(a) => darken(a).map(Into::into),
        Cmd::SweepDarken(a) => sweep(a).map(Into::into),
        Cmd::Evaluate(a) => evaluate(a).map(Into::into),
        Cmd::Stability(a) => stability(a).map(Into::into),
        Cmd::GridExpand(a) => grid_expand(a).map(Into::into),
        Cmd::GridCollect(a) => grid_collect(a),
        Cmd::MockDetect(a) => mock(a).map(Into::into),
        Cmd::Merge(a) => merge(a).map(Into::into),
    }
}

fn validate(a: ValidateArgs) -> Result<Outcome> {
    let d = coco::read_dataset(&a.dataset)?;
    let report = coco::validate_dataset(&d, a.images_root.as_deref());
    for defect in &report.defects {
        eprintln!("{}: {}", defect.code.as_str(), defect.message);
    }
    if let Some(out) = &a.out {
        write(&out.join("validation.json"), to_canonical_json(&report)?)?;
    }
    Ok(Outcome { summary: json!({ "defects": report.len() }), code: if report.is_clean() { 0 } else { 1 } })
}

fn export_specs(specs: &[SceneSpec], out: &Path, min_visibility: f64) -> Result<Value> {
    let d = scene::export_dataset(specs, out, min_visibility)?;
    Ok(json!({
        "images": d.images.len(),
        "annotations": d.annotations.len(),
        "dataset": out.join(ANNOTATIONS_FILE),
    }))
}

fn generate(a: GenerateArgs) -> Result<Value> {
    let cfg = match &a.config {
        Some(path) => scene::read_config(path)?,
        None => RandomisationConfig::default(),
    };
    let seed = experiment::effective_seed(a.seed)?;
    let specs = scene::generate_batch(&cfg, a.count, seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    scene::write_scenes(&specs, &a.out.join(SCENES_FILE))?;
    write(&a.out.join("config.json"), scene::config_to_json(&cfg)?)?;
    let mut summary = export_specs(&specs, &a.out, a.min_visibility)?;
    summary["seed"] = json!(seed);
    Ok(summary)
}

fn export(a: ExportArgs) -> Result<Value> {
    let specs: Vec<SceneSpec> = read_json(&a.config)?;
    export_specs(&specs, &a.out, a.min_visibility)
}

fn darken(a: DarkenArgs) -> Result<Value> {
    let root = images_root(a.images_root, &a.dataset);
    if a.random {
        let seed = experiment::effective_seed(a.seed)?;
        let (d, _) = photometric::darken_dataset_random(&a.dataset, &root, a.darken, seed, &a.out)?;
        Ok(json!({ "images": d.images.len(), "d_max": a.darken, "seed": seed }))
    } else {
        let d = photometric::darken_dataset_static(&a.dataset, &root, a.darken, &a.out)?;
        Ok(json!({ "images": d.images.len(), "darkening_percent": a.darken }))
    }
}

fn sweep(a: SweepArgs) -> Result<Value> {
    let mut cfg: SweepConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => SweepConfig::default(),
    };
    if let Some(levels) = a.levels {
        cfg.levels = levels;
    }
    if let Some(iou) = a.iou {
        cfg.eval.iou_thresholds = iou;
    }
    if let Some(mode) = a.mode {
        cfg.eval.mode = mode.into();
    }
    if let Some(grouping) = a.grouping {
        cfg.eval.grouping = grouping.into();
    }
    if let Detector::Mock(m) = &mut cfg.detector {
        if let Some(j) = a.jitter_px {
            m.jitter_px = j;
        }
        m.seed = experiment::effective_seed(a.seed.unwrap_or(m.seed))?;
    }
    let root = images_root(a.images_root, &a.dataset);
    let table = experiment::darkening_sweep(&a.dataset, &root, &cfg, &a.out)?;
    let failed = table.rows.iter().filter(|r| r.failed).count();
    Ok(json!({
        "levels": cfg.levels,
        "map50": table.map50_column(),
        "failed": failed,
        "curve": a.out.join(experiment::CURVE_FILE),
    }))
}

fn evaluate(a: EvaluateArgs) -> Result<Value> {
    let d = coco::read_dataset(&a.dataset)?;
    let p = coco::read_predictions(&a.predictions, &d)?;
    let report = eval::evaluate(&d, &p, &a.eval.config())?;
    if let Some(out) = &a.out {
        write(&out.join("eval.json"), to_canonical_json(&report)?)?;
        write(&out.join("eval.csv"), report.to_csv())?;
    }
    let map: serde_json::Map<String, Value> =
        report.map.iter().map(|m| (format!("{}", m.threshold), json!(m.map))).collect();
    Ok(json!({ "map50": report.map50, "map": map, "groups": report.groups.len() }))
}

fn stability(a: StabilityArgs) -> Result<Value> {
    let d = coco::read_dataset(&a.dataset)?;
    let pa = coco::read_predictions(&a.predictions[0], &d)?;
    let pb = coco::read_predictions(&a.predictions[1], &d)?;
    let report = eval::stability_compare(&pa, &pb, &d, a.iou)?;
    if let Some(out) = &a.out {
        write(&out.join("stability.json"), to_canonical_json(&report)?)?;
    }
    Ok(json!({
        "matched_fraction": report.matched_fraction,
        "mean_matched_iou": report.mean_matched_iou,
        "matched": report.matched,
    }))
}

fn grid_expand(a: GridExpandArgs) -> Result<Value> {
    let spec = experiment::read_grid_spec(&a.config)?;
    let manifest = experiment::expand_grid(&spec, &a.out)?;
    write(&a.out.join(experiment::MANIFEST_FILE), to_canonical_json(&manifest)?)?;
    let mut summary = json!({ "runs": manifest.runs.len(), "manifest": a.out.join(experiment::MANIFEST_FILE) });
    if a.execute {
        let outcomes = experiment::execute_manifest(&manifest, a.workers)?;
        write(&a.out.join("outcomes.json"), to_canonical_json(&outcomes)?)?;
        summary["nonzero_exits"] = json!(outcomes.iter().filter(|o| o.exit_code != Some(0)).count());
    }
    Ok(summary)
}

fn grid_collect(a: GridCollectArgs) -> Result<Outcome> {
    let manifest: experiment::RunManifest = read_json(&a.config)?;
    let table = experiment::collect_results(&manifest);
    write(&a.out.join(experiment::RESULTS_FILE), to_canonical_json(&table)?)?;
    write(&a.out.join("results.csv"), table.to_csv())?;
    let failed = table.rows.iter().filter(|r| r.status == experiment::RunStatus::Failed).count();
    let direction = if a.minimize { Direction::Minimize } else { Direction::Maximize };
    let best = experiment::select_best(&table, &manifest.select_metric, direction);
    let (best_run, value, code) = match &best {
        Ok(row) => (json!(row.run_id), json!(row.metrics[&manifest.select_metric]), 0),
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            (Value::Null, Value::Null, 1)
        }
    };
    let summary = json!({
        "runs": table.rows.len(),
        "failed": failed,
        "metric": manifest.select_metric,
        "best_run": best_run,
        "best_value": value,
    });
    Ok(Outcome { summary, code })
}

fn mock(a: MockDetectArgs) -> Result<Value> {
    let mut cfg: MockDetectorConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => MockDetectorConfig::default(),
    };
    if let Some(j) = a.jitter_px {
        cfg.jitter_px = j;
    }
    cfg.seed = experiment::effective_seed(a.seed.unwrap_or(cfg.seed))?;
    let d = coco::read_dataset(&a.dataset)?;
    let root = images_root(a.images_root, &a.dataset);
    let set = experiment::mock_detect(&d, &root, &cfg)?;
    let path = a.out.join("predictions.json");
    write(&path, coco::serialize_predictions(&set)?)?;
    Ok(json!({ "predictions": set.len(), "path": path, "seed": cfg.seed }))
}

fn merge(a: MergeArgs) -> Result<Value> {
    let first = coco::read_dataset(&a.dataset[0])?;
    let second = coco::read_dataset(&a.dataset[1])?;
    let merged = coco::merge_datasets(&first, &second)?;
    let path = a.out.join(ANNOTATIONS_FILE);
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    coco::write_dataset(&merged, &path)?;
    Ok(json!({
        "images": merged.images.len(),
        "annotations": merged.annotations.len(),
        "categories": merged.categories.len(),
    }))
}

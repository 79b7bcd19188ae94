//! The end-to-end experiment: build a slowdown family, generate Standard
//! and sequential (OD) datasets for it, train one surrogate per dataset,
//! and report the dataset statistics next to the learned-model metrics.
//!
//! Every stage reads and writes plain files under the output directory, so
//! stages can be re-run independently:
//!
//! ```text
//! out/
//!   family/instance_001.txt ...   gen_family
//!   standard.jsonl, od.jsonl      generate_mode_dataset
//!   model_<mode>.json             train_on_dataset
//!   history_<mode>.json
//!   metrics_<mode>.json           evaluate_mode
//!   report.json, report.csv       emit_report
//!   curve.csv
//!   timings.json                  wall-clock sidecar (not part of the report)
//! ```
//!
//! Reports are deterministic: the same config and binary produce
//! byte-identical `report.json` files. Wall-clock measurements are
//! inherently noisy, so they live in the `timings.json` sidecar instead of
//! the report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{
    generate_od, generate_standard, lipschitz_constant, read_dataset, split_dataset,
    total_variation, write_dataset, Dataset, DatasetMode, Norm,
};
use crate::instance::{parse_instance, perturb_family, serialize_instance, JssInstance, PerturbationSpec};
use crate::learner::{
    build_model, evaluate, load_model, save_model, train, Metrics, Model, Normalization,
    TrainConfig, TrainHistory,
};
use crate::solver::SolveBudget;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SCHEDLEARN_OUT";

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`")]
    BadLine(usize),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A stage failure: which pipeline step broke, and why.
#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

fn stage<T, E>(name: &'static str, result: Result<T, E>) -> Result<T, StageError>
where
    E: std::error::Error + Send + Sync + 'static,
{
    result.map_err(|e| StageError { stage: name, source: Box::new(e) })
}

/// Solver budget and training recipe for one dataset mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeConfig {
    /// Solver wall-clock limit per solve, in seconds.
    pub time_limit_s: f64,
    /// Solver node limit per solve; 0 means unlimited.
    pub node_limit: u64,
    pub solver_seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dual_learning_rate: f64,
    pub train_seed: u64,
}

impl Default for ModeConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ModeConfig {
            time_limit_s: 3600.0,
            node_limit: 0,
            solver_seed: 0,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            dual_learning_rate: t.dual_learning_rate,
            train_seed: 0,
        }
    }
}

impl ModeConfig {
    pub fn budget(&self) -> SolveBudget {
        SolveBudget {
            time_limit: Duration::from_secs_f64(self.time_limit_s),
            node_limit: if self.node_limit == 0 { None } else { Some(self.node_limit) },
            seed: self.solver_seed,
        }
    }

    pub fn train_config(&self, normalization: Normalization) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            dual_learning_rate: self.dual_learning_rate,
            seed: self.train_seed,
            normalization,
        }
    }
}

/// Full experiment description. Round-trips through a flat `key = value`
/// config file; any key can also be overridden on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Base instance file; when absent a random instance is generated.
    pub instance: Option<PathBuf>,
    pub jobs: usize,
    pub machines: usize,
    pub dur_lo: i64,
    pub dur_hi: i64,
    pub instance_seed: u64,
    pub perturbation: PerturbationSpec,
    /// Every `test_every`-th family entry is held out for evaluation;
    /// 0 disables the split (train and evaluate on the full family).
    pub test_every: usize,
    pub out: PathBuf,
    pub standard: ModeConfig,
    pub od: ModeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let out = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from);
        ExperimentConfig {
            instance: None,
            jobs: 4,
            machines: 3,
            dur_lo: 1,
            dur_hi: 9,
            instance_seed: 777,
            perturbation: PerturbationSpec { machine: 0, steps: 40, max_increase: 0.5, scale: 100 },
            test_every: 5,
            out,
            standard: ModeConfig::default(),
            od: ModeConfig::default(),
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

impl ExperimentConfig {
    /// Set a single `key = value` pair; the vocabulary matches
    /// [`Self::to_config_string`].
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let (mode, field) = match key.split_once('_') {
            Some(("standard", f)) => (Some(&mut self.standard), f),
            Some(("od", f)) => (Some(&mut self.od), f),
            _ => (None, key),
        };
        if let Some(mode) = mode {
            match field {
                "time_limit_s" => mode.time_limit_s = parse_as(key, value)?,
                "node_limit" => mode.node_limit = parse_as(key, value)?,
                "solver_seed" => mode.solver_seed = parse_as(key, value)?,
                "epochs" => mode.epochs = parse_as(key, value)?,
                "batch_size" => mode.batch_size = parse_as(key, value)?,
                "learning_rate" => mode.learning_rate = parse_as(key, value)?,
                "dual_learning_rate" => mode.dual_learning_rate = parse_as(key, value)?,
                "train_seed" => mode.train_seed = parse_as(key, value)?,
                _ => return Err(ConfigError::UnknownKey(key.into())),
            }
            return Ok(());
        }
        match key {
            "instance" => self.instance = Some(PathBuf::from(value)),
            "jobs" => self.jobs = parse_as(key, value)?,
            "machines" => self.machines = parse_as(key, value)?,
            "dur_lo" => self.dur_lo = parse_as(key, value)?,
            "dur_hi" => self.dur_hi = parse_as(key, value)?,
            "instance_seed" => self.instance_seed = parse_as(key, value)?,
            "machine" => self.perturbation.machine = parse_as(key, value)?,
            "steps" => self.perturbation.steps = parse_as(key, value)?,
            "max_increase" => self.perturbation.max_increase = parse_as(key, value)?,
            "scale" => self.perturbation.scale = parse_as(key, value)?,
            "test_every" => self.test_every = parse_as(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Parse the flat config file format: one `key = value` per line, `#`
    /// comments and blank lines ignored.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::BadLine(i + 1))?;
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse_str(&fs::read_to_string(path)?)
    }

    /// Render every key in a fixed order; `parse_str` inverts this exactly.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.instance {
            let _ = writeln!(s, "instance = {}", p.display());
        }
        let _ = writeln!(s, "jobs = {}", self.jobs);
        let _ = writeln!(s, "machines = {}", self.machines);
        let _ = writeln!(s, "dur_lo = {}", self.dur_lo);
        let _ = writeln!(s, "dur_hi = {}", self.dur_hi);
        let _ = writeln!(s, "instance_seed = {}", self.instance_seed);
        let _ = writeln!(s, "machine = {}", self.perturbation.machine);
        let _ = writeln!(s, "steps = {}", self.perturbation.steps);
        let _ = writeln!(s, "max_increase = {}", self.perturbation.max_increase);
        let _ = writeln!(s, "scale = {}", self.perturbation.scale);
        let _ = writeln!(s, "test_every = {}", self.test_every);
        let _ = writeln!(s, "out = {}", self.out.display());
        for (name, mode) in [("standard", &self.standard), ("od", &self.od)] {
            let _ = writeln!(s, "{name}_time_limit_s = {}", mode.time_limit_s);
            let _ = writeln!(s, "{name}_node_limit = {}", mode.node_limit);
            let _ = writeln!(s, "{name}_solver_seed = {}", mode.solver_seed);
            let _ = writeln!(s, "{name}_epochs = {}", mode.epochs);
            let _ = writeln!(s, "{name}_batch_size = {}", mode.batch_size);
            let _ = writeln!(s, "{name}_learning_rate = {}", mode.learning_rate);
            let _ = writeln!(s, "{name}_dual_learning_rate = {}", mode.dual_learning_rate);
            let _ = writeln!(s, "{name}_train_seed = {}", mode.train_seed);
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.jobs == 0 || self.machines == 0 {
            return bad("jobs and machines must be positive");
        }
        if self.dur_lo < 0 || self.dur_lo > self.dur_hi {
            return bad("need 0 <= dur_lo <= dur_hi");
        }
        if self.perturbation.machine >= self.machines {
            return bad("slowed machine index out of range");
        }
        if self.perturbation.steps == 0 {
            return bad("steps must be positive");
        }
        if !(self.perturbation.max_increase >= 0.0) {
            return bad("max_increase must be nonnegative");
        }
        if self.perturbation.scale <= 0 {
            return bad("scale must be positive");
        }
        if self.test_every == 1 {
            return bad("test_every must be 0 (no split) or at least 2");
        }
        for (name, mode) in [("standard", &self.standard), ("od", &self.od)] {
            if !(mode.time_limit_s > 0.0) {
                return bad(&format!("{name}_time_limit_s must be positive"));
            }
            if mode.batch_size == 0 {
                return bad(&format!("{name}_batch_size must be positive"));
            }
            if !(mode.learning_rate > 0.0) {
                return bad(&format!("{name}_learning_rate must be positive"));
            }
            if !(mode.dual_learning_rate >= 0.0) {
                return bad(&format!("{name}_dual_learning_rate must be nonnegative"));
            }
        }
        Ok(())
    }

    fn mode(&self, mode: DatasetMode) -> &ModeConfig {
        match mode {
            DatasetMode::Standard => &self.standard,
            DatasetMode::Od => &self.od,
        }
    }
}

fn mode_name(mode: DatasetMode) -> &'static str {
    match mode {
        DatasetMode::Standard => "standard",
        DatasetMode::Od => "od",
    }
}

/// One line of the report's summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: DatasetMode,
    pub total_variation: f64,
    /// Undefined (null) when consecutive instances coincide.
    pub lipschitz: Option<f64>,
    pub prediction_error: f64,
    pub constraint_violation: f64,
    pub optimality_gap: f64,
}

/// L1 distance of one solution to the first solution of its dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mode: DatasetMode,
    pub index: usize,
    pub l1_distance: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub rows: Vec<ModeRow>,
    pub curve: Vec<CurvePoint>,
}

/// Wall-clock sidecar, split out of the report to keep reports
/// byte-deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub schema_version: u32,
    pub generation_seconds: BTreeMap<String, f64>,
    pub training_seconds: BTreeMap<String, f64>,
}

/// Build (or load) the base instance and write the slowdown family to
/// `out/family/instance_NNN.txt`.
pub fn generate_family_files(cfg: &ExperimentConfig) -> Result<Vec<JssInstance>, StageError> {
    let base = match &cfg.instance {
        Some(path) => {
            let text = stage("gen-family: read base instance", fs::read_to_string(path))?;
            stage("gen-family: parse base instance", parse_instance(&text))?
        }
        None => JssInstance::random(cfg.jobs, cfg.machines, cfg.dur_lo, cfg.dur_hi, cfg.instance_seed),
    };
    let family = stage("gen-family", perturb_family(&base, &cfg.perturbation))?;
    let dir = cfg.out.join("family");
    stage("gen-family: create output directory", fs::create_dir_all(&dir))?;
    for (i, inst) in family.iter().enumerate() {
        let path = dir.join(format!("instance_{:03}.txt", i + 1));
        stage("gen-family: write instance", fs::write(path, serialize_instance(inst)))?;
    }
    Ok(family)
}

/// Read a family back from `dir`, in file-name order.
pub fn read_family_dir(dir: &Path) -> Result<Vec<JssInstance>, StageError> {
    let entries = stage("load-family: read directory", fs::read_dir(dir))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = stage("load-family: read directory", entry)?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(StageError {
            stage: "load-family",
            source: format!("no instance files in {}", dir.display()).into(),
        });
    }
    let mut family = Vec::with_capacity(paths.len());
    for path in paths {
        let text = stage("load-family: read instance", fs::read_to_string(&path))?;
        family.push(stage("load-family: parse instance", parse_instance(&text))?);
    }
    Ok(family)
}

/// Solve the family in the given mode and write `out/<mode>.jsonl`.
/// Returns the dataset and the generation wall-time in seconds.
pub fn generate_mode_dataset(
    cfg: &ExperimentConfig,
    mode: DatasetMode,
    family: &[JssInstance],
) -> Result<(Dataset, f64), StageError> {
    let budget = cfg.mode(mode).budget();
    let t0 = Instant::now();
    let ds = match mode {
        DatasetMode::Standard => stage("gen-data(standard)", generate_standard(family, &budget))?,
        DatasetMode::Od => stage("gen-data(od)", generate_od(family, &budget))?,
    };
    let secs = t0.elapsed().as_secs_f64();
    stage("gen-data: create output directory", fs::create_dir_all(&cfg.out))?;
    let path = cfg.out.join(format!("{}.jsonl", mode_name(mode)));
    stage("gen-data: write dataset", write_dataset(&ds, &path))?;
    Ok((ds, secs))
}

/// The train/eval split used by training and evaluation: every
/// `test_every`-th entry held out, or the full dataset on both sides when
/// the split is disabled or the family is too short.
pub fn split_for_training(cfg: &ExperimentConfig, ds: &Dataset) -> (Dataset, Dataset) {
    if cfg.test_every >= 2 && ds.len() >= cfg.test_every {
        split_dataset(ds, cfg.test_every).expect("split bounds checked")
    } else {
        (ds.clone(), ds.clone())
    }
}

/// Train a fresh model on the dataset's training split and write the
/// checkpoint and history files. Returns the model, the normalization it
/// was trained under, its history, and the training wall-time in seconds.
pub fn train_on_dataset(
    cfg: &ExperimentConfig,
    mode: DatasetMode,
    ds: &Dataset,
) -> Result<(Model, Normalization, TrainHistory, f64), StageError> {
    let (train_ds, _) = split_for_training(cfg, ds);
    let norm = Normalization::fit(&train_ds);
    let first = &train_ds.entries()[0].instance;
    let mut model = build_model((first.jobs(), first.tasks_per_job()), cfg.mode(mode).train_seed);
    let train_cfg = cfg.mode(mode).train_config(norm.clone());
    let t0 = Instant::now();
    let history = stage("train", train(&mut model, &train_ds, &train_cfg))?;
    let secs = t0.elapsed().as_secs_f64();
    stage("train: create output directory", fs::create_dir_all(&cfg.out))?;
    let name = mode_name(mode);
    stage("train: write checkpoint", save_model(&model, &cfg.out.join(format!("model_{name}.json"))))?;
    let history_json =
        stage("train: encode history", serde_json::to_string_pretty(&history))?;
    stage(
        "train: write history",
        fs::write(cfg.out.join(format!("history_{name}.json")), history_json + "\n"),
    )?;
    Ok((model, norm, history, secs))
}

/// Evaluate a trained model on the dataset's held-out split and write
/// `out/metrics_<mode>.json`.
pub fn evaluate_mode(
    cfg: &ExperimentConfig,
    mode: DatasetMode,
    model: &Model,
    ds: &Dataset,
) -> Result<Metrics, StageError> {
    let (train_ds, eval_ds) = split_for_training(cfg, ds);
    let norm = Normalization::fit(&train_ds);
    let metrics = stage("evaluate", evaluate(model, &eval_ds, &norm))?;
    let json = stage("evaluate: encode metrics", serde_json::to_string_pretty(&metrics))?;
    stage("evaluate: create output directory", fs::create_dir_all(&cfg.out))?;
    stage(
        "evaluate: write metrics",
        fs::write(cfg.out.join(format!("metrics_{}.json", mode_name(mode))), json + "\n"),
    )?;
    Ok(metrics)
}

/// Load a previously written checkpoint for the mode.
pub fn load_mode_model(cfg: &ExperimentConfig, mode: DatasetMode) -> Result<Model, StageError> {
    let path = cfg.out.join(format!("model_{}.json", mode_name(mode)));
    stage("load-model", load_model(&path))
}

/// Load a previously written dataset for the mode.
pub fn load_mode_dataset(cfg: &ExperimentConfig, mode: DatasetMode) -> Result<Dataset, StageError> {
    let path = cfg.out.join(format!("{}.jsonl", mode_name(mode)));
    stage("load-dataset", read_dataset(&path))
}

fn mode_row(mode: DatasetMode, ds: &Dataset, metrics: Metrics) -> ModeRow {
    ModeRow {
        mode,
        total_variation: total_variation(ds, Norm::L1),
        lipschitz: lipschitz_constant(ds).ok(),
        prediction_error: metrics.prediction_error,
        constraint_violation: metrics.constraint_violation,
        optimality_gap: metrics.optimality_gap,
    }
}

fn curve_points(mode: DatasetMode, ds: &Dataset) -> Vec<CurvePoint> {
    let schedules = ds.schedules();
    let reference = &schedules[0];
    ds.entries()
        .iter()
        .zip(&schedules)
        .map(|(e, s)| CurvePoint { mode, index: e.index, l1_distance: reference.l1_distance(s) })
        .collect()
}

/// Run the whole pipeline for both modes and write every artifact,
/// including the report and the timing sidecar. Deterministic given the
/// config: `report.json` is byte-identical across runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, StageError> {
    stage("config", cfg.validate())?;
    let family = generate_family_files(cfg)?;

    let mut rows = Vec::new();
    let mut curve = Vec::new();
    let mut timings = Timings {
        schema_version: REPORT_SCHEMA_VERSION,
        generation_seconds: BTreeMap::new(),
        training_seconds: BTreeMap::new(),
    };
    for mode in [DatasetMode::Standard, DatasetMode::Od] {
        let (ds, gen_secs) = generate_mode_dataset(cfg, mode, &family)?;
        let (model, _, _, train_secs) = train_on_dataset(cfg, mode, &ds)?;
        let metrics = evaluate_mode(cfg, mode, &model, &ds)?;
        timings.generation_seconds.insert(mode_name(mode).into(), gen_secs);
        timings.training_seconds.insert(mode_name(mode).into(), train_secs);
        rows.push(mode_row(mode, &ds, metrics));
        curve.extend(curve_points(mode, &ds));
    }

    let report = Report { schema_version: REPORT_SCHEMA_VERSION, rows, curve };
    stage("report", emit_report(&report, &cfg.out))?;
    let timings_json = stage("report: encode timings", serde_json::to_string_pretty(&timings))?;
    stage("report: write timings", fs::write(cfg.out.join("timings.json"), timings_json + "\n"))?;
    Ok(report)
}

/// Write `report.json`, `report.csv` (one row per mode), and `curve.csv`
/// (one row per dataset entry). CSV columns are fixed:
///
/// ```text
/// report.csv: mode,total_variation,lipschitz,prediction_error,constraint_violation,optimality_gap
/// curve.csv:  mode,index,l1_distance
/// ```
pub fn emit_report(report: &Report, dir: &Path) -> Result<(), std::io::Error> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(dir.join("report.json"), json + "\n")?;

    let mut csv =
        String::from("mode,total_variation,lipschitz,prediction_error,constraint_violation,optimality_gap\n");
    for row in &report.rows {
        let lipschitz = row.lipschitz.map_or(String::new(), |c| c.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            mode_name(row.mode),
            row.total_variation,
            lipschitz,
            row.prediction_error,
            row.constraint_violation,
            row.optimality_gap
        );
    }
    fs::write(dir.join("report.csv"), csv)?;

    let mut curve = String::from("mode,index,l1_distance\n");
    for p in &report.curve {
        let _ = writeln!(curve, "{},{},{}", mode_name(p.mode), p.index, p.l1_distance);
    }
    fs::write(dir.join("curve.csv"), curve)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(out: PathBuf) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            jobs: 2,
            machines: 2,
            dur_lo: 1,
            dur_hi: 5,
            instance_seed: 3,
            out,
            test_every: 0,
            ..ExperimentConfig::default()
        };
        cfg.perturbation = PerturbationSpec { machine: 0, steps: 6, max_increase: 0.5, scale: 10 };
        for mode in [&mut cfg.standard, &mut cfg.od] {
            mode.epochs = 10;
        }
        cfg
    }

    #[test]
    fn config_round_trips_through_the_file_format() {
        let mut cfg = ExperimentConfig::default();
        cfg.instance = Some(PathBuf::from("base.txt"));
        cfg.standard.learning_rate = 2e-3;
        cfg.od.node_limit = 5000;
        cfg.test_every = 4;
        let text = cfg.to_config_string();
        assert_eq!(ExperimentConfig::parse_str(&text).unwrap(), cfg);
    }

    #[test]
    fn overrides_win_and_bad_keys_are_rejected() {
        let mut cfg = ExperimentConfig::parse_str("steps = 12\nod_epochs = 7\n").unwrap();
        assert_eq!(cfg.perturbation.steps, 12);
        assert_eq!(cfg.od.epochs, 7);
        cfg.apply("steps", "15").unwrap();
        assert_eq!(cfg.perturbation.steps, 15);
        assert!(matches!(cfg.apply("step", "1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(cfg.apply("steps", "x"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(
            ExperimentConfig::parse_str("steps 12\n"),
            Err(ConfigError::BadLine(1))
        ));
        assert!(ExperimentConfig::parse_str("test_every = 1\n").is_err());
    }

    #[test]
    fn the_pipeline_writes_every_artifact_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path().join("run"));
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.curve.len(), 12);
        let std_row = &report.rows[0];
        let od_row = &report.rows[1];
        assert_eq!(std_row.mode, DatasetMode::Standard);
        assert_eq!(od_row.mode, DatasetMode::Od);
        assert!(od_row.total_variation <= std_row.total_variation);

        for name in [
            "family/instance_001.txt",
            "family/instance_006.txt",
            "standard.jsonl",
            "od.jsonl",
            "model_standard.json",
            "model_od.json",
            "history_standard.json",
            "history_od.json",
            "metrics_standard.json",
            "metrics_od.json",
            "report.json",
            "report.csv",
            "curve.csv",
            "timings.json",
        ] {
            assert!(cfg.out.join(name).exists(), "missing {name}");
        }

        let first = fs::read(cfg.out.join("report.json")).unwrap();
        let cfg2 = tiny_cfg(dir.path().join("run2"));
        run_experiment(&cfg2).unwrap();
        assert_eq!(first, fs::read(cfg2.out.join("report.json")).unwrap());

        // report.json round-trips to an equal Report
        let parsed: Report = serde_json::from_slice(&first).unwrap();
        assert_eq!(parsed, report);

        // datasets on disk re-load and revalidate
        let ds = load_mode_dataset(&cfg, DatasetMode::Standard).unwrap();
        assert_eq!(ds.len(), 6);
        let model = load_mode_model(&cfg, DatasetMode::Od).unwrap();
        let metrics = evaluate_mode(&cfg, DatasetMode::Od, &model, &ds).unwrap();
        assert!(metrics.prediction_error.is_finite());
    }

    #[test]
    fn a_flat_family_produces_zero_deltas() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("base.txt");
        fs::write(&base, "2 2\n0 2 1 2\n1 1 0 3\n").unwrap();
        let mut cfg = tiny_cfg(dir.path().join("run"));
        cfg.instance = Some(base);
        cfg.perturbation = PerturbationSpec { machine: 0, steps: 2, max_increase: 0.0, scale: 1 };
        let report = run_experiment(&cfg).unwrap();
        for row in &report.rows {
            assert_eq!(row.total_variation, 0.0);
            assert_eq!(row.lipschitz, None);
        }
        assert!(report.curve.iter().all(|p| p.l1_distance == 0));
    }

    #[test]
    fn a_missing_base_instance_names_the_failing_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path().join("run"));
        cfg.instance = Some(dir.path().join("nope.txt"));
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.stage.starts_with("gen-family"), "stage was {}", err.stage);
    }

    #[test]
    fn reports_serialize_with_fixed_csv_columns() {
        let dir = tempfile::tempdir().unwrap();
        let report = Report {
            schema_version: REPORT_SCHEMA_VERSION,
            rows: vec![ModeRow {
                mode: DatasetMode::Od,
                total_variation: 1.5,
                lipschitz: None,
                prediction_error: 2.0,
                constraint_violation: 0.0,
                optimality_gap: 0.25,
            }],
            curve: vec![],
        };
        emit_report(&report, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(
            csv,
            "mode,total_variation,lipschitz,prediction_error,constraint_violation,optimality_gap\nod,1.5,,2,0,0.25\n"
        );
        let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
        assert_eq!(curve, "mode,index,l1_distance\n");
        let parsed: Report =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(parsed, report);
    }
}

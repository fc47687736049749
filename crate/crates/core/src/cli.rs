//! Subcommand implementations behind the `affordance` binary. Each returns
//! the paths it wrote so callers can print or inspect them.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunSpec;
use crate::dataset::{
    load_manifest, split_by_repetition, validate_manifest, ImageSlot, Manifest, Part, SplitRatios,
    SplitSet, TensorSet, ValidationReport,
};
use crate::error::{Error, Result};
use crate::eval::{self, render_report, EvalReport};
use crate::model::{Checkpoint, Model};
use crate::synth::generate_dataset;
use crate::train::{self, grid_search, GridOptions, PreparedData, RunResult, Task, TrainConfig};

pub const CHECKPOINT_FILE: &str = "checkpoint.safetensors";
pub const HISTORY_FILE: &str = "history.csv";
pub const EVAL_FILE: &str = "eval.json";
pub const TRIALS_FILE: &str = "trials.csv";
pub const BEST_CONFIG_FILE: &str = "best_config.toml";
pub const RESULTS_DIR: &str = "results";
pub const REPORT_DIR: &str = "report";

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

#[derive(Debug)]
pub struct Generated {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

pub fn cmd_generate(spec: &RunSpec) -> Result<Generated> {
    let root = &spec.data.root;
    let g = &spec.generate;
    let manifest = generate_dataset(&g.scene, g.counts(), g.seed, root)?;
    Ok(Generated {
        manifest_path: root.join(crate::synth::MANIFEST_FILE),
        manifest,
    })
}

pub fn cmd_validate(spec: &RunSpec) -> Result<ValidationReport> {
    let m = load_manifest(spec.data.manifest_path())?;
    Ok(validate_manifest(&m))
}

/// Manifest plus its repetition-wise split.
#[derive(Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    pub split: SplitSet,
}

impl Dataset {
    pub fn open(spec: &RunSpec) -> Result<Dataset> {
        let manifest = load_manifest(spec.data.manifest_path())?;
        let report = validate_manifest(&manifest);
        if !report.is_clean() {
            log::warn!("manifest has {} issue(s); see `validate`", report.issues.len());
        }
        let split = split_by_repetition(&manifest, SplitRatios::default(), spec.data.split_seed)?;
        Ok(Dataset { manifest, split })
    }

    /// Loads the `slots` views of one part, optionally only its first
    /// `limit` samples.
    pub fn load_part(&self, part: Part, slots: &[ImageSlot], limit: Option<usize>) -> Result<TensorSet> {
        let mut samples: Vec<_> = self.split.samples(&self.manifest, part).collect();
        if let Some(n) = limit {
            samples.truncate(n);
        }
        TensorSet::load(&self.manifest, &samples, slots)
    }

    pub fn prepare(&self, slots: &[ImageSlot], with_test: bool) -> Result<PreparedData> {
        Ok(PreparedData {
            train: self.load_part(Part::Train, slots, None)?,
            val: self.load_part(Part::Val, slots, None)?,
            test: with_test
                .then(|| self.load_part(Part::Test, slots, None))
                .transpose()?,
        })
    }
}

/// Views needed by any of `variants`, in canonical order.
fn union_slots(variants: impl IntoIterator<Item = crate::model::FusionVariant>) -> Vec<ImageSlot> {
    let set: BTreeSet<usize> = variants
        .into_iter()
        .flat_map(|v| v.slots().iter().map(|s| s.index()))
        .collect();
    set.into_iter().map(|i| ImageSlot::ALL[i]).collect()
}

#[derive(Debug)]
pub enum TrainOutput {
    DryRun { loss: f64, parameters: i64 },
    Trained { run_dir: PathBuf, report: EvalReport, best_epoch: usize },
}

fn resume_checkpoint(spec: &RunSpec, cfg: &TrainConfig) -> Result<Option<Checkpoint>> {
    let Some(path) = &spec.train.resume else { return Ok(None) };
    let ck = Checkpoint::load(path)?;
    if ck.config != cfg.model {
        return Err(Error::Config(format!(
            "checkpoint {} was written for {} / {} / {} head, config resolves to {} / {} / {} head",
            path.display(),
            ck.config.variant,
            ck.config.depth,
            ck.config.head.name(),
            cfg.model.variant,
            cfg.model.depth,
            cfg.model.head.name(),
        )));
    }
    Ok(Some(ck))
}

/// Trains with the first seed. In dry-run mode builds the model, runs one
/// optimisation step on the first training batch and writes nothing.
pub fn cmd_train(spec: &RunSpec) -> Result<TrainOutput> {
    let cfg = spec.train_config(spec.task, spec.seeds[0]);
    cfg.validate()?;
    let init = resume_checkpoint(spec, &cfg)?;
    let ds = Dataset::open(spec)?;
    let slots = cfg.model.variant.slots();

    if spec.train.dry_run {
        let set = ds.load_part(Part::Train, slots, Some(cfg.batch_size))?;
        let mut model = Model::new(cfg.model, cfg.seed)?;
        if let Some(ck) = &init {
            model.load_weights(ck)?;
        }
        let idx: Vec<usize> = (0..set.len()).collect();
        let batch = set.batch(&idx, cfg.model.variant, cfg.model.head)?;
        let mut opt = {
            use tch::nn::OptimizerConfig;
            tch::nn::Adam::default().build(model.var_store(), cfg.learning_rate)?
        };
        let loss = train::loss(&model.forward(&batch, true)?, &batch.labels, cfg.model.head)?;
        opt.backward_step(&loss);
        let loss = loss.double_value(&[]);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: 1, batch: 1 });
        }
        return Ok(TrainOutput::DryRun {
            loss,
            parameters: model.parameter_count(),
        });
    }

    let data = ds.prepare(slots, true)?;
    let run_dir = spec.prepare_run_dir("train")?;
    let outcome = train::train_from(&cfg, &data, init.as_ref())?;
    outcome.checkpoint.save(&run_dir.join(CHECKPOINT_FILE))?;
    write(&run_dir.join(HISTORY_FILE), &outcome.history.to_csv())?;
    let report = eval::evaluate(&outcome.model, data.test.as_ref().expect("test part loaded"))?;
    write_json(&run_dir.join(EVAL_FILE), &report)?;
    Ok(TrainOutput::Trained {
        run_dir,
        report,
        best_epoch: outcome.history.best_epoch,
    })
}

#[derive(Debug)]
pub struct GridOutput {
    pub run_dir: PathBuf,
    pub trials: usize,
    pub best: TrainConfig,
}

/// Grid search with the first seed; the trial table in the run directory
/// doubles as the resume log.
pub fn cmd_gridsearch(spec: &RunSpec) -> Result<GridOutput> {
    let grid = spec.grid.spec()?;
    let base = spec.train_config(spec.grid.task, spec.seeds[0]);
    base.validate()?;
    let ds = Dataset::open(spec)?;
    let data = ds.prepare(base.model.variant.slots(), true)?;
    let run_dir = spec.prepare_run_dir("gridsearch")?;
    let outcome = grid_search(
        &grid,
        &base,
        &data,
        &GridOptions {
            jobs: spec.jobs,
            trial_csv: Some(run_dir.join(TRIALS_FILE)),
        },
    )?;
    let mut best_spec = spec.clone();
    best_spec.task = spec.grid.task;
    best_spec.train.learning_rate = outcome.best.learning_rate;
    best_spec.train.batch_size = outcome.best.batch_size;
    best_spec.model.first_kernel = outcome.best.model.first_kernel;
    best_spec.model.first_stride = outcome.best.model.first_stride;
    write(&run_dir.join(BEST_CONFIG_FILE), &best_spec.to_toml())?;
    Ok(GridOutput {
        run_dir,
        trials: outcome.trials.len(),
        best: outcome.best,
    })
}

/// Every (task, variant, depth) combination the benchmark section selects.
pub fn benchmark_runs(spec: &RunSpec) -> Vec<TrainConfig> {
    let b = &spec.benchmark;
    let tasks = if b.tasks.is_empty() { vec![spec.task] } else { b.tasks.clone() };
    let variants = if b.variants.is_empty() { vec![spec.model.variant] } else { b.variants.clone() };
    let depths = if b.depths.is_empty() { vec![spec.model.depth] } else { b.depths.clone() };
    let mut out = Vec::new();
    for &task in &tasks {
        for &variant in &variants {
            for &depth in &depths {
                let mut s = spec.clone();
                s.model.variant = variant;
                s.model.depth = depth;
                out.push(s.train_config(task, spec.seeds[0]));
            }
        }
    }
    out
}

fn task_of(cfg: &TrainConfig) -> Option<Task> {
    Task::ALL.into_iter().find(|t| t.head_mode() == cfg.model.head)
}

fn result_stem(r: &RunResult) -> String {
    let m = r.config.model;
    let task = r.task.map_or("-", Task::name);
    format!("{task}_{}_r{}", m.variant.name(), m.depth.layers())
}

#[derive(Debug)]
pub struct BenchmarkOutput {
    pub run_dir: PathBuf,
    pub results: Vec<RunResult>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_benchmark(spec: &RunSpec) -> Result<BenchmarkOutput> {
    let runs = benchmark_runs(spec);
    for c in &runs {
        c.validate()?;
    }
    let ds = Dataset::open(spec)?;
    let data = ds.prepare(&union_slots(runs.iter().map(|c| c.model.variant)), true)?;
    let run_dir = spec.prepare_run_dir("benchmark")?;
    let results_dir = run_dir.join(RESULTS_DIR);
    std::fs::create_dir_all(&results_dir).map_err(|e| Error::io(&results_dir, e))?;

    let mut results = Vec::with_capacity(runs.len());
    let mut files = Vec::new();
    for cfg in &runs {
        let mut r = train::multi_seed(cfg, &data, &spec.seeds, spec.jobs)?;
        r.task = task_of(cfg);
        r.set_interval_z(spec.ci_z)?;
        let path = results_dir.join(format!("{}.json", result_stem(&r)));
        write_json(&path, &r)?;
        log::info!("{}: {:.4}", result_stem(&r), r.mean);
        files.push(path);
        results.push(r);
    }
    files.extend(render_report(&results, &run_dir.join(REPORT_DIR))?);
    Ok(BenchmarkOutput { run_dir, results, files })
}

/// Reads a result file, or every `*.json` in `dir/results` (or `dir`).
pub fn read_results(input: &Path) -> Result<Vec<RunResult>> {
    let files: Vec<PathBuf> = if input.is_dir() {
        let dir = if input.join(RESULTS_DIR).is_dir() { input.join(RESULTS_DIR) } else { input.to_path_buf() };
        let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![input.to_path_buf()]
    };
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportOutput {
    pub run_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn cmd_report(spec: &RunSpec) -> Result<ReportOutput> {
    if spec.report.inputs.is_empty() {
        return Err(Error::Config("report.inputs lists no result files".into()));
    }
    let mut results = Vec::new();
    for input in &spec.report.inputs {
        results.extend(read_results(input)?);
    }
    for r in &mut results {
        r.set_interval_z(spec.ci_z)?;
    }
    let run_dir = spec.prepare_run_dir("report")?;
    let files = render_report(&results, &run_dir)?;
    Ok(ReportOutput { run_dir, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FusionVariant;

    #[test]
    fn slot_union_is_canonical() {
        let s = union_slots([FusionVariant::SharedCentral1C1N]);
        assert_eq!(s.len(), 2);
        let all = union_slots([FusionVariant::SharedCentral1C1N, FusionVariant::Shared3C3N]);
        assert_eq!(all, ImageSlot::ALL.to_vec());
    }

    #[test]
    fn benchmark_grid_of_runs() {
        let mut spec = RunSpec::default();
        spec.benchmark.variants = FusionVariant::ALL.to_vec();
        spec.task = Task::Joint16;
        assert_eq!(benchmark_runs(&spec).len(), 5);
        spec.benchmark.variants.clear();
        spec.benchmark.depths = crate::model::Depth::ALL.to_vec();
        spec.benchmark.tasks = vec![Task::Tools, Task::ToolsNoActions, Task::ToolsPlusActions];
        let runs = benchmark_runs(&spec);
        assert_eq!(runs.len(), 9);
        assert!(runs.iter().all(|c| task_of(c).is_some()));
    }

    #[test]
    fn report_needs_inputs() {
        assert!(cmd_report(&RunSpec::default()).unwrap_err().is_user_error());
    }
}

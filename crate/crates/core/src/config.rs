//! Run configuration: one TOML document, dotted-path overrides and the
//! content-addressed run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::eval::Z_95;
use crate::model::{Depth, FusionVariant, ModelConfig};
use crate::synth::{Counts, SceneSpec};
use crate::train::{GridSpec, Task, TrainConfig, DEFAULT_EPOCHS};

/// Environment variable holding the default dataset directory.
pub const DATA_ROOT_ENV: &str = "AFFORDANCE_DATA_ROOT";
pub const DEFAULT_DATA_ROOT: &str = "data";
pub const SNAPSHOT_FILE: &str = "config.toml";

fn default_data_root() -> PathBuf {
    std::env::var_os(DATA_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map_or_else(|| PathBuf::from(DEFAULT_DATA_ROOT), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    /// Dataset directory; `generate` writes here and the other commands read
    /// `manifest.json` from it.
    pub root: PathBuf,
    /// Explicit manifest path, overriding `root/manifest.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub split_seed: u64,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            root: default_data_root(),
            manifest: None,
            split_seed: 0,
        }
    }
}

impl DataSpec {
    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.root.join(crate::synth::MANIFEST_FILE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSpec {
    pub seed: u64,
    pub objects: u32,
    pub repetitions: u32,
    pub scene: SceneSpec,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        let c = Counts::default();
        GenerateSpec {
            seed: 0,
            objects: c.objects,
            repetitions: c.repetitions,
            scene: SceneSpec::default(),
        }
    }
}

impl GenerateSpec {
    pub fn counts(&self) -> Counts {
        Counts {
            objects: self.objects,
            repetitions: self.repetitions,
        }
    }
}

/// Model fields except the head layout, which follows from the task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub depth: Depth,
    pub variant: FusionVariant,
    pub first_kernel: u32,
    pub first_stride: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_hidden: Option<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            depth: Depth::R18,
            variant: FusionVariant::SharedCentral1C1N,
            first_kernel: 7,
            first_stride: 2,
            head_hidden: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_at_val_accuracy: Option<f64>,
    /// Checkpoint to start from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resume: Option<PathBuf>,
    /// Build the model and run a single batch instead of training.
    pub dry_run: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: DEFAULT_EPOCHS,
            learning_rate: 1e-3,
            batch_size: 32,
            stop_at_val_accuracy: None,
            resume: None,
            dry_run: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub task: Task,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub first_kernels: Vec<u32>,
    pub first_strides: Vec<u32>,
    /// Axis restriction such as `lr=1e-3,batch=32|64`.
    pub subset: String,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        GridSection {
            task: Task::Joint16,
            learning_rates: g.learning_rates,
            batch_sizes: g.batch_sizes,
            first_kernels: g.first_kernels,
            first_strides: g.first_strides,
            subset: String::new(),
        }
    }
}

impl GridSection {
    pub fn spec(&self) -> Result<GridSpec> {
        let mut g = GridSpec {
            learning_rates: self.learning_rates.clone(),
            batch_sizes: self.batch_sizes.clone(),
            first_kernels: self.first_kernels.clone(),
            first_strides: self.first_strides.clone(),
        };
        g.restrict(&self.subset)?;
        if g.is_empty() {
            return Err(Error::Config("grid has no points".into()));
        }
        Ok(g)
    }
}

/// Combinations for `benchmark`; an empty list means the single value from
/// the top-level task or model section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub tasks: Vec<Task>,
    pub variants: Vec<FusionVariant>,
    pub depths: Vec<Depth>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSpec {
    /// Result files, or directories whose `results/` holds them.
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub task: Task,
    pub seeds: Vec<u64>,
    /// Concurrent trainings for grid and seed fan-out; 0 uses every core.
    pub jobs: usize,
    /// Parent of the run directories.
    pub out_dir: PathBuf,
    /// Normal multiplier of the reported confidence intervals.
    pub ci_z: f64,
    pub data: DataSpec,
    pub generate: GenerateSpec,
    pub model: ModelSpec,
    pub train: TrainSpec,
    pub grid: GridSection,
    pub benchmark: BenchmarkSpec,
    pub report: ReportSpec,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            task: Task::ToolsPlusActions,
            seeds: vec![0, 1, 2, 3, 4],
            jobs: 1,
            out_dir: PathBuf::from("runs"),
            ci_z: Z_95,
            data: DataSpec::default(),
            generate: GenerateSpec::default(),
            model: ModelSpec::default(),
            train: TrainSpec::default(),
            grid: GridSection::default(),
            benchmark: BenchmarkSpec::default(),
            report: ReportSpec::default(),
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `path` (dot-separated) in `table` to `value`, creating tables on
/// the way.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path '{path}'")));
    }
    let (last, parents) = keys.split_last().expect("non-empty split");
    let mut cur = table;
    for (i, k) in parents.iter().enumerate() {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(Error::Config(format!(
                    "override '{path}': '{}' is not a table",
                    keys[..=i].join(".")
                )))
            }
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Applies one `path=value` override.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not path=value")))?;
    set_path(table, path, parse_value(raw.trim()))
}

impl RunSpec {
    /// Reads a config file (or the defaults when `path` is `None`) and
    /// applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunSpec> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        RunSpec::from_table(table)
    }

    pub fn from_table(table: Table) -> Result<RunSpec> {
        let spec: RunSpec = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if !(self.ci_z > 0.0 && self.ci_z.is_finite()) {
            return Err(Error::Config(format!("ci_z must be positive, got {}", self.ci_z)));
        }
        self.train_config(self.task, self.seeds[0]).validate()
    }

    pub fn model_config(&self, task: Task) -> ModelConfig {
        let m = self.model;
        ModelConfig {
            depth: m.depth,
            variant: m.variant,
            head: task.head_mode(),
            first_kernel: m.first_kernel,
            first_stride: m.first_stride,
            head_hidden: m.head_hidden,
        }
    }

    pub fn train_config(&self, task: Task, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            seed,
            model: self.model_config(task),
            stop_at_val_accuracy: self.train.stop_at_val_accuracy,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec serializes")
    }

    /// Hex digest identifying the results of `command` under this config.
    /// Settings that cannot change results (`jobs`, `train.dry_run`) are
    /// left out.
    pub fn digest(&self, command: &str) -> String {
        let mut canon = self.clone();
        canon.jobs = 1;
        canon.train.dry_run = false;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0u8]);
        h.update(canon.to_toml().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn run_dir(&self, command: &str) -> PathBuf {
        self.out_dir
            .join(format!("{command}-{}", &self.digest(command)[..16]))
    }

    /// Creates the run directory of `command` and writes the resolved config
    /// snapshot into it.
    pub fn prepare_run_dir(&self, command: &str) -> Result<PathBuf> {
        let dir = self.run_dir(command);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let snap = dir.join(SNAPSHOT_FILE);
        std::fs::write(&snap, self.to_toml()).map_err(|e| Error::io(&snap, e))?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HeadMode;

    fn load(text: &str, overrides: &[&str]) -> Result<RunSpec> {
        let mut t: Table = text.parse().unwrap();
        for o in overrides {
            apply_override(&mut t, o)?;
        }
        RunSpec::from_table(t)
    }

    #[test]
    fn defaults_round_trip() {
        let s = RunSpec::default();
        let back = load(&s.to_toml(), &[]).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.generate.counts().samples(), 1280);
    }

    #[test]
    fn task_selects_head() {
        let s = load("task = \"tools\"", &[]).unwrap();
        assert_eq!(s.model_config(s.task).head, HeadMode::ToolWithAction);
        let s = load("", &["task=actions_only"]).unwrap();
        assert_eq!(s.model_config(s.task).head, HeadMode::Action);
    }

    #[test]
    fn dotted_overrides() {
        let s = load(
            "[train]\nepochs = 3\n",
            &["train.learning_rate=5e-4", "model.variant=3C-3N", "model.depth=50", "seeds=[7]", "generate.objects=20"],
        )
        .unwrap();
        assert_eq!(s.train.epochs, 3);
        assert_eq!(s.train.learning_rate, 5e-4);
        assert_eq!(s.model.variant, FusionVariant::Shared3C3N);
        assert_eq!(s.model.depth, Depth::R50);
        assert_eq!(s.seeds, vec![7]);
        assert_eq!(s.generate.counts().samples(), 3200);
    }

    #[test]
    fn string_fallback_and_path_errors() {
        let s = load("", &["grid.subset=lr=1e-3"]).unwrap();
        assert_eq!(s.grid.spec().unwrap().len(), 24);
        assert!(load("", &["train.epochs.x=1"]).is_err());
        assert!(load("", &["novalue"]).is_err());
        assert!(load("", &["train..epochs=1"]).is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        for o in ["train.epochs=0", "model.depth=34", "task=nope", "unknown=1", "seeds=[]", "model.first_kernel=4"] {
            let e = load("", &[o]).unwrap_err();
            assert!(e.is_user_error(), "{o}: {e}");
        }
    }

    #[test]
    fn run_dir_follows_content() {
        let a = RunSpec::default();
        let mut b = a.clone();
        b.jobs = 8;
        assert_eq!(a.run_dir("train"), b.run_dir("train"));
        b.train.epochs = 2;
        assert_ne!(a.run_dir("train"), b.run_dir("train"));
        assert_ne!(a.run_dir("train"), a.run_dir("benchmark"));
    }

    #[test]
    fn snapshot_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let s = RunSpec {
            out_dir: dir.path().to_path_buf(),
            ..RunSpec::default()
        };
        let run = s.prepare_run_dir("train").unwrap();
        let text = std::fs::read_to_string(run.join(SNAPSHOT_FILE)).unwrap();
        assert_eq!(load(&text, &[]).unwrap(), s);
    }
}

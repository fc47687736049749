//! Training with best-validation checkpointing, grid search and multi-seed
//! aggregation.

mod grid;

pub use grid::{grid_search, select_best, GridOptions, GridOutcome, GridPoint, GridSpec, Trial};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tch::nn::{self, OptimizerConfig};
use tch::{Kind, Reduction, Tensor};

use crate::dataset::{Labels, TensorSet};
use crate::error::{Error, Result};
use crate::eval::{self, confidence_interval, EvalReport, Predictions};
use crate::model::{Checkpoint, HeadKind, HeadMode, Logits, Model, ModelConfig};
use crate::seed::mix;

/// Recognition task; each maps to one head layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Tool, with the action given as input.
    Tools,
    ToolsNoActions,
    /// Tool and action from two heads.
    ToolsPlusActions,
    ActionsOnly,
    /// One 16-way (tool, action) head.
    Joint16,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Tools,
        Task::ToolsNoActions,
        Task::ToolsPlusActions,
        Task::ActionsOnly,
        Task::Joint16,
    ];

    pub fn head_mode(self) -> HeadMode {
        match self {
            Task::Tools => HeadMode::ToolWithAction,
            Task::ToolsNoActions => HeadMode::Tool,
            Task::ToolsPlusActions => HeadMode::Dual,
            Task::ActionsOnly => HeadMode::Action,
            Task::Joint16 => HeadMode::Joint16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Tools => "tools",
            Task::ToolsNoActions => "tools_no_actions",
            Task::ToolsPlusActions => "tools_plus_actions",
            Task::ActionsOnly => "actions_only",
            Task::Joint16 => "joint16",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse {
                kind: "task",
                value: s.to_string(),
            })
    }
}

pub const DEFAULT_EPOCHS: usize = 150;

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_lr() -> f64 {
    1e-3
}

fn default_batch() -> usize {
    32
}

/// Hyper-parameters of one run. The optimiser is Adam with its standard
/// moment coefficients and no weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    /// Ends training once the validation metric of an epoch reaches this
    /// value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_at_val_accuracy: Option<f64>,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> TrainConfig {
        TrainConfig {
            epochs: DEFAULT_EPOCHS,
            learning_rate: default_lr(),
            batch_size: default_batch(),
            seed: 0,
            model,
            stop_at_val_accuracy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::TrainConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::TrainConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::TrainConfig("batch_size must be >= 1".into()));
        }
        if let Some(t) = self.stop_at_val_accuracy {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::TrainConfig(format!("stop_at_val_accuracy {t} outside (0, 1]")));
            }
        }
        self.model.validate()
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Running accuracy over the epoch's training batches.
    pub train_acc: f64,
    pub val_tool_acc: Option<f64>,
    pub val_action_acc: Option<f64>,
    /// Checkpoint metric: all heads right.
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_val_metric: f64,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.epochs {
            w.serialize(r).expect("history rows serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }
}

/// Cross-entropy summed over the heads of `head`. Labels outside a head's
/// range are rejected before the loss is formed.
pub fn loss(logits: &Logits, labels: &Labels, head: HeadMode) -> Result<Tensor> {
    let mut total: Option<Tensor> = None;
    for &kind in head.heads() {
        let out = logits.get(kind).ok_or_else(|| Error::ShapeMismatch {
            tensor: format!("{} logits", kind.name()),
            expected: format!("[B, {}]", kind.classes()),
            actual: "absent".into(),
        })?;
        let target = match kind {
            HeadKind::Tool => &labels.tool,
            HeadKind::Action => &labels.action,
            HeadKind::Joint => &labels.joint,
        };
        let classes = kind.classes() as i64;
        let size = out.size();
        if size.len() != 2 || size[1] != classes || size[0] != target.size()[0] {
            return Err(Error::ShapeMismatch {
                tensor: format!("{} logits", kind.name()),
                expected: format!("[{}, {classes}]", target.size()[0]),
                actual: format!("{size:?}"),
            });
        }
        if target.numel() > 0 {
            let lo = target.min().int64_value(&[]);
            let hi = target.max().int64_value(&[]);
            if lo < 0 || hi >= classes {
                let label = if lo < 0 { lo } else { hi };
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        let ce = out.cross_entropy_loss::<Tensor>(target, None, Reduction::Mean, -100, 0.0);
        total = Some(match total {
            Some(t) => t + ce,
            None => ce,
        });
    }
    total.ok_or_else(|| Error::ModelConfig("head mode without heads".into()))
}

/// Training, validation and (optionally) test samples, preprocessed.
#[derive(Debug)]
pub struct PreparedData {
    pub train: TensorSet,
    pub val: TensorSet,
    pub test: Option<TensorSet>,
}

/// Result of [`train`]: the model holds the best-validation weights.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub checkpoint: Checkpoint,
    pub history: History,
}

fn batch_correct(logits: &Logits, head: HeadMode, labels: &Labels) -> Result<i64> {
    let mut all: Option<Tensor> = None;
    for &kind in head.heads() {
        let target = match kind {
            HeadKind::Tool => &labels.tool,
            HeadKind::Action => &labels.action,
            HeadKind::Joint => &labels.joint,
        };
        let hit = logits
            .get(kind)
            .expect("heads checked by loss")
            .argmax(-1, false)
            .eq_tensor(target);
        all = Some(match all {
            Some(a) => a.logical_and(&hit),
            None => hit,
        });
    }
    Ok(all.map_or(0, |t| t.to_kind(Kind::Int64).sum(Kind::Int64).int64_value(&[])))
}

/// Trains a fresh model. After every epoch the validation set is scored;
/// weights are kept whenever the all-heads-correct accuracy strictly
/// improves, and restored at the end.
pub fn train(cfg: &TrainConfig, data: &PreparedData) -> Result<TrainOutcome> {
    train_from(cfg, data, None)
}

/// Like [`train`], starting from the weights of `init` when given. The
/// checkpoint must have been written for the same model configuration.
pub fn train_from(cfg: &TrainConfig, data: &PreparedData, init: Option<&Checkpoint>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::TrainConfig("empty training set".into()));
    }
    if data.val.is_empty() {
        return Err(Error::TrainConfig("empty validation set".into()));
    }
    let head = cfg.model.head;
    let variant = cfg.model.variant;
    let mut model = Model::new(cfg.model, cfg.seed)?;
    if let Some(ck) = init {
        model.load_weights(ck)?;
    }
    let mut opt = nn::Adam::default().build(model.var_store(), cfg.learning_rate)?;

    let mut history = History::default();
    let mut best: Option<Checkpoint> = None;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[cfg.seed, epoch as u64]));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0i64;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = data.train.batch(chunk, variant, head)?;
            let logits = model.forward(&batch, true)?;
            let l = loss(&logits, &batch.labels, head)?;
            let value = l.double_value(&[]);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            opt.backward_step(&l);
            loss_sum += value * chunk.len() as f64;
            correct += tch::no_grad(|| batch_correct(&logits, head, &batch.labels))?;
        }

        let val = eval::evaluate(&model, &data.val)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            train_acc: correct as f64 / data.train.len() as f64,
            val_tool_acc: val.tool_accuracy(),
            val_action_acc: val.action_accuracy(),
            val_acc: val.headline(),
        };
        log::debug!(
            "epoch {epoch}: loss {:.4} train {:.4} val {:.4} ({:.1}s)",
            record.train_loss,
            record.train_acc,
            record.val_acc,
            started.elapsed().as_secs_f64()
        );
        if best.is_none() || record.val_acc > history.best_val_metric {
            history.best_val_metric = record.val_acc;
            history.best_epoch = epoch;
            let mut ck = Checkpoint::capture(&model);
            ck.info.insert("epoch".into(), epoch.to_string());
            ck.info.insert("val_acc".into(), record.val_acc.to_string());
            best = Some(ck);
        }
        history.epochs.push(record);
        if cfg
            .stop_at_val_accuracy
            .is_some_and(|target| record.val_acc >= target)
        {
            break;
        }
    }

    let checkpoint = best.expect("at least one epoch ran");
    model.load_weights(&checkpoint)?;
    Ok(TrainOutcome {
        model,
        checkpoint,
        history,
    })
}

/// Test results of one configuration over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task: Option<Task>,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    /// Headline test accuracy per seed, in `seeds` order.
    pub test_accuracies: Vec<f64>,
    pub reports: Vec<EvalReport>,
    pub mean: f64,
    /// Absent for a single seed.
    pub ci_half_width: Option<f64>,
    pub n_seeds: usize,
}

impl RunResult {
    pub fn from_reports(task: Option<Task>, config: TrainConfig, seeds: Vec<u64>, reports: Vec<EvalReport>) -> Result<RunResult> {
        if reports.is_empty() || reports.len() != seeds.len() {
            return Err(Error::Eval("one report per seed required".into()));
        }
        let acc: Vec<f64> = reports.iter().map(EvalReport::headline).collect();
        let (mean, ci) = if acc.len() >= 2 {
            let (m, h) = confidence_interval(&acc)?;
            (m, Some(h))
        } else {
            log::warn!("single seed: no confidence interval");
            (acc[0], None)
        };
        Ok(RunResult {
            task,
            config,
            n_seeds: seeds.len(),
            seeds,
            test_accuracies: acc,
            reports,
            mean,
            ci_half_width: ci,
        })
    }

    /// Recomputes the interval half-width with multiplier `z`.
    pub fn set_interval_z(&mut self, z: f64) -> Result<()> {
        if self.test_accuracies.len() >= 2 {
            self.ci_half_width = Some(eval::confidence_interval_z(&self.test_accuracies, z)?.1);
        }
        Ok(())
    }

    /// Mean of a per-head accuracy across seeds, if every report has it.
    pub fn mean_of(&self, f: impl Fn(&EvalReport) -> Option<f64>) -> Option<f64> {
        let v: Option<Vec<f64>> = self.reports.iter().map(f).collect();
        v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Trains and tests `cfg` once per seed, `jobs` runs at a time. The result
/// does not depend on `jobs`.
pub fn multi_seed(cfg: &TrainConfig, data: &PreparedData, seeds: &[u64], jobs: usize) -> Result<RunResult> {
    if seeds.is_empty() {
        return Err(Error::TrainConfig("at least one seed required".into()));
    }
    let test = data
        .test
        .as_ref()
        .ok_or_else(|| Error::TrainConfig("multi-seed runs need a test set".into()))?;
    let run = |&seed: &u64| -> Result<EvalReport> {
        let c = TrainConfig { seed, ..*cfg };
        let outcome = train(&c, data).map_err(|e| Error::in_run(format!("seed {seed}"), e))?;
        eval::evaluate(&outcome.model, test).map_err(|e| Error::in_run(format!("seed {seed}"), e))
    };
    let reports = with_jobs(jobs, || seeds.par_iter().map(run).collect::<Result<Vec<_>>>())?;
    RunResult::from_reports(None, *cfg, seeds.to_vec(), reports)
}

/// Runs `f` on a pool of `jobs` threads (the global pool for 0).
pub(crate) fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Predictions of a trained model on the samples at `indices` of `set`.
pub fn predict(model: &Model, set: &TensorSet, indices: &[usize]) -> Result<Predictions> {
    eval::predict_indices(model, set, indices)
}

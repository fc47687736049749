use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, with_jobs, PreparedData, TrainConfig};
use crate::error::{Error, Result};
use crate::eval;

/// Search space; trials are the Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub first_kernels: Vec<u32>,
    pub first_strides: Vec<u32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            learning_rates: vec![1e-3, 5e-4, 1e-4],
            batch_sizes: vec![16, 32, 64, 128],
            first_kernels: vec![3, 5, 7],
            first_strides: vec![1, 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lr: f64,
    pub batch: usize,
    pub kernel: u32,
    pub stride: u32,
}

impl GridPoint {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = *base;
        c.learning_rate = self.lr;
        c.batch_size = self.batch;
        c.model.first_kernel = self.kernel;
        c.model.first_stride = self.stride;
        c
    }

    fn key(&self) -> (u64, usize, u32, u32) {
        (self.lr.to_bits(), self.batch, self.kernel, self.stride)
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &lr in &self.learning_rates {
            for &batch in &self.batch_sizes {
                for &kernel in &self.first_kernels {
                    for &stride in &self.first_strides {
                        out.push(GridPoint {
                            lr,
                            batch,
                            kernel,
                            stride,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.batch_sizes.len() * self.first_kernels.len() * self.first_strides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Restricts axes from a list such as `lr=1e-3,batch=32|64`; values
    /// separated by `|` are kept, in grid order.
    pub fn restrict(&mut self, subset: &str) -> Result<()> {
        for part in subset.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("subset entry '{part}' is not key=value")))?;
            let bad = |v: &str| Error::Config(format!("bad value '{v}' for subset key '{key}'"));
            let values: Vec<&str> = values.split('|').map(str::trim).collect();
            match key.trim() {
                "lr" | "learning_rate" => {
                    let keep = values
                        .iter()
                        .map(|v| v.parse::<f64>().map_err(|_| bad(v)))
                        .collect::<Result<Vec<_>>>()?;
                    self.learning_rates = keep;
                }
                "batch" | "batch_size" => {
                    self.batch_sizes = values
                        .iter()
                        .map(|v| v.parse().map_err(|_| bad(v)))
                        .collect::<Result<_>>()?;
                }
                "kernel" | "first_kernel" => {
                    self.first_kernels = values
                        .iter()
                        .map(|v| v.parse().map_err(|_| bad(v)))
                        .collect::<Result<_>>()?;
                }
                "stride" | "first_stride" => {
                    self.first_strides = values
                        .iter()
                        .map(|v| v.parse().map_err(|_| bad(v)))
                        .collect::<Result<_>>()?;
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown subset key '{other}' (lr, batch, kernel, stride)"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// One row of the trial table. Failed trials have no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub lr: f64,
    pub batch: usize,
    pub kernel: u32,
    pub stride: u32,
    pub seed: u64,
    pub best_val: Option<f64>,
    pub test_acc: Option<f64>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub error: Option<String>,
}

impl Trial {
    pub fn point(&self) -> GridPoint {
        GridPoint {
            lr: self.lr,
            batch: self.batch,
            kernel: self.kernel,
            stride: self.stride,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.best_val.is_some()
    }
}

/// Highest validation score; ties go to the lower learning rate, then the
/// smaller batch, kernel and stride.
pub fn select_best(trials: &[Trial]) -> Option<&Trial> {
    trials.iter().filter(|t| t.succeeded()).min_by(|a, b| {
        b.best_val
            .partial_cmp(&a.best_val)
            .expect("finite scores")
            .then(a.lr.total_cmp(&b.lr))
            .then(a.batch.cmp(&b.batch))
            .then(a.kernel.cmp(&b.kernel))
            .then(a.stride.cmp(&b.stride))
    })
}

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    /// Concurrent trials; 0 uses the global pool.
    pub jobs: usize,
    /// Trial table kept up to date while searching. Successful rows already
    /// present are not re-run.
    pub trial_csv: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: TrainConfig,
    pub best_trial: Trial,
    /// One row per grid point, in grid order.
    pub trials: Vec<Trial>,
}

pub fn read_trials(path: &Path) -> Result<Vec<Trial>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn write_trials(path: &Path, trials: &[Trial]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for t in trials {
        w.serialize(t).map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn append_trial(path: &Path, trial: &Trial) -> Result<()> {
    let fresh = !path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(trial).map_err(|e| Error::Config(e.to_string()))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    let mut inner = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Trains one model per grid point on `base`'s task and picks the best by
/// validation score.
pub fn grid_search(grid: &GridSpec, base: &TrainConfig, data: &PreparedData, opts: &GridOptions) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::TrainConfig("empty grid".into()));
    }
    let points = grid.points();
    let mut done: HashMap<_, Trial> = HashMap::new();
    if let Some(path) = opts.trial_csv.as_deref().filter(|p| p.exists()) {
        for t in read_trials(path)? {
            if t.succeeded() && t.seed == base.seed {
                done.insert(t.point().key(), t);
            }
        }
        log::info!("resuming grid search: {} trials already complete", done.len());
        // rewrite without failed or foreign rows so appends stay consistent
        let keep: Vec<Trial> = points.iter().filter_map(|p| done.get(&p.key()).cloned()).collect();
        write_trials(path, &keep)?;
    }

    let log_lock = Mutex::new(());
    let run = |p: &GridPoint| -> Trial {
        if let Some(t) = done.get(&p.key()) {
            return t.clone();
        }
        let cfg = p.apply(base);
        let started = Instant::now();
        let result = train(&cfg, data).and_then(|out| {
            let test = data
                .test
                .as_ref()
                .map(|t| eval::evaluate(&out.model, t).map(|r| r.headline()))
                .transpose()?;
            Ok((out.history.best_val_metric, test))
        });
        let mut trial = Trial {
            lr: p.lr,
            batch: p.batch,
            kernel: p.kernel,
            stride: p.stride,
            seed: base.seed,
            best_val: None,
            test_acc: None,
            wall_time_s: started.elapsed().as_secs_f64(),
            error: None,
        };
        match result {
            Ok((val, test)) => {
                trial.best_val = Some(val);
                trial.test_acc = test;
            }
            Err(e) => {
                log::warn!("trial lr={} batch={} kernel={} stride={} failed: {e}", p.lr, p.batch, p.kernel, p.stride);
                trial.error = Some(e.to_string());
            }
        }
        if let Some(path) = &opts.trial_csv {
            let _g = log_lock.lock().unwrap_or_else(|e| e.into_inner());
            if let Err(e) = append_trial(path, &trial) {
                log::warn!("could not record trial: {e}");
            }
        }
        trial
    };
    let trials: Vec<Trial> = with_jobs(opts.jobs, || points.par_iter().map(run).collect());

    if let Some(path) = &opts.trial_csv {
        write_trials(path, &trials)?;
    }
    let best_trial = match select_best(&trials) {
        Some(t) => t.clone(),
        None => {
            let first = trials.iter().find_map(|t| t.error.clone()).unwrap_or_default();
            return Err(Error::TrainConfig(format!(
                "all {} trials failed; first error: {first}",
                trials.len()
            )));
        }
    };
    Ok(GridOutcome {
        best: best_trial.point().apply(base),
        best_trial,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(lr: f64, batch: usize, kernel: u32, stride: u32, val: Option<f64>) -> Trial {
        Trial {
            lr,
            batch,
            kernel,
            stride,
            seed: 0,
            best_val: val,
            test_acc: None,
            wall_time_s: 0.0,
            error: None,
        }
    }

    #[test]
    fn full_grid_has_72_points() {
        let g = GridSpec::default();
        assert_eq!(g.len(), 72);
        assert_eq!(g.points().len(), 72);
    }

    #[test]
    fn subset_restricts_axes() {
        let mut g = GridSpec::default();
        g.restrict("lr=1e-3").unwrap();
        assert_eq!(g.len(), 24);
        g.restrict("batch=32|64, stride=2").unwrap();
        assert_eq!(g.len(), 6);
        assert!(g.clone().restrict("momentum=0.9").is_err());
        assert!(g.restrict("lr=fast").is_err());
    }

    #[test]
    fn ties_prefer_smaller_settings() {
        let t = vec![
            trial(1e-3, 16, 3, 1, Some(0.9)),
            trial(1e-4, 64, 7, 2, Some(0.9)),
            trial(1e-4, 32, 7, 2, Some(0.9)),
            trial(5e-4, 16, 3, 1, Some(0.8)),
            trial(1e-5, 16, 3, 1, None),
        ];
        let b = select_best(&t).unwrap();
        assert_eq!((b.lr, b.batch), (1e-4, 32));
        let swapped: Vec<Trial> = t.iter().rev().cloned().collect();
        assert_eq!(select_best(&swapped).unwrap().point(), b.point());
        assert!(select_best(&t[4..]).is_none());
    }

    #[test]
    fn trial_table_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.csv");
        let rows = vec![trial(5e-4, 16, 3, 1, Some(0.25)), trial(1e-4, 128, 7, 2, None)];
        write_trials(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("lr,batch,kernel,stride,seed,best_val,test_acc,wall_time_s\n"));
        assert_eq!(read_trials(&path).unwrap(), rows);
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("duplicate sample key {0}")]
    DuplicateSample(String),

    #[error("split: {0}")]
    Split(String),

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("unknown {kind} '{value}'")]
    Parse { kind: &'static str, value: String },

    #[error("scene: {0}")]
    Scene(String),

    #[error("zero displacement, cannot infer action or tool")]
    AmbiguousDisplacement,

    #[error("invalid model config: {0}")]
    ModelConfig(String),

    #[error("shape mismatch for {tensor}: expected {expected}, got {actual}")]
    ShapeMismatch {
        tensor: String,
        expected: String,
        actual: String,
    },

    #[error("label {label} out of range for {classes}-way head")]
    LabelOutOfRange { label: i64, classes: i64 },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid train config: {0}")]
    TrainConfig(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("sample {sample}: {source}")]
    InSample {
        sample: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{run}: {source}")]
    InRun {
        run: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Torch(#[from] tch::TchError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configs, manifests, labels)
    /// rather than failures while running.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Schema { .. }
            | Error::DuplicateSample(_)
            | Error::Split(_)
            | Error::Parse { .. }
            | Error::ModelConfig(_)
            | Error::TrainConfig(_)
            | Error::Scene(_)
            | Error::Config(_) => true,
            Error::InSample { source, .. } | Error::InRun { source, .. } => source.is_user_error(),
            _ => false,
        }
    }

    pub(crate) fn in_run(run: impl Into<String>, source: Error) -> Self {
        Error::InRun {
            run: run.into(),
            source: Box::new(source),
        }
    }

    /// Short machine-readable category used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema { .. } => "schema",
            Error::DuplicateSample(_) => "duplicate_sample",
            Error::Split(_) => "split",
            Error::Image { .. } => "image",
            Error::Parse { .. } => "parse",
            Error::Scene(_) => "scene",
            Error::AmbiguousDisplacement => "ambiguous",
            Error::ModelConfig(_) => "model_config",
            Error::ShapeMismatch { .. } => "shape",
            Error::LabelOutOfRange { .. } => "label",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::TrainConfig(_) => "train_config",
            Error::Eval(_) => "eval",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Config(_) => "config",
            Error::InSample { source, .. } | Error::InRun { source, .. } => source.kind(),
            Error::Torch(_) => "torch",
        }
    }
}

//! Benchmark toolkit for recognising which tool moved an object, and how,
//! from images taken before and after the manipulation.
//!
//! * [`dataset`]: manifests, the repetition-wise split, preprocessing
//! * [`synth`]: synthetic scenes with a closed-form label oracle
//! * [`model`]: residual encoders and the five camera/encoder fusion layouts
//! * [`train`]: training loop, grid search and multi-seed runs
//! * [`eval`]: accuracies, confidence intervals, confusion matrices, reports
//! * [`config`]: run configuration shared by the command line tool
//! * [`cli`]: the subcommands of that tool

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod seed;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

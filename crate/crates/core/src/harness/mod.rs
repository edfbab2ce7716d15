//! Experiment plumbing: synthetic data, evaluation, file formats and the
//! experiment runner behind the command-line tool.

pub mod config;
pub mod experiment;
pub mod io;
pub mod model_io;
pub mod rng;
pub mod roc;
pub mod synth;

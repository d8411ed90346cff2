//! Experiment configuration, orchestration and CSV output.
//!
//! A config names an environment, a utility and an algorithm; the harness fans
//! `(seed, parameter)` cells out over a bounded worker pool and collects one
//! [`ResultRow`] per cell (per episode for learning runs). Every row carries
//! the seed and a hash of the effective config, and the CSV is byte-identical
//! across reruns unless timings are requested.

mod config;
mod output;
mod run;

pub use config::{load_config, parse_config, Algorithm, ExperimentConfig, GridM, Learner, SweepSpec};
pub use output::{csv_bytes, write_csv, write_csv_to, Cell, ExperimentOutput, ResultRow, Schema};
pub use run::{run_experiment, THREADS_ENV};

//! Experiment drivers behind the `gam` command-line tool: residual-error
//! sweeps, constellation dumps, SER simulations and matrix utilities. Every
//! command is a pure function of its configuration and seed, and writes a
//! manifest next to its outputs.

pub mod config;
pub mod constellation;
pub mod decompose;
pub mod error;
pub mod output;
pub mod rre;
pub mod ser;

pub use config::{ConfigSource, ExperimentConfig, MedPolicy, SerMode};
pub use error::{BenchError, Result};

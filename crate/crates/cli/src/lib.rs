//! Config ingestion, run orchestration and export for `symflow`.
//!
//! The binary is a thin layer over [`config::load_config`], [`run::run`]
//! and [`export::export_plotdata`]; the same entry points are usable from
//! tests and other drivers.

pub mod config;
pub mod export;
pub mod run;

pub use config::{load_config, ConfigError, Prepared, RunConfig};
pub use export::{export_plotdata, ExportError};
pub use run::{run, RunManifest, RunStatus};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book {}

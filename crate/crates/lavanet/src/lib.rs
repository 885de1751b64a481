//! Experiment orchestration, file formats and plotting around the
//! `lavanet-core` simulation kernel.
//!
//! An [`experiment::Experiment`] resolves parameters, builds the network,
//! runs the trial loop and leaves a run directory with the resolved
//! parameter set, a log, spike CSVs, per-trial weight snapshots and an
//! optional raster SVG. The `lavanet` binary exposes the same flow on the
//! command line.

pub mod cli;
pub mod experiment;
pub mod formats;
pub mod plot;
pub mod runner;

pub use lavanet_core as core;
pub use experiment::{Experiment, ExperimentBuilder, ExperimentError, RunResults};

//! Deterministic multi-core spiking reservoir kernel.
//!
//! The crate models a reservoir network whose single user-facing weight
//! matrix is partitioned into per-core chunks, stepped with CUBA LIF
//! dynamics under barrier-synchronized spike exchange, and recorded back
//! into whole-network datasets. Everything is seeded and deterministic:
//! the same parameters and seed produce bit-identical spike trains and
//! weights regardless of how many cores or host threads are used.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the CLI live
//! in the companion `lavanet` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod engine;
mod math;
pub mod params;
pub mod partition;
pub mod plasticity;
pub mod probes;
pub mod rng;
pub mod sim;
pub mod sparse;
pub mod spectral;
pub mod stimulus;
pub mod weights;

pub use params::{DerivedParameters, ParamValue, ParameterSet};
pub use partition::{ChunkGrid, CoreLayout};
pub use sparse::SparseMatrix;

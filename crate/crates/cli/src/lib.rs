//! Benchmark harness around the multigrid-preconditioned Helmholtz solver:
//! velocity-model generators, a raster model format, single-experiment and
//! table runners, and damping tuning. The `hmg` binary is a thin CLI over
//! these modules.

pub mod experiment;
pub mod models;
pub mod raster;
pub mod tables;

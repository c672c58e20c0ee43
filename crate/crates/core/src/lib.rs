//! Simulation and analysis of the quasiperiodic kicked rotor.
//!
//! The quantum evolution is exact on a finite momentum lattice (split-operator
//! with FFTs), the classical map is iterated directly, and the Anderson-like
//! lattice equivalent of the Floquet problem can be built and checked against
//! a dense diagonalization.

pub mod analysis;
pub mod anderson;
pub mod classical;
pub mod distribution;
pub mod error;
pub mod io;
pub mod params;
pub mod quantum;
pub mod report;
pub mod seed;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
pub use params::{EnsembleSpec, RunConfig, Sampling, SimParams, ValidatedParams, Warning};
pub use quantum::{evolve, run_ensemble, run_ensemble_adaptive, EnsembleRun, Evolution};
pub use distribution::{MomentumDistribution, ObservableSeries};

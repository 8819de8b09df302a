//! Simulation of jump-time topology in a dissipative SSH chain, with an
//! ancilla-extended Lindblad model that reads jump-count-conditioned states
//! off a plain wall-time evolution.

pub mod check;
pub mod cli;
pub mod emulator;
pub mod error;
pub mod jumptime;
pub mod lindblad;
pub mod matrix;
pub mod ssh;
pub mod svg;
pub mod sweep;

pub use error::{Error, ErrorClass, Result};
pub use lindblad::{DensityMatrix, LindbladModel};
pub use matrix::ComplexMatrix;
pub use ssh::{BlochParams, MomentumPair};
pub use emulator::ExtendedModel;
pub use sweep::{PhaseResult, SweepConfig};

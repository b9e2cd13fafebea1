//! Experiment harness for low-Tucker-rank tensor recovery.
//!
//! Each command builds seeded problem instances, runs TIHT and StoTIHT,
//! and renders tidy CSV. Trials run on a rayon pool. Every trial draws
//! from its own generators derived from `seed ⊕ trial` and the cell
//! coordinates, so results do not depend on scheduling or thread count.

pub mod commands;
pub mod error;
pub mod gnuplot;
pub mod problem;
pub mod spec;

pub use commands::{
    cmd_epochs_grid, cmd_phase_grid, cmd_real_tensor, cmd_synthetic_run, cmd_timing, cmd_trip_probe, ProbeOptions,
    ResultRecord,
};
pub use error::{HarnessError, Result};
pub use spec::{ExperimentSpec, Kind, Scaled};

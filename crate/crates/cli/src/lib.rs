//! Experiment harness: seeded sweeps written as CSV and single-scenario
//! evaluation.

pub mod eval;
pub mod run;
pub mod sweep;

pub use eval::{evaluate_once, EvalReport};
pub use run::{RunError, RunOptions};
pub use sweep::{run_sweep, Figure, Point, Scheme, SweepSpec, SweepTable, SCHEMA};

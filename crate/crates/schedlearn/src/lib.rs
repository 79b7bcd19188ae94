//! Tools for building job-shop scheduling datasets that are easy to learn from.
//!
//! Co-optimal schedules are plentiful, and independently solved instances of a
//! slowly changing family tend to land on wildly different optima. A network
//! trained on such targets has to fit a near-discontinuous map. This crate
//! generates the same family twice: once the ordinary way (`standard`, every
//! instance solved from scratch with its own tie-breaking) and once by walking
//! the family backwards, re-solving each instance for the schedule closest in
//! L1 distance to its successor's solution (`od`). Both datasets are co-optimal
//! entry by entry; only the trajectory through solution space differs, and the
//! difference is measurable (total variation, empirical Lipschitz constants)
//! and learnable (a small ReLU network with a Lagrangian feasibility penalty).
//!
//! The fastest way in is the `examples/` directory, one runnable program per
//! capability:
//!
//! * `instances` - the text format, feasibility checks, violation degrees
//! * `slowdown_family` - monotone machine-slowdown families
//! * `exact_solver` - branch and bound vs. brute force, seeded tie-breaking
//! * `standard_vs_od` - both generators on one family, total variation and
//!   Lipschitz constants side by side
//! * `projection` - turning arbitrary predicted starts into feasible schedules
//! * `train_surrogate` - the full learning gap on a small family
//! * `capacity_bounds` - piecewise-linear capacity and approximation bounds
//!
//! Run one with `cargo run --release --example standard_vs_od`.
//!
//! The `schedlearn` binary wires the same pipeline into subcommands
//! (`gen-family`, `gen-data`, `train`, `evaluate`, `theory-check`, `run`); see
//! the README for the config format and output layout.

pub mod datagen;
pub mod instance;
pub mod learner;
pub mod lp;
pub mod pipeline;
pub mod project;
pub mod pwl;
pub mod solver;

pub use instance::{JssInstance, PerturbationSpec, Schedule, ViolationReport};
pub use datagen::{Dataset, DatasetEntry, DatasetMode, Norm};
pub use learner::{Metrics, Model, Multipliers, Normalization, TrainConfig, TrainHistory};
pub use lp::MachineOrdering;
pub use pipeline::{ExperimentConfig, ModeConfig, Report, StageError};
pub use pwl::PwlFunction;
pub use solver::{SolveBudget, SolveResult};

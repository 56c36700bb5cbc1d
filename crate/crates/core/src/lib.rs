//! Bulk-surface Cahn-Hilliard simulator with singular potentials and
//! Robin/Dirichlet transmission between the bulk and the boundary.
//!
//! The geometry is a periodic strip whose two boundary lines carry their own
//! Cahn-Hilliard dynamics. See the `examples/` directory for one runnable
//! program per capability.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod potentials;
pub mod snapshot;
pub mod stepper;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use experiments::{InitialData, SweepParam, SweepSpec};
pub use grid::{BulkField, Flux, Grid, Ring, SurfField};
pub use model::{ChemState, EnergyBreakdown, ModelParams, PhaseState};
pub use potentials::{Potential, YosidaApprox};
pub use stepper::{LinearSolver, StepReport, Stepper, StepperConfig};

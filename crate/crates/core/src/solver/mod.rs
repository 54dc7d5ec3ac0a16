//! Stokes solves, the IMEX step and the reference/nudged time loops.
//!
//! Each step solves the bordered saddle system
//!
//! ```text
//! [ M/dt + nu K + N(v_n) + mu M P   -B^T   0 ] [v]   [ M v_n/dt + F + mu M P u ]
//! [ -B                               0     m ] [q] = [ 0                        ]
//! [ 0                                m^T   0 ] [s]   [ 0                        ]
//! ```
//!
//! with strong velocity boundary values, where `P` is the interpolation
//! matrix and `m` integrates pressure basis functions.

mod checkpoint;
mod presets;
mod run;
mod system;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use presets::{body_force, Manufactured, TimeProfile};
pub use run::{relative_difference, run_dns, run_nudged, DnsSpec, InitialCondition, NudgeSpec, Observer, Trajectory};
pub use system::{
    solve_stokes, Discretization, EvolutionState, Problem, StepSystem, MAX_STEP_SOLVE_TOL, STEP_SOLVE_TOL,
};

use std::sync::Arc;

use thiserror::Error;

use crate::fem::FemError;
use crate::interp::InterpError;
use crate::mesh::Point;

/// Body force as a function of position and time.
pub type ForceFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;

/// Right-hand side forcing of the momentum equation.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// Time-independent force; its load vector is assembled once.
    Steady(ForceFn),
    /// Force re-assembled at every step time.
    Unsteady(ForceFn),
}

impl std::fmt::Debug for Forcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Forcing::Zero => "Zero",
            Forcing::Steady(_) => "Steady",
            Forcing::Unsteady(_) => "Unsteady",
        })
    }
}

impl Forcing {
    pub fn steady(f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Forcing::Steady(Arc::new(move |p, _| f(p)))
    }

    pub fn unsteady(f: impl Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Forcing::Unsteady(Arc::new(f))
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("non-finite value in the solution at step {step} (t = {time})")]
    NonFinite { step: u64, time: f64 },
    #[error("invalid run parameters: {0}")]
    InvalidParameters(String),
    #[error("reference trajectory has no snapshot at t = {0}")]
    MissingReference(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

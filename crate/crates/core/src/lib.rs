//! Finite-element Navier-Stokes with continuous data assimilation (nudging).
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: ring-domain triangulations and nested midpoint refinement
//! * [`fem`]: Lagrange P1/P2 spaces, Taylor-Hood assembly, Dirichlet constraints
//! * [`interp`]: coarse-data interpolation operators re-expressed on the fine mesh
//! * [`solver`]: Stokes solves, the IMEX time step, DNS and nudged runs
//! * [`analysis`]: error records, decay fits, Grashof number, Stokes eigenvalue
//!   and admissible nudging-gain ranges

pub mod analysis;
pub mod fem;
pub mod interp;
pub mod mesh;
pub mod solver;

/// Pins the linear algebra backend to sequential execution so that repeated
/// runs produce bitwise-identical results.
pub fn set_deterministic() {
    faer::set_global_parallelism(faer::Par::Seq);
}

//! Lagrange P1/P2 spaces, Taylor-Hood assembly and Dirichlet constraints.

mod assemble;
mod dirichlet;
mod inf_sup;
mod krylov;
mod linsolve;
mod norms;
mod quadrature;
mod sparse;
mod space;

pub use assemble::{
    assemble_convection, assemble_divergence, assemble_load, assemble_mass, assemble_mean_vector,
    assemble_stiffness, saddle_operator, BasisTable, ElementPattern,
};
pub use dirichlet::{apply_dirichlet, BcFn, DirichletBc};
pub use inf_sup::{inf_sup_proxy, InfSupEstimate, INF_SUP_THRESHOLD};
pub use krylov::{gmres, KrylovReport};
pub use linsolve::{LuSolver, QuasiDefiniteLdlt, RESIDUAL_TOL};
pub use norms::{kinetic_energy, norms, FieldNorms};
pub use quadrature::TriangleRule;
pub use sparse::SparseOperator;
pub use space::{Degree, ElementGeometry, FeField, FeSpace};

use thiserror::Error;

use crate::mesh::BoundaryTag;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    UnsupportedDegree(usize),
    #[error("unsupported component count {0} (expected 1 or 2)")]
    UnsupportedComponents(usize),
    #[error("coefficient vector has length {found}, space needs {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("coefficient {0} is not finite")]
    NonFinite(usize),
    #[error("spaces live on different meshes")]
    MeshMismatch,
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("no boundary value given for tag '{}'", .0.as_str())]
    MissingBoundaryTag(BoundaryTag),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
}

//! Numerical verification toolkit for the primal proximal formulation of a
//! Ginzburg-Landau type energy and its associated duality principles.
//!
//! The energy is the double-well functional
//! `J(u) = γ/2 ∫ ∇u·∇u + α/2 ∫ (u²−β)² − ⟨u,f⟩`
//! discretized on a rectangular Dirichlet grid. On top of the primal side
//! (Newton and proximal fixed-point solvers) the crate evaluates the proximal
//! dual functional `J*(v*, v₀*, p)`, the sign-alignment optimality criterion,
//! a related duality principle with a numerically computed conjugate, and a
//! tensor-indexed convex dual formulation, each with machine checks of the
//! stationarity, zero-gap and curvature claims on the discrete model.

pub mod acceptance;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optcrit;
pub mod par;
pub mod primal;
pub mod proxdual;
pub mod tensordual;

pub use grid::{build_grid, Field, Grid, GridSpec};
pub use linalg::SymOp;
pub use model::ModelParams;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operator is not positive definite (min eigenvalue {min_eig})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue {min_eig})")]
    NotPositiveSemidefinite { min_eig: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("v0* is not in B*")]
    NotInBstar,
    #[error("tensor dual is not in B*")]
    NotInBstarT,
    #[error("near-singular 2x2 block at node {0}")]
    SingularNode(usize),
    #[error("f changes sign; sign alignment requires uniform-sign f")]
    MixedSignF,
    #[error("inner conjugate problem is not concave: {0}")]
    NotConcave(String),
    #[error("proximal subproblem is not convex")]
    NotConvex,
    #[error("iterates left B* and backtracking failed")]
    LeftBstar,
    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("config parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("missing required config key `{0}`")]
    MissingRequired(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Multigrid-preconditioned Krylov solver for the acoustic Helmholtz equation
//! on regular grids, with a local Fourier analysis toolkit for tuning the
//! smoothers.
//!
//! The pieces compose in one direction: [`grid`] defines grids and fields,
//! [`operator`] assembles the compact 4th-order discretization, [`intergrid`]
//! builds transfer operators and Galerkin coarse operators, [`vanka`] builds
//! the additive overlapping-patch smoothers, [`multigrid`] stacks them into a
//! shifted-Laplacian hierarchy, [`krylov`] wraps the cycle as a flexible GMRES
//! preconditioner, and [`lfa`] predicts smoothing and two-grid convergence
//! factors from Fourier symbols.

pub mod grid;
pub mod intergrid;
pub mod krylov;
pub mod lfa;
pub mod linalg;
pub mod multigrid;
pub mod operator;
pub mod vanka;

/// Errors surfaced by construction and solve entry points.
///
/// Numerical breakdowns that tests need to distinguish get their own variants;
/// everything contract-shaped is `InvalidArgument` with a message naming the
/// offending argument.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular patch matrix centered at node {node} on level {level}")]
    SingularPatch { node: usize, level: usize },
    #[error("coarse factorization failed on level {level}: {reason}")]
    CoarseFactorization { level: usize, reason: String },
}

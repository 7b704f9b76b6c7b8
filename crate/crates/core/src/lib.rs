//! Interior point solver for convex quadratic programs that factorizes the
//! equality-constrained saddle-point block once and solves the
//! inequality-constraint reduced system with preconditioned CG.
//!
//! The crate also carries four baseline KKT strategies, a flop-count cost
//! model reconciled against instrumented kernels, and dense spectral
//! diagnostics used as independent oracles.

pub mod costmodel;
pub mod error;
pub mod factor;
pub mod ipm;
pub mod krylov;
pub mod precond;
pub mod problems;
pub mod bench;
pub mod sparse;
pub mod spectral;
pub mod verify;

pub use costmodel::{CostLedger, Kernel};
pub use error::{Error, Result};
pub use sparse::{DiagMat, SparseMat, Symmetry};

//! Entanglement-generation rate allocation over a shared quantum memory.
//!
//! One quantum node serves several users at heterogeneous distances. During
//! each generation window it produces Bell pairs per user at rate `r_j`;
//! surviving stored pairs occupy a memory of `C` qubits. This crate models
//! the success probabilities, solves the weighted-pairs allocation problem
//! exactly (continuous relaxation and integer-cell variant), validates the
//! solvers against brute-force and Monte-Carlo oracles, and drives parameter
//! sweeps with CSV/SVG output.
//!
//! Modules:
//! - [`model`]: the success-probability formulas and domain types
//! - [`solver`]: exact greedy solver, Lagrangian-dual cross-check, integer mode
//! - [`oracle`]: grid search, integer enumeration, Monte-Carlo validation
//! - [`sweep`]: scenario files, sweep harness, CSV and SVG output

// validation deliberately writes `!(x >= 0.0)` so NaN fails the checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod chart;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod sweep;

pub use model::{
    AttenuationMode, ConstraintMode, InfeasibleReason, ModelError, NodeConfig, RateAllocation,
    Scenario, SolveStatus, UserProfile,
};
pub use solver::{Relaxation, SolverOptions, TieBreak};

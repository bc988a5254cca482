//! L2 time stepping for Caputo fractional derivatives on graded meshes, with
//! a cancellation-aware evaluation of the local coefficients and a
//! sum-of-exponentials fast variant.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cancellation;
pub mod error;
pub mod l2core;
pub mod mesh;
pub mod operators;
pub mod quadrature;
pub mod soefast;
pub mod solver;
mod special;

pub use cancellation::{thresholds_from_delta, MachineParams, Thresholds, DELTA0};
pub use error::{Error, Result};
pub use l2core::{coeff_last, coeff_pair, eval_i, CoeffMode, KernelPairI, LastPair, StencilPair};
pub use mesh::{build_graded_mesh, TimeMesh};
pub use operators::{fast_l2_caputo, l2_caputo, CaputoRow, SeriesView};
pub use quadrature::GkTolerance;
pub use soefast::{build_soe, eval_j, fast_coeff_pair, FastHistoryState, SoeApproximation};
pub use special::{gamma, CompensatedSum};
pub use solver::{build_grid, convergence_study, observed_rate, solve, solve_with_observer, ProblemSpec, Scheme, SoeSettings, SolveReport, SpatialGrid};

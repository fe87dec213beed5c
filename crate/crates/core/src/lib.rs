//! Two-level solution of block-structured two-stage MILPs.
//!
//! Second-stage variables are coarsened into combinations of fixed-length
//! profiles (the semi-coarse model), constraint rows are summed in groups
//! (the coarse model), and a cut loop re-adds violated fine rows until the
//! coarse solution is feasible for the semi-coarse model. The result is
//! lifted back to a feasible fine-scale point.

pub mod algorithm;
pub mod backend;
pub mod coarsening;
pub mod milp;
pub mod model;
pub mod sparse;

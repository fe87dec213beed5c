//! Oracles used by tests: exact enumeration backed by a pure-Rust LP
//! solver, dense matrix helpers, and random tiny instances.
//!
//! Only the cut-loop suite calls a solver backend, and it takes one as an
//! argument.

pub mod dense;
pub mod exact;
pub mod random;
pub mod suites;

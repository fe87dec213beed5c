//! Cogeneration capacity planning: hourly model, synthetic building data,
//! profile generation and the profile-based two-level solve.

use thiserror::Error;
use twolevel::algorithm::AlgorithmError;
use twolevel::backend::BackendError;
use twolevel::coarsening::CoarseningError;

pub mod data;
pub mod full;
pub mod instance;
pub mod profiles;
pub mod schedule;
pub mod semi;
pub mod solve;

pub use data::{building_instance, BuildingType, InstanceOptions};
pub use full::{build_full, FullIndex, FullModel};
pub use instance::{CogenInstance, Gen, Tech};
pub use profiles::{CogenLibrary, CogenProfilePool, SelectionConfig};
pub use schedule::{evaluate_cost, CogenSchedule, CogenSolution, CostBreakdown};
pub use semi::{build_coarse_cogen, build_semi_cogen, lift_semi, CogenSemi};

#[derive(Debug, Error)]
pub enum CogenError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("unknown building type `{0}`")]
    UnknownBuilding(String),
    #[error("horizon mismatch: expected {expected} hours, got {got}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("on/off input is not binary at index {index}: {value}")]
    NonBinaryInput { index: usize, value: f64 },
    #[error("empty profile pool: {0}")]
    EmptyPool(String),
    #[error("pool of {size} profiles cannot supply {k} clusters")]
    PoolTooSmall { size: usize, k: usize },
    #[error("invalid profile pool: {0}")]
    InvalidProfilePool(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Coarsening(#[from] CoarseningError),
}

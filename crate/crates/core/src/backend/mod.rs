//! Solver backend abstraction.
//!
//! Every LP and MILP solve in the crate goes through [`Backend`]. A backend
//! declares what warm-start information it can consume via
//! [`Capabilities`]; callers must degrade gracefully when a capability is
//! missing.

mod highs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MilpModel, RowBlock};

pub use highs::HighsBackend;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend {0} is not available")]
    BackendUnavailable(String),
    #[error("model translation failed: {0}")]
    ModelTranslationError(String),
    #[error("backend call failed: {0}")]
    Call(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Incumbent found but the gap target was not reached before a limit.
    FeasibleGapped,
    Infeasible,
    Unbounded,
    /// Limit reached without any incumbent.
    TimeLimit,
    Error,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGapped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisStatus {
    Lower,
    Basic,
    Upper,
    Zero,
    Nonbasic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub cols: Vec<BasisStatus>,
    pub rows: Vec<BasisStatus>,
}

impl Basis {
    /// Pads the row statuses with `Basic` so the basis fits a model that has
    /// gained rows since the basis was taken.
    pub fn extended_to(&self, num_rows: usize) -> Basis {
        let mut rows = self.rows.clone();
        rows.resize(num_rows.max(rows.len()), BasisStatus::Basic);
        Basis { cols: self.cols.clone(), rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub simplex_iterations: u64,
    pub nodes: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Column values; empty unless `status.has_solution()`.
    pub primal: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    #[serde(skip)]
    pub basis: Option<Basis>,
    pub stats: SolveStats,
}

impl SolveOutcome {
    /// Relative gap between incumbent and bound, `|obj − bound| / max(|obj|, 1e-10)`.
    pub fn relative_gap(&self) -> f64 {
        if !self.status.has_solution() {
            return f64::INFINITY;
        }
        (self.objective - self.best_bound).abs() / self.objective.abs().max(1e-10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub time_limit_s: f64,
    pub rel_gap: f64,
    pub feasibility_tol: f64,
    pub threads: Option<usize>,
    #[serde(skip)]
    pub basis: Option<Basis>,
    #[serde(skip)]
    pub incumbent: Option<Vec<f64>>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self::desk()
    }
}

impl SolveSettings {
    /// 300 s and 1% gap.
    pub fn desk() -> Self {
        Self {
            time_limit_s: 300.0,
            rel_gap: 0.01,
            feasibility_tol: 1e-6,
            threads: None,
            basis: None,
            incumbent: None,
        }
    }

    /// Three hours and 1% gap.
    pub fn paper() -> Self {
        Self { time_limit_s: 3.0 * 3600.0, ..Self::desk() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit_s = seconds;
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.rel_gap = gap;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub supports_basis_io: bool,
    pub supports_incumbent_start: bool,
}

/// A solver instance holding one model that can grow by rows between solves.
pub trait Session: Send {
    fn num_rows(&self) -> usize;
    fn num_cols(&self) -> usize;
    /// Appends rows. The previous basis is kept for the next solve unless
    /// [`Session::reset_warm_start`] is called.
    fn add_rows(&mut self, rows: &RowBlock) -> Result<(), BackendError>;
    fn solve(&mut self) -> Result<SolveOutcome, BackendError>;
    fn set_basis(&mut self, basis: &Basis) -> Result<(), BackendError>;
    /// Supplies a MILP starting point.
    fn set_start(&mut self, values: &[f64]) -> Result<(), BackendError>;
    /// Drops any retained factorisation, basis or incumbent so the next solve
    /// starts cold.
    fn reset_warm_start(&mut self) -> Result<(), BackendError>;
}

pub trait Backend: Send + Sync {
    fn name(&self) -> String;
    fn capabilities(&self) -> Capabilities;
    /// Opens a session. With `relax` set, integrality is dropped.
    fn open(&self, model: &MilpModel, settings: &SolveSettings, relax: bool) -> Result<Box<dyn Session>, BackendError>;

    fn solve_lp(&self, model: &MilpModel, settings: &SolveSettings) -> Result<SolveOutcome, BackendError> {
        let mut session = self.open(model, settings, true)?;
        session.solve()
    }

    fn solve_milp(&self, model: &MilpModel, settings: &SolveSettings) -> Result<SolveOutcome, BackendError> {
        let mut session = self.open(model, settings, false)?;
        session.solve()
    }
}

/// Looks up a backend by name. Only `highs` is built in.
pub fn by_name(name: &str) -> Result<Box<dyn Backend>, BackendError> {
    match name.to_ascii_lowercase().as_str() {
        "highs" | "" => Ok(Box::new(HighsBackend::new())),
        other => Err(BackendError::BackendUnavailable(other.to_string())),
    }
}

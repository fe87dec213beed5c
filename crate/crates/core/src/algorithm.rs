//! The two-level cut loop.
//!
//! Solve the coarse model, find semi-coarse coupling rows the iterate
//! violates, add them, and repeat. An optional first phase does this on the
//! LP relaxation so the MILP phase starts with most of the needed rows.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, SolveOutcome, SolveSettings, SolveStatus};
use crate::coarsening::{
    build_semi_coarse, CoarseModel, CoarseningError, CoarsePoint, ProfileLibrary, SemiCoarseModel, SemiOptions,
};
use crate::milp::{lift_solution, FinePoint, MilpError, Tolerances, TwoStageMilp, VariablePartition};

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{phase:?} phase, iteration {iteration}: model is infeasible")]
    Infeasible { phase: Phase, iteration: usize },
    #[error("{phase:?} phase, iteration {iteration}: model is unbounded")]
    Unbounded { phase: Phase, iteration: usize },
    #[error("{phase:?} phase, iteration {iteration}: backend returned {status:?}")]
    BackendFailure { phase: Phase, iteration: usize, status: SolveStatus },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Coarsening(#[from] CoarseningError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLoopConfig {
    pub row_violation_tol: f64,
    /// `None` adds every violated row each round.
    pub max_rows_per_round: Option<usize>,
    pub milp_time_limit_s: f64,
    pub milp_rel_gap: f64,
    pub use_lp_warm_start: bool,
    pub basis_reuse: bool,
    /// Pass the previous MILP incumbent as a start to each re-solve.
    pub milp_incumbent_start: bool,
    /// Row-aggregation group size; `None` uses δ.
    pub row_group: Option<usize>,
    pub max_rounds: usize,
    pub threads: Option<usize>,
}

impl Default for CutLoopConfig {
    fn default() -> Self {
        Self {
            row_violation_tol: 1e-6,
            max_rows_per_round: None,
            milp_time_limit_s: 300.0,
            milp_rel_gap: 0.01,
            use_lp_warm_start: true,
            basis_reuse: true,
            milp_incumbent_start: false,
            row_group: None,
            max_rounds: 10_000,
            threads: None,
        }
    }
}

impl CutLoopConfig {
    pub fn validate(&self) -> Result<(), AlgorithmError> {
        if !(self.row_violation_tol > 0.0) {
            return Err(AlgorithmError::InvalidConfig("row_violation_tol must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.milp_rel_gap) {
            return Err(AlgorithmError::InvalidConfig("milp_rel_gap must lie in [0, 1)".into()));
        }
        if !(self.milp_time_limit_s > 0.0) {
            return Err(AlgorithmError::InvalidConfig("milp_time_limit_s must be positive".into()));
        }
        if self.max_rows_per_round == Some(0) {
            return Err(AlgorithmError::InvalidConfig("max_rows_per_round must be at least 1".into()));
        }
        Ok(())
    }

    fn settings(&self) -> SolveSettings {
        SolveSettings { threads: self.threads, ..SolveSettings::desk() }
            .with_time_limit(self.milp_time_limit_s)
            .with_gap(self.milp_rel_gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "LP")]
    Lp,
    #[serde(rename = "MILP")]
    Milp,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Lp => "LP",
            Phase::Milp => "MILP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub phase: Phase,
    pub iter: usize,
    /// Rows added after this solve.
    pub rows_added: usize,
    /// Rows in the model that was solved.
    pub constraints: usize,
    pub objective: f64,
    pub best_bound: f64,
    pub time_s: f64,
    pub simplex_iters: u64,
    pub nodes: u64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The final iterate satisfies every semi-coarse coupling row.
    Converged,
    /// A MILP solve hit its time limit; the incumbent is reported as is.
    TimeLimitWithGap,
    RoundLimit,
}

/// Result of running the cut loop on a coarse model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLoopOutcome {
    /// Final column values of the coarse (and semi-coarse) model.
    pub values: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub first_milp_objective: f64,
    pub history: Vec<IterateRecord>,
    pub rows_added: usize,
    pub lp_rounds: usize,
    pub milp_solves: usize,
    pub lp_time_s: f64,
    pub milp_time_s: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub coarse_point: CoarsePoint,
    pub fine_point: FinePoint,
    pub fine_feasible: bool,
    pub objective: f64,
    pub best_bound: f64,
    pub first_milp_objective: f64,
    pub history: Vec<IterateRecord>,
    pub rows_added: usize,
    pub lp_rounds: usize,
    pub milp_solves: usize,
    pub termination: Termination,
    pub mu: Option<f64>,
    pub total_time_s: f64,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// `(z_semi − z_coarse) / z_semi`.
pub fn relative_gap_mu(semi_objective: f64, coarse_objective: f64) -> f64 {
    (semi_objective - coarse_objective) / semi_objective
}

/// Fine coupling rows violated by `values`, ordered by violation
/// descending then index ascending.
pub fn find_violated(semi: &SemiCoarseModel, values: &[f64], tol: f64) -> Result<Vec<usize>, CoarseningError> {
    Ok(semi.violated_rows(values, tol)?.into_iter().map(|(r, _)| r).collect())
}

pub fn find_violated_point(semi: &SemiCoarseModel, point: &CoarsePoint, tol: f64) -> Result<Vec<usize>, CoarseningError> {
    find_violated(semi, &point.flatten(), tol)
}

/// Picks the rows to add this round, skipping rows already present (their
/// residual is within the solver's own tolerance).
fn rows_to_add(coarse: &CoarseModel, values: &[f64], config: &CutLoopConfig) -> Result<Vec<usize>, CoarseningError> {
    let present: std::collections::HashSet<usize> = coarse.extension().iter().copied().collect();
    let mut rows: Vec<usize> =
        find_violated(coarse.semi(), values, config.row_violation_tol)?.into_iter().filter(|r| !present.contains(r)).collect();
    if let Some(cap) = config.max_rows_per_round {
        rows.truncate(cap);
    }
    Ok(rows)
}

fn record(phase: Phase, iter: usize, constraints: usize, out: &SolveOutcome, rows_added: usize) -> IterateRecord {
    IterateRecord {
        phase,
        iter,
        rows_added,
        constraints,
        objective: out.objective,
        best_bound: out.best_bound,
        time_s: out.stats.wall_time_s,
        simplex_iters: out.stats.simplex_iterations,
        nodes: out.stats.nodes,
        status: out.status,
    }
}

fn fail(phase: Phase, iteration: usize, status: SolveStatus) -> AlgorithmError {
    match status {
        SolveStatus::Infeasible => AlgorithmError::Infeasible { phase, iteration },
        SolveStatus::Unbounded => AlgorithmError::Unbounded { phase, iteration },
        status => AlgorithmError::BackendFailure { phase, iteration, status },
    }
}

/// LP phase: iterate on the LP relaxation of the coarse model until its
/// solution satisfies every coupling row. Returns the final LP point and
/// the per-round records; `coarse` keeps the added rows.
pub fn lp_warm_start_phase(
    coarse: &mut CoarseModel,
    backend: &dyn Backend,
    config: &CutLoopConfig,
) -> Result<(Vec<f64>, Vec<IterateRecord>), AlgorithmError> {
    config.validate()?;
    let mut session = backend.open(&coarse.to_milp(), &config.settings(), true)?;
    let mut history = Vec::new();
    for iter in 0..config.max_rounds {
        let constraints = session.num_rows();
        let out = session.solve()?;
        if !out.status.has_solution() {
            return Err(fail(Phase::Lp, iter, out.status));
        }
        let rows = rows_to_add(coarse, &out.primal, config)?;
        let added = coarse.add_fine_rows(&rows)?;
        history.push(record(Phase::Lp, iter, constraints, &out, added.len()));
        log::debug!("LP round {iter}: objective {:.6} with {constraints} rows, adding {}", out.objective, added.len());
        if added.is_empty() {
            return Ok((out.primal, history));
        }
        session.add_rows(&coarse.semi().rows_block(&added))?;
        if !config.basis_reuse {
            session.reset_warm_start()?;
        }
    }
    Err(AlgorithmError::InvalidConfig(format!("LP phase did not settle within {} rounds", config.max_rounds)))
}

/// MILP phase: same loop with integrality.
pub fn milp_phase(
    coarse: &mut CoarseModel,
    backend: &dyn Backend,
    config: &CutLoopConfig,
) -> Result<CutLoopOutcome, AlgorithmError> {
    config.validate()?;
    let started = Instant::now();
    let mut session = backend.open(&coarse.to_milp(), &config.settings(), false)?;
    let use_start = config.milp_incumbent_start && backend.capabilities().supports_incumbent_start;
    let mut history = Vec::new();
    let mut rows_added = 0;
    let mut first = f64::NAN;
    let mut gapped = false;
    for iter in 0..config.max_rounds {
        let constraints = session.num_rows();
        let out = session.solve()?;
        if !out.status.has_solution() {
            return Err(fail(Phase::Milp, iter, out.status));
        }
        if iter == 0 {
            first = out.objective;
        }
        gapped = out.status == SolveStatus::FeasibleGapped;
        let rows = rows_to_add(coarse, &out.primal, config)?;
        let added = coarse.add_fine_rows(&rows)?;
        rows_added += added.len();
        history.push(record(Phase::Milp, iter, constraints, &out, added.len()));
        log::debug!("MILP round {iter}: objective {:.6} with {constraints} rows, adding {}", out.objective, added.len());
        if added.is_empty() {
            return Ok(CutLoopOutcome {
                objective: out.objective,
                best_bound: out.best_bound,
                values: out.primal,
                first_milp_objective: first,
                milp_solves: history.len(),
                history,
                rows_added,
                lp_rounds: 0,
                lp_time_s: 0.0,
                milp_time_s: started.elapsed().as_secs_f64(),
                termination: if gapped { Termination::TimeLimitWithGap } else { Termination::Converged },
            });
        }
        session.add_rows(&coarse.semi().rows_block(&added))?;
        if !config.basis_reuse {
            session.reset_warm_start()?;
        }
        if use_start {
            session.set_start(&out.primal)?;
        }
    }
    let last = history.last().cloned();
    Err(AlgorithmError::InvalidConfig(format!(
        "MILP phase did not settle within {} rounds (last objective {:?}, gapped {gapped})",
        config.max_rounds,
        last.map(|r| r.objective)
    )))
}

/// Both phases on an already built coarse model.
pub fn run_cut_loop(
    coarse: &mut CoarseModel,
    backend: &dyn Backend,
    config: &CutLoopConfig,
) -> Result<CutLoopOutcome, AlgorithmError> {
    config.validate()?;
    let mut lp_history = Vec::new();
    let mut lp_time = 0.0;
    let mut lp_rows = 0;
    if config.use_lp_warm_start {
        let started = Instant::now();
        let before = coarse.extension().len();
        let (_, hist) = lp_warm_start_phase(coarse, backend, config)?;
        lp_rows = coarse.extension().len() - before;
        lp_history = hist;
        lp_time = started.elapsed().as_secs_f64();
    }
    let mut out = milp_phase(coarse, backend, config)?;
    out.lp_rounds = lp_history.len().saturating_sub(1);
    out.lp_time_s = lp_time;
    out.rows_added += lp_rows;
    lp_history.append(&mut out.history);
    out.history = lp_history;
    Ok(out)
}

/// Builds the semi-coarse and coarse models, runs the cut loop and lifts
/// the result to fine scale.
pub fn solve_two_level(
    model: &TwoStageMilp,
    partition: &VariablePartition,
    profiles: &ProfileLibrary,
    backend: &dyn Backend,
    config: &CutLoopConfig,
) -> Result<SolveReport, AlgorithmError> {
    let started = Instant::now();
    let semi = Arc::new(build_semi_coarse(model, partition, profiles, SemiOptions::default())?);
    let mut coarse = CoarseModel::build(semi.clone(), config.row_group.unwrap_or(partition.delta))?;
    let out = run_cut_loop(&mut coarse, backend, config)?;
    finish_report(model, partition, profiles, &semi, out, started)
}

/// Like [`solve_two_level`] but with an explicit coarse model, for callers
/// that pre-load rows or choose their own groups.
pub fn solve_with_coarse(
    model: &TwoStageMilp,
    partition: &VariablePartition,
    profiles: &ProfileLibrary,
    coarse: &mut CoarseModel,
    backend: &dyn Backend,
    config: &CutLoopConfig,
) -> Result<SolveReport, AlgorithmError> {
    let started = Instant::now();
    let semi = coarse.semi().clone();
    let out = run_cut_loop(coarse, backend, config)?;
    finish_report(model, partition, profiles, &semi, out, started)
}

fn finish_report(
    model: &TwoStageMilp,
    partition: &VariablePartition,
    profiles: &ProfileLibrary,
    semi: &SemiCoarseModel,
    out: CutLoopOutcome,
    started: Instant,
) -> Result<SolveReport, AlgorithmError> {
    let layout = semi.layout.as_ref().ok_or_else(|| AlgorithmError::InvalidConfig("semi-coarse model has no layout".into()))?;
    // Build on the deduplicated library the semi-coarse model was made from.
    let mut lib = profiles.clone();
    lib.deduplicate();
    let mut values = out.values.clone();
    for (v, &int) in values.iter_mut().zip(&semi.base.integer) {
        if int {
            *v = v.round();
        }
    }
    let point = CoarsePoint::from_values(layout, &values);
    let fine = lift_solution(partition, &lib, &point, 1e-5)?;
    let verdict = model.check_feasible(&fine, &Tolerances::default())?;
    Ok(SolveReport {
        coarse_point: point,
        fine_feasible: verdict.feasible,
        fine_point: fine,
        objective: out.objective,
        best_bound: out.best_bound,
        first_milp_objective: out.first_milp_objective,
        history: out.history,
        rows_added: out.rows_added,
        lp_rounds: out.lp_rounds,
        milp_solves: out.milp_solves,
        termination: out.termination,
        mu: None,
        total_time_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_validate() {
        CutLoopConfig::default().validate().unwrap();
        let bad = CutLoopConfig { milp_rel_gap: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = CutLoopConfig { row_violation_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mu_definition() {
        assert!((relative_gap_mu(100.0, 97.0) - 0.03).abs() < 1e-12);
        assert_eq!(relative_gap_mu(5.0, 5.0), 0.0);
    }
}

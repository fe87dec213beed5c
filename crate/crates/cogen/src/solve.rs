//! Solve drivers: the hourly model directly, the semi-coarse model
//! directly, and the two-level cut loop on the coarse model.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use twolevel::algorithm::{run_cut_loop, CutLoopConfig, CutLoopOutcome};
use twolevel::backend::{Backend, SolveOutcome, SolveSettings};

use crate::full::build_full;
use crate::instance::CogenInstance;
use crate::profiles::{moving_horizon_generate, select_library, CogenLibrary, CogenProfilePool, MovingHorizonConfig, SelectionConfig};
use crate::schedule::{evaluate_cost, repair_switching, CogenSchedule, CogenSolution};
use crate::semi::{build_semi_cogen, lift_semi};
use crate::CogenError;

/// Tolerance for accepting a lifted schedule as feasible.
pub const LIFT_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct FullSolve {
    pub solution: CogenSolution,
    pub schedule: CogenSchedule,
    pub outcome: SolveOutcome,
}

pub fn solve_full(inst: &CogenInstance, backend: &dyn Backend, settings: &SolveSettings) -> Result<FullSolve, CogenError> {
    let full = build_full(inst, false)?;
    let started = Instant::now();
    let outcome = backend.solve_milp(&full.model, settings)?;
    let time_s = started.elapsed().as_secs_f64();
    if !outcome.status.has_solution() {
        return Err(CogenError::NoSolution(format!("{}: {:?}", inst.name, outcome.status)));
    }
    let schedule = CogenSchedule::from_full_values(&full.index, &outcome.primal);
    let breakdown = evaluate_cost(inst, &schedule)?;
    let solution = CogenSolution {
        days: inst.days(),
        first_stage: schedule.first_stage(),
        objective: outcome.objective,
        breakdown,
        time_s,
        nodes: outcome.stats.nodes,
        simplex_iters: outcome.stats.simplex_iterations,
    };
    Ok(FullSolve { solution, schedule, outcome })
}

/// Lifted schedule of a semi-coarse point and its worst violation of the
/// hourly model.
#[derive(Debug, Clone)]
pub struct Lifted {
    pub schedule: CogenSchedule,
    pub max_violation: f64,
}

/// Lifts `values`, repairs switching and checks the result against the
/// hourly model.
pub fn lift_and_check(inst: &CogenInstance, lib: &CogenLibrary, semi_index: &crate::semi::SemiIndex, values: &[f64]) -> Result<Lifted, CogenError> {
    let mut schedule = lift_semi(inst, lib, semi_index, values);
    repair_switching(&mut schedule);
    let full = build_full(inst, false)?;
    let v = schedule.to_full_values(&full.index);
    let max_violation = full.model.max_violation(&v).max(full.model.max_integrality_violation(&v));
    Ok(Lifted { schedule, max_violation })
}

#[derive(Debug, Clone)]
pub struct SemiSolve {
    pub objective: f64,
    pub values: Vec<f64>,
    pub outcome: SolveOutcome,
    pub time_s: f64,
}

/// Solves the semi-coarse model as one MILP.
pub fn solve_semi_direct(inst: &CogenInstance, lib: &CogenLibrary, backend: &dyn Backend, settings: &SolveSettings) -> Result<SemiSolve, CogenError> {
    let semi = build_semi_cogen(inst, lib)?;
    let started = Instant::now();
    let outcome = backend.solve_milp(&semi.to_milp(), settings)?;
    let time_s = started.elapsed().as_secs_f64();
    if !outcome.status.has_solution() {
        return Err(CogenError::NoSolution(format!("{} semi-coarse: {:?}", inst.name, outcome.status)));
    }
    Ok(SemiSolve { objective: outcome.objective, values: outcome.primal.clone(), outcome, time_s })
}

#[derive(Debug, Clone)]
pub struct TwoLevelCogen {
    pub outcome: CutLoopOutcome,
    pub solution: CogenSolution,
    pub lifted: Lifted,
    pub total_time_s: f64,
}

/// Runs the cut loop on the coarse cogeneration model and lifts the final
/// iterate.
pub fn solve_two_level_cogen(
    inst: &CogenInstance,
    lib: &CogenLibrary,
    backend: &dyn Backend,
    config: &CutLoopConfig,
) -> Result<TwoLevelCogen, CogenError> {
    let started = Instant::now();
    let semi = build_semi_cogen(inst, lib)?;
    let mut coarse = semi.coarse()?;
    let outcome = run_cut_loop(&mut coarse, backend, config)?;
    let lifted = lift_and_check(inst, lib, &semi.index, &outcome.values)?;
    if lifted.max_violation > LIFT_TOL {
        log::warn!("{}: lifted schedule violates the hourly model by {:.3e}", inst.name, lifted.max_violation);
    }
    let breakdown = evaluate_cost(inst, &lifted.schedule)?;
    let (nodes, simplex_iters) =
        outcome.history.iter().fold((0, 0), |(n, s), r| (n + r.nodes, s + r.simplex_iters));
    let total_time_s = started.elapsed().as_secs_f64();
    let solution = CogenSolution {
        days: inst.days(),
        first_stage: lifted.schedule.first_stage(),
        objective: outcome.objective,
        breakdown,
        time_s: total_time_s,
        nodes,
        simplex_iters,
    };
    Ok(TwoLevelCogen { outcome, solution, lifted, total_time_s })
}

/// Settings for turning an instance into a profile library.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub horizon: MovingHorizonConfig,
    pub selection: SelectionConfig,
}

/// Moving-horizon pool of `source` reduced to a library for `target`.
pub fn generate_library(
    source: &CogenInstance,
    target: &CogenInstance,
    cfg: &ProfileConfig,
    backend: &dyn Backend,
) -> Result<(CogenProfilePool, CogenLibrary), CogenError> {
    let pool = moving_horizon_generate(source, &cfg.horizon, backend)?;
    let lib = select_library(&pool, &cfg.selection, target)?;
    Ok((pool, lib))
}

//! Run reports, tables and the manifest.

use std::path::Path;

use cogen::data::BuildingType;
use cogen::schedule::{first_stage_l1, CogenSolution, CostBreakdown};
use serde::{Deserialize, Serialize};
use twolevel::algorithm::{IterateRecord, Termination};

use crate::config::Variant;
use crate::CliError;

/// Largest first-stage ℓ₁ distance across horizons treated as stable.
pub const STABLE_L1: i64 = 3;
/// Largest μ regarded as a good first coarse iterate.
pub const MU_TARGET: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLoopStats {
    pub first_milp_objective: f64,
    pub lp_rounds: usize,
    pub milp_solves: usize,
    pub lp_time_s: f64,
    pub milp_time_s: f64,
    pub rows_added: usize,
    pub termination: Termination,
    pub lifted_violation: f64,
    pub history: Vec<IterateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub building: BuildingType,
    pub days: usize,
    pub start_day: usize,
    pub variant: Variant,
    pub objective: f64,
    pub solution: CogenSolution,
    #[serde(default)]
    pub cut_loop: Option<CutLoopStats>,
}

impl RunReport {
    pub fn breakdown(&self) -> &CostBreakdown {
        &self.solution.breakdown
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// `(z_semi − z_first) / z_semi`, with the flag for the μ target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuReport {
    pub semi_objective: f64,
    pub first_coarse_objective: f64,
    pub mu: f64,
    pub within_target: bool,
}

impl MuReport {
    pub fn new(semi_objective: f64, first_coarse_objective: f64) -> Self {
        let mu = twolevel::algorithm::relative_gap_mu(semi_objective, first_coarse_objective);
        Self { semi_objective, first_coarse_objective, mu, within_target: mu <= MU_TARGET }
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Per-iterate series of a cut loop.
pub fn history_rows(history: &[IterateRecord]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|h| {
            vec![
                h.phase.to_string(),
                h.iter.to_string(),
                h.rows_added.to_string(),
                h.constraints.to_string(),
                h.objective.to_string(),
                h.best_bound.to_string(),
                format!("{:.6}", h.time_s),
                h.simplex_iters.to_string(),
                h.nodes.to_string(),
                format!("{:?}", h.status),
            ]
        })
        .collect()
}

pub const HISTORY_HEADER: [&str; 10] =
    ["phase", "iter", "rows_added", "constraints", "objective", "best_bound", "time_s", "simplex_iters", "nodes", "status"];

/// Table rows in the first-stage layout, preceded by the model name.
pub fn table_rows(reports: &[RunReport]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let mut header = vec!["Model"];
    header.extend(CogenSolution::TABLE_HEADER);
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.variant.label().to_string()];
            row.extend(r.solution.table_row());
            row
        })
        .collect();
    (header, rows)
}

pub const COST_HEADER: [&str; 9] =
    ["Model", "capital", "peak", "maintenance", "switching", "gas", "purchased_power", "total", "objective"];

pub fn cost_rows(reports: &[RunReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            let b = r.breakdown();
            vec![
                r.variant.label().to_string(),
                b.capital.to_string(),
                b.peak.to_string(),
                b.maintenance.to_string(),
                b.switching.to_string(),
                b.gas.to_string(),
                b.purchased_power.to_string(),
                b.total().to_string(),
                r.objective.to_string(),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub l1: i64,
    pub objective_gap: f64,
    pub stable: bool,
}

fn tag(r: &RunReport) -> String {
    format!("{}/{}d/{}", r.building.name(), r.days, r.variant.label())
}

/// Pairwise first-stage ℓ₁ distances and relative objective gaps.
pub fn compare(reports: &[RunReport]) -> Vec<PairComparison> {
    let mut out = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, b) = (&reports[i], &reports[j]);
            let l1 = first_stage_l1(&a.solution.first_stage, &b.solution.first_stage);
            let scale = a.objective.abs().max(b.objective.abs()).max(1e-12);
            out.push(PairComparison {
                a: tag(a),
                b: tag(b),
                l1,
                objective_gap: (a.objective - b.objective).abs() / scale,
                stable: l1 <= STABLE_L1,
            });
        }
    }
    out
}

/// Reproduction record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub command: &'a str,
    pub args: Vec<String>,
    pub spec: &'a T,
    pub backend: String,
    pub highs_version: String,
    pub cli_version: &'static str,
    pub prng: &'static str,
    pub fixture_version: &'static str,
    pub unix_time: u64,
}

impl<'a, T: Serialize> Manifest<'a, T> {
    pub fn new(command: &'a str, spec: &'a T, backend: String) -> Self {
        Self {
            command,
            args: std::env::args().collect(),
            spec,
            backend,
            highs_version: twolevel::backend::HighsBackend::version(),
            cli_version: env!("CARGO_PKG_VERSION"),
            prng: cogen::data::PRNG_ID,
            fixture_version: cogen::data::FIXTURE_VERSION,
            unix_time: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }
}

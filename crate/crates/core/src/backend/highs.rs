#![allow(non_upper_case_globals)]

use std::ffi::{c_void, CString};
use std::os::raw::c_int;
use std::path::Path;
use std::ptr;
use std::time::Instant;

use highs_sys::*;

use super::{Backend, BackendError, Basis, BasisStatus, Capabilities, Session, SolveOutcome, SolveSettings, SolveStats, SolveStatus};
use crate::model::{MilpModel, RowBlock};

/// HiGHS through its C API.
#[derive(Debug, Default, Clone, Copy)]
pub struct HighsBackend;

impl HighsBackend {
    pub fn new() -> Self {
        Self
    }

    /// Reads a model file in any format HiGHS understands (MPS, LP) and
    /// solves it. Used to cross-check our own writers.
    pub fn solve_file(&self, path: &Path, settings: &SolveSettings, relax: bool) -> Result<SolveOutcome, BackendError> {
        let handle = Handle::new()?;
        handle.configure(settings)?;
        let cpath = CString::new(path.to_string_lossy().as_bytes())
            .map_err(|e| BackendError::ModelTranslationError(e.to_string()))?;
        let status = unsafe { Highs_readModel(handle.0, cpath.as_ptr()) };
        if status == kHighsStatusError {
            return Err(BackendError::ModelTranslationError(format!("HiGHS could not read {}", path.display())));
        }
        if relax {
            unsafe { Highs_clearIntegrality(handle.0) };
        }
        let num_cols = unsafe { Highs_getNumCol(handle.0) } as usize;
        let num_rows = unsafe { Highs_getNumRow(handle.0) } as usize;
        let mut session = HighsSession { handle, num_cols, num_rows, is_mip: !relax, basis_io: !relax };
        session.solve()
    }

    pub fn version() -> String {
        unsafe { std::ffi::CStr::from_ptr(Highs_version()) }.to_string_lossy().into_owned()
    }
}

impl Backend for HighsBackend {
    fn name(&self) -> String {
        format!("highs-{}", Self::version())
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_basis_io: true, supports_incumbent_start: true }
    }

    fn open(&self, model: &MilpModel, settings: &SolveSettings, relax: bool) -> Result<Box<dyn Session>, BackendError> {
        let handle = Handle::new()?;
        handle.configure(settings)?;
        let nc = model.num_cols();
        let nr = model.num_rows();
        let starts = to_highs_ints(&model.rows.indptr()[..nr], "row starts")?;
        let index = to_highs_ints(model.rows.indices(), "column indices")?;
        let nnz = checked_int(model.rows.nnz(), "nonzeros")?;
        let is_mip = !relax && model.integer.iter().any(|&b| b);
        let status = unsafe {
            if is_mip {
                let integrality: Vec<c_int> = model
                    .integer
                    .iter()
                    .map(|&b| if b { kHighsVarTypeInteger } else { kHighsVarTypeContinuous })
                    .collect();
                Highs_passMip(
                    handle.0,
                    checked_int(nc, "columns")?,
                    checked_int(nr, "rows")?,
                    nnz,
                    kHighsMatrixFormatRowwise,
                    kHighsObjSenseMinimize,
                    model.objective_offset,
                    model.cost.as_ptr(),
                    model.col_lower.as_ptr(),
                    model.col_upper.as_ptr(),
                    model.row_lower.as_ptr(),
                    model.row_upper.as_ptr(),
                    starts.as_ptr(),
                    index.as_ptr(),
                    model.rows.values().as_ptr(),
                    integrality.as_ptr(),
                )
            } else {
                Highs_passLp(
                    handle.0,
                    checked_int(nc, "columns")?,
                    checked_int(nr, "rows")?,
                    nnz,
                    kHighsMatrixFormatRowwise,
                    kHighsObjSenseMinimize,
                    model.objective_offset,
                    model.cost.as_ptr(),
                    model.col_lower.as_ptr(),
                    model.col_upper.as_ptr(),
                    model.row_lower.as_ptr(),
                    model.row_upper.as_ptr(),
                    starts.as_ptr(),
                    index.as_ptr(),
                    model.rows.values().as_ptr(),
                )
            }
        };
        if status == kHighsStatusError {
            return Err(BackendError::ModelTranslationError(format!("HiGHS rejected model {}", model.name)));
        }
        let mut session = HighsSession { handle, num_cols: nc, num_rows: nr, is_mip, basis_io: !is_mip };
        if let Some(basis) = &settings.basis {
            if !is_mip {
                session.set_basis(basis)?;
            }
        }
        if let Some(start) = &settings.incumbent {
            if is_mip {
                session.set_start(start)?;
            }
        }
        Ok(Box::new(session))
    }
}

struct Handle(*mut c_void);

// A HiGHS instance has no thread affinity; it is only ever used from one
// thread at a time because sessions are not shared.
unsafe impl Send for Handle {}

impl Handle {
    fn new() -> Result<Self, BackendError> {
        let h = unsafe { Highs_create() };
        if h.is_null() {
            return Err(BackendError::BackendUnavailable("highs".into()));
        }
        Ok(Self(h))
    }

    fn set_bool(&self, name: &str, value: bool) -> Result<(), BackendError> {
        let key = CString::new(name).unwrap();
        check(unsafe { Highs_setBoolOptionValue(self.0, key.as_ptr(), value as c_int) }, name)
    }

    fn set_int(&self, name: &str, value: c_int) -> Result<(), BackendError> {
        let key = CString::new(name).unwrap();
        check(unsafe { Highs_setIntOptionValue(self.0, key.as_ptr(), value) }, name)
    }

    fn set_double(&self, name: &str, value: f64) -> Result<(), BackendError> {
        let key = CString::new(name).unwrap();
        check(unsafe { Highs_setDoubleOptionValue(self.0, key.as_ptr(), value) }, name)
    }

    fn set_string(&self, name: &str, value: &str) -> Result<(), BackendError> {
        let key = CString::new(name).unwrap();
        let val = CString::new(value).unwrap();
        check(unsafe { Highs_setStringOptionValue(self.0, key.as_ptr(), val.as_ptr()) }, name)
    }

    fn configure(&self, s: &SolveSettings) -> Result<(), BackendError> {
        self.set_bool("output_flag", false)?;
        if s.time_limit_s.is_finite() && s.time_limit_s > 0.0 {
            self.set_double("time_limit", s.time_limit_s)?;
        }
        self.set_double("mip_rel_gap", s.rel_gap)?;
        self.set_double("primal_feasibility_tolerance", s.feasibility_tol)?;
        self.set_double("mip_feasibility_tolerance", s.feasibility_tol)?;
        if let Some(t) = s.threads {
            self.set_int("threads", t as c_int)?;
        }
        Ok(())
    }

    fn int_info(&self, name: &str) -> Option<i64> {
        let key = CString::new(name).unwrap();
        let mut v: c_int = 0;
        let ok = unsafe { Highs_getIntInfoValue(self.0, key.as_ptr(), &mut v) };
        (ok != kHighsStatusError).then_some(v as i64)
    }

    fn int64_info(&self, name: &str) -> Option<i64> {
        let key = CString::new(name).unwrap();
        let mut v: i64 = 0;
        let ok = unsafe { Highs_getInt64InfoValue(self.0, key.as_ptr(), &mut v) };
        (ok != kHighsStatusError).then_some(v)
    }

    fn double_info(&self, name: &str) -> Option<f64> {
        let key = CString::new(name).unwrap();
        let mut v = 0.0;
        let ok = unsafe { Highs_getDoubleInfoValue(self.0, key.as_ptr(), &mut v) };
        (ok != kHighsStatusError).then_some(v)
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { Highs_destroy(self.0) };
    }
}

struct HighsSession {
    handle: Handle,
    num_cols: usize,
    num_rows: usize,
    is_mip: bool,
    basis_io: bool,
}

impl HighsSession {
    fn run(&mut self) -> Result<c_int, BackendError> {
        let status = unsafe { Highs_run(self.handle.0) };
        if status == kHighsStatusError {
            let ms = unsafe { Highs_getModelStatus(self.handle.0) };
            // An error return still carries a usable status for these cases.
            if !matches!(ms, kHighsModelStatusInfeasible | kHighsModelStatusUnbounded | kHighsModelStatusUnboundedOrInfeasible) {
                return Err(BackendError::Call(format!("Highs_run failed with model status {ms}")));
            }
        }
        Ok(unsafe { Highs_getModelStatus(self.handle.0) })
    }

    fn read_basis(&self) -> Option<Basis> {
        let mut cols = vec![0 as c_int; self.num_cols];
        let mut rows = vec![0 as c_int; self.num_rows];
        let ok = unsafe { Highs_getBasis(self.handle.0, cols.as_mut_ptr(), rows.as_mut_ptr()) };
        if ok == kHighsStatusError {
            return None;
        }
        Some(Basis { cols: cols.into_iter().map(from_status).collect(), rows: rows.into_iter().map(from_status).collect() })
    }
}

impl Session for HighsSession {
    fn num_rows(&self) -> usize {
        self.num_rows
    }

    fn num_cols(&self) -> usize {
        self.num_cols
    }

    fn add_rows(&mut self, rows: &RowBlock) -> Result<(), BackendError> {
        if rows.is_empty() {
            return Ok(());
        }
        let m = &rows.matrix;
        let starts = to_highs_ints(&m.indptr()[..m.nrows()], "row starts")?;
        let index = to_highs_ints(m.indices(), "column indices")?;
        let status = unsafe {
            Highs_addRows(
                self.handle.0,
                checked_int(rows.len(), "rows")?,
                rows.lower.as_ptr(),
                rows.upper.as_ptr(),
                checked_int(m.nnz(), "nonzeros")?,
                starts.as_ptr(),
                index.as_ptr(),
                m.values().as_ptr(),
            )
        };
        check(status, "addRows")?;
        self.num_rows += rows.len();
        Ok(())
    }

    fn solve(&mut self) -> Result<SolveOutcome, BackendError> {
        unsafe { Highs_zeroAllClocks(self.handle.0) };
        let started = Instant::now();
        let mut ms = self.run()?;
        if ms == kHighsModelStatusUnboundedOrInfeasible {
            // Presolve cannot tell the two apart; the plain solver can.
            self.handle.set_string("presolve", "off")?;
            let rerun = self.run();
            self.handle.set_string("presolve", "choose")?;
            ms = rerun?;
        }
        let wall = started.elapsed().as_secs_f64();
        let h = &self.handle;
        let stats = SolveStats {
            simplex_iterations: h.int_info("simplex_iteration_count").unwrap_or(0).max(0) as u64,
            nodes: if self.is_mip { h.int64_info("mip_node_count").unwrap_or(0).max(0) as u64 } else { 0 },
            wall_time_s: wall,
        };
        let has_primal = h.int_info("primal_solution_status") == Some(kHighsSolutionStatusFeasible as i64);
        let status = match ms {
            kHighsModelStatusOptimal | kHighsModelStatusModelEmpty => SolveStatus::Optimal,
            kHighsModelStatusInfeasible => SolveStatus::Infeasible,
            kHighsModelStatusUnbounded | kHighsModelStatusUnboundedOrInfeasible => SolveStatus::Unbounded,
            kHighsModelStatusTimeLimit
            | kHighsModelStatusIterationLimit
            | kHighsModelStatusSolutionLimit
            | kHighsModelStatusInterrupt
            | kHighsModelStatusUnknown => {
                if has_primal {
                    SolveStatus::FeasibleGapped
                } else {
                    SolveStatus::TimeLimit
                }
            }
            _ => SolveStatus::Error,
        };
        let mut outcome = SolveOutcome {
            status,
            primal: Vec::new(),
            objective: f64::NAN,
            best_bound: f64::NAN,
            basis: None,
            stats,
        };
        if status.has_solution() {
            let mut col = vec![0.0; self.num_cols];
            let mut col_dual = vec![0.0; self.num_cols];
            let mut row = vec![0.0; self.num_rows];
            let mut row_dual = vec![0.0; self.num_rows];
            check(
                unsafe { Highs_getSolution(h.0, col.as_mut_ptr(), col_dual.as_mut_ptr(), row.as_mut_ptr(), row_dual.as_mut_ptr()) },
                "getSolution",
            )?;
            outcome.primal = col;
            outcome.objective = unsafe { Highs_getObjectiveValue(h.0) };
            outcome.best_bound = if self.is_mip {
                h.double_info("mip_dual_bound").unwrap_or(outcome.objective)
            } else {
                outcome.objective
            };
            if self.basis_io && ms == kHighsModelStatusOptimal {
                outcome.basis = self.read_basis();
            }
        } else if self.is_mip {
            outcome.best_bound = h.double_info("mip_dual_bound").unwrap_or(f64::NAN);
        }
        Ok(outcome)
    }

    fn set_basis(&mut self, basis: &Basis) -> Result<(), BackendError> {
        if basis.cols.len() != self.num_cols || basis.rows.len() > self.num_rows {
            return Err(BackendError::Call(format!(
                "basis shape {}x{} does not fit model {}x{}",
                basis.rows.len(),
                basis.cols.len(),
                self.num_rows,
                self.num_cols
            )));
        }
        let basis = basis.extended_to(self.num_rows);
        let cols: Vec<c_int> = basis.cols.iter().map(|&s| to_status(s)).collect();
        let rows: Vec<c_int> = basis.rows.iter().map(|&s| to_status(s)).collect();
        check(unsafe { Highs_setBasis(self.handle.0, cols.as_ptr(), rows.as_ptr()) }, "setBasis")
    }

    fn set_start(&mut self, values: &[f64]) -> Result<(), BackendError> {
        if values.len() != self.num_cols {
            return Err(BackendError::Call(format!("start has {} values, model has {} columns", values.len(), self.num_cols)));
        }
        check(
            unsafe { Highs_setSolution(self.handle.0, values.as_ptr(), ptr::null(), ptr::null(), ptr::null()) },
            "setSolution",
        )
    }

    fn reset_warm_start(&mut self) -> Result<(), BackendError> {
        check(unsafe { Highs_clearSolver(self.handle.0) }, "clearSolver")
    }
}

fn check(status: c_int, what: &str) -> Result<(), BackendError> {
    if status == kHighsStatusError {
        Err(BackendError::Call(format!("HiGHS {what} returned an error")))
    } else {
        Ok(())
    }
}

fn checked_int(v: usize, what: &str) -> Result<c_int, BackendError> {
    c_int::try_from(v).map_err(|_| BackendError::ModelTranslationError(format!("too many {what} for HiGHS: {v}")))
}

fn to_highs_ints(v: &[usize], what: &str) -> Result<Vec<c_int>, BackendError> {
    v.iter().map(|&x| checked_int(x, what)).collect()
}

fn from_status(s: c_int) -> BasisStatus {
    match s {
        kHighsBasisStatusLower => BasisStatus::Lower,
        kHighsBasisStatusBasic => BasisStatus::Basic,
        kHighsBasisStatusUpper => BasisStatus::Upper,
        kHighsBasisStatusZero => BasisStatus::Zero,
        _ => BasisStatus::Nonbasic,
    }
}

fn to_status(s: BasisStatus) -> c_int {
    match s {
        BasisStatus::Lower => kHighsBasisStatusLower,
        BasisStatus::Basic => kHighsBasisStatusBasic,
        BasisStatus::Upper => kHighsBasisStatusUpper,
        BasisStatus::Zero => kHighsBasisStatusZero,
        BasisStatus::Nonbasic => kHighsBasisStatusNonbasic,
    }
}

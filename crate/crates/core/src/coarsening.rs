//! Semi-coarse and coarse models.
//!
//! The semi-coarse model replaces each group of δ second-stage variables by
//! a selection over δ-profiles; its columns are the first-stage `y` followed
//! by the profile weights `x̄`, `v̄`, `w̄`. The coarse model keeps the same
//! columns but sums the coupling rows in groups, plus an extension set of
//! fine rows re-added individually.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{MilpError, TwoStageMilp, VariablePartition};
use crate::model::{MilpModel, ModelBuilder, RowBlock};
use crate::sparse::{CsrBuilder, CsrMatrix};

const PROFILE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CoarseningError {
    #[error("profile length {profiles} differs from group size {partition}")]
    DeltaMismatch { profiles: usize, partition: usize },
    #[error("invalid {family} profile {index}: {detail}")]
    InvalidProfile { family: &'static str, index: usize, detail: String },
    #[error("row group size {group} does not divide {rows} coupling rows")]
    IndivisibleRows { rows: usize, group: usize },
    #[error("row groups must be ordered, disjoint and cover all {rows} coupling rows")]
    BadGroups { rows: usize },
    #[error("fine row {index} out of range ({rows} coupling rows)")]
    BadRowIndex { index: usize, rows: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// δ-profiles: K on/off profiles, `I_k` operating profiles attached to each
/// on/off profile, and J free profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileLibrary {
    pub delta: usize,
    pub onoff: Vec<Vec<f64>>,
    pub operating: Vec<Vec<Vec<f64>>>,
    pub free: Vec<Vec<f64>>,
}

impl ProfileLibrary {
    pub fn new(delta: usize, onoff: Vec<Vec<f64>>, operating: Vec<Vec<Vec<f64>>>, free: Vec<Vec<f64>>) -> Self {
        Self { delta, onoff, operating, free }
    }

    pub fn num_onoff(&self) -> usize {
        self.onoff.len()
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Prefix sums of `I_k`; length K + 1.
    pub fn operating_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.operating.len() + 1);
        out.push(0);
        for ops in &self.operating {
            out.push(out.last().unwrap() + ops.len());
        }
        out
    }

    pub fn total_operating(&self) -> usize {
        self.operating.iter().map(Vec::len).sum()
    }

    /// Checks binarity of X̄, `L_i X̄_k ≤ V̄_jk ≤ U_i X̄_k` for every group i
    /// and W̄ ≥ 0. An on/off profile without operating profiles stands for
    /// a zero operating profile, which must itself be in bounds.
    pub fn validate(&self, partition: &VariablePartition, lower: &[f64], upper: &[f64]) -> Result<(), CoarseningError> {
        if self.delta != partition.delta {
            return Err(CoarseningError::DeltaMismatch { profiles: self.delta, partition: partition.delta });
        }
        if lower.len() != partition.len() || upper.len() != partition.len() {
            return Err(CoarseningError::DimensionMismatch("bounds do not match the partition".into()));
        }
        if self.operating.len() != self.onoff.len() {
            return Err(CoarseningError::DimensionMismatch(format!(
                "{} on/off profiles but {} operating lists",
                self.onoff.len(),
                self.operating.len()
            )));
        }
        let bad = |family, index, detail: String| CoarseningError::InvalidProfile { family, index, detail };
        let d = self.delta;
        for (k, x) in self.onoff.iter().enumerate() {
            if x.len() != d {
                return Err(bad("on/off", k, format!("length {} instead of {d}", x.len())));
            }
            if let Some(h) = x.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(bad("on/off", k, format!("element {h} is {}, not binary", x[h])));
            }
            let zero = vec![0.0; d];
            let ops: Vec<&Vec<f64>> = if self.operating[k].is_empty() { vec![&zero] } else { self.operating[k].iter().collect() };
            for (j, v) in ops.into_iter().enumerate() {
                if v.len() != d {
                    return Err(bad("operating", k, format!("entry {j} has length {}", v.len())));
                }
                for i in 0..partition.groups {
                    for h in 0..d {
                        let (lo, up) = (lower[i * d + h] * x[h], upper[i * d + h] * x[h]);
                        if !v[h].is_finite() || v[h] < lo - PROFILE_TOL || v[h] > up + PROFILE_TOL {
                            return Err(bad(
                                "operating",
                                k,
                                format!("entry {j} element {h} = {} outside [{lo}, {up}] in group {i}", v[h]),
                            ));
                        }
                    }
                }
            }
        }
        for (j, w) in self.free.iter().enumerate() {
            if w.len() != d {
                return Err(bad("free", j, format!("length {} instead of {d}", w.len())));
            }
            if let Some(h) = w.iter().position(|&v| !v.is_finite() || v < 0.0) {
                return Err(bad("free", j, format!("element {h} is {}", w[h])));
            }
        }
        Ok(())
    }

    /// Merges duplicate on/off profiles (pooling their operating profiles)
    /// and drops duplicate operating and free profiles. Returns the number
    /// of profiles removed.
    pub fn deduplicate(&mut self) -> usize {
        let before = self.onoff.len() + self.total_operating() + self.free.len();
        let mut onoff: Vec<Vec<f64>> = Vec::new();
        let mut operating: Vec<Vec<Vec<f64>>> = Vec::new();
        for (x, ops) in self.onoff.drain(..).zip(self.operating.drain(..)) {
            match onoff.iter().position(|o| *o == x) {
                Some(k) => operating[k].extend(ops),
                None => {
                    onoff.push(x);
                    operating.push(ops);
                }
            }
        }
        for ops in &mut operating {
            dedup_vectors(ops);
        }
        dedup_vectors(&mut self.free);
        self.onoff = onoff;
        self.operating = operating;
        before - (self.onoff.len() + self.total_operating() + self.free.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LibraryFile { format: LIBRARY_FORMAT.into(), version: 1, library: self.clone() })
            .expect("library serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CoarseningError> {
        let file: LibraryFile =
            serde_json::from_str(text).map_err(|e| CoarseningError::DimensionMismatch(format!("profile library file: {e}")))?;
        if file.format != LIBRARY_FORMAT {
            return Err(CoarseningError::DimensionMismatch(format!("unexpected format tag {:?}", file.format)));
        }
        Ok(file.library)
    }
}

const LIBRARY_FORMAT: &str = "twolevel-profiles";

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    format: String,
    version: u32,
    library: ProfileLibrary,
}

fn dedup_vectors(v: &mut Vec<Vec<f64>>) {
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(v.len());
    for x in v.drain(..) {
        if !kept.contains(&x) {
            kept.push(x);
        }
    }
    *v = kept;
}

/// Column layout of a generic semi-coarse model: `y`, then `x̄(i,k)`, then
/// `v̄(i,k,j)`, then `w̄(i,j)`, each block group-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemiLayout {
    pub m: usize,
    pub groups: usize,
    pub onoff: usize,
    pub operating_offsets: Vec<usize>,
    pub free: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum ColumnOrigin {
    FirstStage { index: usize },
    OnOff { group: usize, profile: usize },
    Operating { group: usize, profile: usize, index: usize },
    Free { group: usize, index: usize },
}

impl SemiLayout {
    pub fn new(m: usize, groups: usize, profiles: &ProfileLibrary) -> Self {
        Self {
            m,
            groups,
            onoff: profiles.num_onoff(),
            operating_offsets: profiles.operating_offsets(),
            free: profiles.num_free(),
        }
    }

    fn per_group_operating(&self) -> usize {
        *self.operating_offsets.last().unwrap_or(&0)
    }

    pub fn num_xbar(&self) -> usize {
        self.groups * self.onoff
    }

    pub fn num_vbar(&self) -> usize {
        self.groups * self.per_group_operating()
    }

    pub fn num_wbar(&self) -> usize {
        self.groups * self.free
    }

    pub fn num_cols(&self) -> usize {
        self.m + self.num_xbar() + self.num_vbar() + self.num_wbar()
    }

    pub fn xbar_index(&self, i: usize, k: usize) -> usize {
        i * self.onoff + k
    }

    pub fn vbar_index(&self, i: usize, k: usize, j: usize) -> usize {
        i * self.per_group_operating() + self.operating_offsets[k] + j
    }

    pub fn wbar_index(&self, i: usize, j: usize) -> usize {
        i * self.free + j
    }

    pub fn xbar_col(&self, idx: usize) -> usize {
        self.m + idx
    }

    pub fn vbar_col(&self, idx: usize) -> usize {
        self.m + self.num_xbar() + idx
    }

    pub fn wbar_col(&self, idx: usize) -> usize {
        self.m + self.num_xbar() + self.num_vbar() + idx
    }

    pub fn origin(&self, col: usize) -> ColumnOrigin {
        if col < self.m {
            return ColumnOrigin::FirstStage { index: col };
        }
        let mut c = col - self.m;
        if c < self.num_xbar() {
            return ColumnOrigin::OnOff { group: c / self.onoff, profile: c % self.onoff };
        }
        c -= self.num_xbar();
        if c < self.num_vbar() {
            let per = self.per_group_operating();
            let (group, r) = (c / per, c % per);
            let profile = self.operating_offsets.partition_point(|&o| o <= r) - 1;
            return ColumnOrigin::Operating { group, profile, index: r - self.operating_offsets[profile] };
        }
        c -= self.num_vbar();
        ColumnOrigin::Free { group: c / self.free, index: c % self.free }
    }

    /// Checks the selection block on a coarse point. Returns the offending
    /// group and a description on failure.
    pub fn check_selection(&self, p: &CoarsePoint, tol: f64) -> Result<(), (usize, String)> {
        for i in 0..self.groups {
            let mut sx = 0.0;
            let mut sv = 0.0;
            for k in 0..self.onoff {
                let x = p.xbar[self.xbar_index(i, k)];
                if (x - x.round()).abs() > tol || x < -tol || x > 1.0 + tol {
                    return Err((i, format!("x̄[{k}] = {x} is not binary")));
                }
                sx += x;
                let count = self.operating_offsets[k + 1] - self.operating_offsets[k];
                let mut svk = 0.0;
                for j in 0..count {
                    let v = p.vbar[self.vbar_index(i, k, j)];
                    if v < -tol || v > 1.0 + tol {
                        return Err((i, format!("v̄[{k},{j}] = {v} outside [0, 1]")));
                    }
                    svk += v;
                }
                if count > 0 && (svk - x).abs() > tol {
                    return Err((i, format!("operating weights of profile {k} sum to {svk}, on/off weight is {x}")));
                }
                sv += svk;
            }
            if sx > 1.0 + tol {
                return Err((i, format!("on/off weights sum to {sx}")));
            }
            if sv > 1.0 + tol {
                return Err((i, format!("operating weights sum to {sv}")));
            }
            let mut sw = 0.0;
            for j in 0..self.free {
                let w = p.wbar[self.wbar_index(i, j)];
                if w < -tol || w > 1.0 + tol {
                    return Err((i, format!("w̄[{j}] = {w} outside [0, 1]")));
                }
                sw += w;
            }
            if sw > 1.0 + tol {
                return Err((i, format!("free weights sum to {sw}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarsePoint {
    pub y: Vec<f64>,
    pub xbar: Vec<f64>,
    pub vbar: Vec<f64>,
    pub wbar: Vec<f64>,
}

impl CoarsePoint {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.y.len() + self.xbar.len() + self.vbar.len() + self.wbar.len());
        for block in [&self.y, &self.xbar, &self.vbar, &self.wbar] {
            out.extend_from_slice(block);
        }
        out
    }

    pub fn from_values(layout: &SemiLayout, values: &[f64]) -> Self {
        let (a, b, c) = (layout.m, layout.m + layout.num_xbar(), layout.m + layout.num_xbar() + layout.num_vbar());
        Self {
            y: values[..a].to_vec(),
            xbar: values[a..b].to_vec(),
            vbar: values[b..c].to_vec(),
            wbar: values[c..layout.num_cols()].to_vec(),
        }
    }
}

/// Aggregated costs and matrices `b̄ c̄ d̄ B̄ C̄ D̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedColumns {
    pub cost_x: Vec<f64>,
    pub cost_v: Vec<f64>,
    pub cost_w: Vec<f64>,
    pub mat_x: CsrMatrix,
    pub mat_v: CsrMatrix,
    pub mat_w: CsrMatrix,
}

/// Computes `M (I_n ⊗ P)` where the columns of `P` (δ×p) are `profiles`.
pub fn kron_columns(mat: &CsrMatrix, delta: usize, profiles: &[&[f64]]) -> CsrMatrix {
    let np = profiles.len();
    let groups = mat.ncols() / delta;
    // Nonzero profile entries per position within a group.
    let by_pos: Vec<Vec<(usize, f64)>> = (0..delta)
        .map(|h| profiles.iter().enumerate().filter(|(_, p)| p[h] != 0.0).map(|(k, p)| (k, p[h])).collect())
        .collect();
    let mut builder = CsrBuilder::new(groups * np);
    let mut entries = Vec::new();
    for r in 0..mat.nrows() {
        entries.clear();
        for (c, val) in mat.row(r) {
            let (i, h) = (c / delta, c % delta);
            entries.extend(by_pos[h].iter().map(|&(k, p)| (i * np + k, val * p)));
        }
        builder.push_row(entries.drain(..));
    }
    builder.finish()
}

/// Computes `((I_n ⊗ P)ᵀ c)`.
pub fn kron_cost(cost: &[f64], delta: usize, profiles: &[&[f64]]) -> Vec<f64> {
    let groups = cost.len() / delta;
    let mut out = Vec::with_capacity(groups * profiles.len());
    for i in 0..groups {
        let c = &cost[i * delta..(i + 1) * delta];
        out.extend(profiles.iter().map(|p| c.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<f64>()));
    }
    out
}

pub fn aggregate_columns(
    model: &TwoStageMilp,
    partition: &VariablePartition,
    profiles: &ProfileLibrary,
) -> Result<AggregatedColumns, CoarseningError> {
    if profiles.delta != partition.delta {
        return Err(CoarseningError::DeltaMismatch { profiles: profiles.delta, partition: partition.delta });
    }
    if partition.len() != model.num_second_stage() {
        return Err(CoarseningError::DimensionMismatch(format!(
            "partition covers {} indices, model has {}",
            partition.len(),
            model.num_second_stage()
        )));
    }
    let d = partition.delta;
    let x: Vec<&[f64]> = profiles.onoff.iter().map(Vec::as_slice).collect();
    let v: Vec<&[f64]> = profiles.operating.iter().flatten().map(Vec::as_slice).collect();
    let w: Vec<&[f64]> = profiles.free.iter().map(Vec::as_slice).collect();
    Ok(AggregatedColumns {
        cost_x: kron_cost(&model.cost_x, d, &x),
        cost_v: kron_cost(&model.cost_v, d, &v),
        cost_w: kron_cost(&model.cost_w, d, &w),
        mat_x: kron_columns(&model.mat_x, d, &x),
        mat_v: kron_columns(&model.mat_v, d, &v),
        mat_w: kron_columns(&model.mat_w, d, &w),
    })
}

/// A MILP split into coupling rows `coupling · z ≤ coupling_rhs`, which the
/// coarse model aggregates, and everything else (`base`), which it keeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiCoarseModel {
    /// Columns, objective and the rows kept verbatim in the coarse model.
    pub base: MilpModel,
    pub coupling: CsrMatrix,
    pub coupling_rhs: Vec<f64>,
    #[serde(default)]
    pub coupling_names: Vec<String>,
    /// Preferred aggregation groups over the coupling rows; empty when the
    /// caller is expected to choose a uniform group size.
    #[serde(default)]
    pub natural_groups: Vec<Range<usize>>,
    pub layout: Option<SemiLayout>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SemiOptions {
    /// Use `Σ_k x̄_ik = 1` instead of `≤ 1`.
    pub force_selection: bool,
}

impl SemiCoarseModel {
    pub fn from_parts(
        base: MilpModel,
        coupling: CsrMatrix,
        coupling_rhs: Vec<f64>,
        natural_groups: Vec<Range<usize>>,
    ) -> Result<Self, CoarseningError> {
        if coupling.ncols() != base.num_cols() || coupling.nrows() != coupling_rhs.len() {
            return Err(CoarseningError::DimensionMismatch(format!(
                "coupling block is {}x{} with {} right-hand sides; model has {} columns",
                coupling.nrows(),
                coupling.ncols(),
                coupling_rhs.len(),
                base.num_cols()
            )));
        }
        if !natural_groups.is_empty() {
            check_groups(&natural_groups, coupling.nrows())?;
        }
        Ok(Self { base, coupling, coupling_rhs, coupling_names: Vec::new(), natural_groups, layout: None })
    }

    pub fn num_cols(&self) -> usize {
        self.base.num_cols()
    }

    pub fn num_coupling_rows(&self) -> usize {
        self.coupling_rhs.len()
    }

    pub fn coupling_name(&self, r: usize) -> String {
        self.coupling_names.get(r).cloned().unwrap_or_else(|| format!("F{r}"))
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.base.objective(values)
    }

    /// Full MILP: coupling rows first, then base rows.
    pub fn to_milp(&self) -> MilpModel {
        let mut m = self.base.clone();
        m.rows = CsrMatrix::vstack(&[&self.coupling, &self.base.rows]);
        m.row_lower = vec![f64::NEG_INFINITY; self.num_coupling_rows()];
        m.row_lower.extend_from_slice(&self.base.row_lower);
        m.row_upper = self.coupling_rhs.clone();
        m.row_upper.extend_from_slice(&self.base.row_upper);
        if !m.row_names.is_empty() {
            let mut names: Vec<String> = (0..self.num_coupling_rows()).map(|r| self.coupling_name(r)).collect();
            names.extend(self.base.row_names.iter().cloned());
            m.row_names = names;
        }
        m
    }

    /// `(row, violation)` for every coupling row with residual above `tol`,
    /// sorted by violation descending then row ascending.
    pub fn violated_rows(&self, values: &[f64], tol: f64) -> Result<Vec<(usize, f64)>, CoarseningError> {
        if values.len() != self.num_cols() {
            return Err(CoarseningError::DimensionMismatch(format!(
                "point has {} values, model has {} columns",
                values.len(),
                self.num_cols()
            )));
        }
        let mut out: Vec<(usize, f64)> = (0..self.num_coupling_rows())
            .filter_map(|r| {
                let viol = self.coupling.row_dot(r, values) - self.coupling_rhs[r];
                (viol > tol).then_some((r, viol))
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(out)
    }

    pub fn rows_block(&self, rows: &[usize]) -> RowBlock {
        RowBlock {
            matrix: self.coupling.select_rows(rows),
            lower: vec![f64::NEG_INFINITY; rows.len()],
            upper: rows.iter().map(|&r| self.coupling_rhs[r]).collect(),
        }
    }

    /// Column provenance for the generic layout, one entry per column.
    pub fn provenance_json(&self) -> String {
        let columns: Vec<ColumnOrigin> = match &self.layout {
            Some(l) => (0..l.num_cols()).map(|c| l.origin(c)).collect(),
            None => Vec::new(),
        };
        serde_json::to_string_pretty(&serde_json::json!({
            "coupling_rows": self.num_coupling_rows(),
            "base_rows": self.base.num_rows(),
            "columns": columns,
            "col_names": self.base.col_names,
        }))
        .expect("provenance serialises")
    }
}

pub fn build_semi_coarse(
    model: &TwoStageMilp,
    partition: &VariablePartition,
    profiles: &ProfileLibrary,
    options: SemiOptions,
) -> Result<SemiCoarseModel, CoarseningError> {
    model.validate()?;
    let mut profiles = profiles.clone();
    let removed = profiles.deduplicate();
    if removed > 0 {
        log::warn!("dropped {removed} duplicate profiles");
    }
    profiles.validate(partition, &model.lower, &model.upper)?;
    let agg = aggregate_columns(model, partition, &profiles)?;
    let layout = SemiLayout::new(model.num_first_stage(), partition.groups, &profiles);

    let mut b = ModelBuilder::new("semi-coarse", false);
    for &a in &model.cost_y {
        b.add_col(String::new, a, 0.0, 1.0, true);
    }
    for &c in &agg.cost_x {
        b.add_col(String::new, c, 0.0, 1.0, true);
    }
    for &c in agg.cost_v.iter().chain(&agg.cost_w) {
        b.add_col(String::new, c, 0.0, 1.0, false);
    }

    let sel_lower = if options.force_selection { 1.0 } else { f64::NEG_INFINITY };
    for i in 0..partition.groups {
        let xs: Vec<(usize, f64)> =
            (0..layout.onoff).map(|k| (layout.xbar_col(layout.xbar_index(i, k)), 1.0)).collect();
        if !xs.is_empty() {
            b.add_row(String::new, xs, sel_lower, 1.0);
        }
        let mut all_v = Vec::new();
        for k in 0..layout.onoff {
            let count = layout.operating_offsets[k + 1] - layout.operating_offsets[k];
            if count == 0 {
                continue;
            }
            let mut row: Vec<(usize, f64)> =
                (0..count).map(|j| (layout.vbar_col(layout.vbar_index(i, k, j)), 1.0)).collect();
            all_v.extend(row.iter().copied());
            row.push((layout.xbar_col(layout.xbar_index(i, k)), -1.0));
            b.add_row(String::new, row, 0.0, 0.0);
        }
        if !all_v.is_empty() {
            b.add_row(String::new, all_v, f64::NEG_INFINITY, 1.0);
        }
        let ws: Vec<(usize, f64)> = (0..layout.free).map(|j| (layout.wbar_col(layout.wbar_index(i, j)), 1.0)).collect();
        if !ws.is_empty() {
            b.add_row(String::new, ws, f64::NEG_INFINITY, 1.0);
        }
    }
    let base = b.finish();
    let ncols = layout.num_cols();
    let coupling = CsrMatrix::hstack(&[&model.mat_y, &agg.mat_x, &agg.mat_v, &agg.mat_w]);
    debug_assert_eq!(coupling.ncols(), ncols);
    let mut semi = SemiCoarseModel::from_parts(base, coupling, model.rhs.clone(), Vec::new())?;
    semi.layout = Some(layout);
    Ok(semi)
}

fn check_groups(groups: &[Range<usize>], rows: usize) -> Result<(), CoarseningError> {
    let mut next = 0;
    for g in groups {
        if g.start != next || g.end <= g.start {
            return Err(CoarseningError::BadGroups { rows });
        }
        next = g.end;
    }
    if next != rows {
        return Err(CoarseningError::BadGroups { rows });
    }
    Ok(())
}

/// Row-aggregated semi-coarse model with an extension set of fine rows.
///
/// Row order when lowered: aggregated rows, base rows, then extension rows
/// in insertion order. Appending the rows returned by
/// [`CoarseModel::add_fine_rows`] to a live solver session therefore keeps
/// the session and [`CoarseModel::to_milp`] in step.
#[derive(Debug, Clone)]
pub struct CoarseModel {
    semi: Arc<SemiCoarseModel>,
    groups: Vec<Range<usize>>,
    aggregated: CsrMatrix,
    aggregated_rhs: Vec<f64>,
    extension: Vec<usize>,
    in_extension: HashSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseProvenance {
    /// Aggregated row g is the sum of fine coupling rows `groups[g]`.
    pub groups: Vec<(usize, usize)>,
    pub base_rows: usize,
    /// Fine coupling rows re-added, in insertion order.
    pub extension: Vec<usize>,
}

impl CoarseModel {
    /// Aggregates consecutive groups of `delta_r` coupling rows.
    pub fn build(semi: Arc<SemiCoarseModel>, delta_r: usize) -> Result<Self, CoarseningError> {
        let rows = semi.num_coupling_rows();
        if delta_r == 0 || rows % delta_r != 0 {
            return Err(CoarseningError::IndivisibleRows { rows, group: delta_r });
        }
        let groups = (0..rows / delta_r).map(|g| g * delta_r..(g + 1) * delta_r).collect();
        Self::with_groups(semi, groups)
    }

    /// Uses the model's natural groups, or singletons when it has none.
    pub fn build_natural(semi: Arc<SemiCoarseModel>) -> Result<Self, CoarseningError> {
        let groups = if semi.natural_groups.is_empty() {
            (0..semi.num_coupling_rows()).map(|r| r..r + 1).collect()
        } else {
            semi.natural_groups.clone()
        };
        Self::with_groups(semi, groups)
    }

    pub fn with_groups(semi: Arc<SemiCoarseModel>, groups: Vec<Range<usize>>) -> Result<Self, CoarseningError> {
        check_groups(&groups, semi.num_coupling_rows())?;
        let aggregated = semi.coupling.sum_row_groups(&groups);
        let aggregated_rhs = groups.iter().map(|g| semi.coupling_rhs[g.clone()].iter().sum()).collect();
        Ok(Self { semi, groups, aggregated, aggregated_rhs, extension: Vec::new(), in_extension: HashSet::new() })
    }

    pub fn semi(&self) -> &Arc<SemiCoarseModel> {
        &self.semi
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub fn aggregated(&self) -> (&CsrMatrix, &[f64]) {
        (&self.aggregated, &self.aggregated_rhs)
    }

    pub fn extension(&self) -> &[usize] {
        &self.extension
    }

    pub fn num_rows(&self) -> usize {
        self.groups.len() + self.semi.base.num_rows() + self.extension.len()
    }

    /// Adds fine coupling rows. Rows already present are ignored. Returns
    /// the rows actually added, in the order given.
    pub fn add_fine_rows(&mut self, rows: &[usize]) -> Result<Vec<usize>, CoarseningError> {
        let total = self.semi.num_coupling_rows();
        if let Some(&index) = rows.iter().find(|&&r| r >= total) {
            return Err(CoarseningError::BadRowIndex { index, rows: total });
        }
        let mut added = Vec::new();
        for &r in rows {
            if self.in_extension.insert(r) {
                self.extension.push(r);
                added.push(r);
            }
        }
        Ok(added)
    }

    pub fn to_milp(&self) -> MilpModel {
        let semi = &self.semi;
        let ext = semi.coupling.select_rows(&self.extension);
        let mut m = semi.base.clone();
        m.name = "coarse".into();
        m.rows = CsrMatrix::vstack(&[&self.aggregated, &semi.base.rows, &ext]);
        let mut lower = vec![f64::NEG_INFINITY; self.groups.len()];
        lower.extend_from_slice(&semi.base.row_lower);
        lower.extend(std::iter::repeat_n(f64::NEG_INFINITY, self.extension.len()));
        let mut upper = self.aggregated_rhs.clone();
        upper.extend_from_slice(&semi.base.row_upper);
        upper.extend(self.extension.iter().map(|&r| semi.coupling_rhs[r]));
        m.row_lower = lower;
        m.row_upper = upper;
        if !m.row_names.is_empty() {
            let mut names: Vec<String> =
                self.groups.iter().map(|g| format!("sum_{}_{}", semi.coupling_name(g.start), g.len())).collect();
            names.extend(semi.base.row_names.iter().cloned());
            names.extend(self.extension.iter().map(|&r| semi.coupling_name(r)));
            m.row_names = names;
        }
        m
    }

    pub fn provenance(&self) -> CoarseProvenance {
        CoarseProvenance {
            groups: self.groups.iter().map(|g| (g.start, g.end)).collect(),
            base_rows: self.semi.base.num_rows(),
            extension: self.extension.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_aggregation_direct_product() {
        let b = CsrMatrix::from_dense(&[vec![3.0, 5.0]], 2);
        let x = [vec![1.0, 0.0], vec![1.0, 1.0]];
        let profiles: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        assert_eq!(kron_columns(&b, 2, &profiles).to_dense(), vec![vec![3.0, 8.0]]);
        assert_eq!(kron_cost(&[1.0, 1.0], 2, &[&[1.0, 1.0]]), vec![2.0]);
    }

    #[test]
    fn layout_origins_round_trip() {
        let lib = ProfileLibrary::new(
            2,
            vec![vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 1.0], vec![0.5, 0.5]]],
            vec![vec![1.0, 0.0]],
        );
        let l = SemiLayout::new(2, 3, &lib);
        assert_eq!(l.num_cols(), 2 + 6 + 9 + 3);
        assert_eq!(l.origin(l.vbar_col(l.vbar_index(2, 1, 1))), ColumnOrigin::Operating { group: 2, profile: 1, index: 1 });
        assert_eq!(l.origin(l.vbar_col(l.vbar_index(1, 0, 0))), ColumnOrigin::Operating { group: 1, profile: 0, index: 0 });
        assert_eq!(l.origin(l.xbar_col(l.xbar_index(1, 1))), ColumnOrigin::OnOff { group: 1, profile: 1 });
        assert_eq!(l.origin(l.wbar_col(l.wbar_index(2, 0))), ColumnOrigin::Free { group: 2, index: 0 });
        assert_eq!(l.origin(1), ColumnOrigin::FirstStage { index: 1 });
    }

    #[test]
    fn dedup_merges_parents() {
        let mut lib = ProfileLibrary::new(
            1,
            vec![vec![1.0], vec![1.0]],
            vec![vec![vec![2.0]], vec![vec![2.0], vec![3.0]]],
            vec![vec![1.0], vec![1.0]],
        );
        assert_eq!(lib.deduplicate(), 3);
        assert_eq!(lib.onoff, vec![vec![1.0]]);
        assert_eq!(lib.operating, vec![vec![vec![2.0], vec![3.0]]]);
        assert_eq!(lib.free.len(), 1);
    }

    #[test]
    fn profile_bounds_checked_per_group() {
        let part = VariablePartition::new(2, 1).unwrap();
        let lib = ProfileLibrary::new(1, vec![vec![1.0]], vec![vec![vec![2.0]]], vec![]);
        assert!(lib.validate(&part, &[0.0, 0.0], &[3.0, 3.0]).is_ok());
        assert!(matches!(
            lib.validate(&part, &[0.0, 0.0], &[3.0, 1.0]),
            Err(CoarseningError::InvalidProfile { family: "operating", .. })
        ));
        let bad = ProfileLibrary::new(1, vec![vec![0.5]], vec![vec![]], vec![]);
        assert!(bad.validate(&part, &[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    fn semi_with_rows(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Arc<SemiCoarseModel> {
        let ncols = rows[0].len();
        let mut b = ModelBuilder::new("t", false);
        for _ in 0..ncols {
            b.add_col(String::new, 0.0, 0.0, 1.0, false);
        }
        Arc::new(SemiCoarseModel::from_parts(b.finish(), CsrMatrix::from_dense(&rows, ncols), rhs, Vec::new()).unwrap())
    }

    #[test]
    fn row_sums() {
        let semi = semi_with_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![1.0, 2.0]);
        let c = CoarseModel::build(semi, 2).unwrap();
        assert_eq!(c.aggregated().0.to_dense(), vec![vec![4.0, 6.0]]);
        let semi = semi_with_rows(vec![vec![1.0]; 4], vec![1.0, 2.0, 3.0, 4.0]);
        let c = CoarseModel::build(semi.clone(), 2).unwrap();
        assert_eq!(c.aggregated().1, &[3.0, 7.0]);
        assert!(matches!(CoarseModel::build(semi, 3), Err(CoarseningError::IndivisibleRows { rows: 4, group: 3 })));
    }

    #[test]
    fn extension_is_idempotent() {
        let semi = semi_with_rows(vec![vec![1.0]; 6], vec![0.0; 6]);
        let mut c = CoarseModel::build(semi, 3).unwrap();
        assert!(c.add_fine_rows(&[]).unwrap().is_empty());
        assert_eq!(c.to_milp().num_rows(), 2);
        assert_eq!(c.add_fine_rows(&[5]).unwrap(), vec![5]);
        assert!(c.add_fine_rows(&[5]).unwrap().is_empty());
        assert_eq!(c.extension(), &[5]);
        assert_eq!(c.to_milp().num_rows(), 3);
        assert_eq!(c.add_fine_rows(&[6]), Err(CoarseningError::BadRowIndex { index: 6, rows: 6 }));
    }

    #[test]
    fn violated_rows_sorted() {
        let semi = semi_with_rows(vec![vec![1.0], vec![2.0], vec![2.0], vec![0.5]], vec![0.0; 4]);
        let v = semi.violated_rows(&[1.0], 1e-6).unwrap();
        assert_eq!(v.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2, 0, 3]);
    }
}

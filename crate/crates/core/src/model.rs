//! General sparse MILP in minimisation form: `min cᵀx + offset` subject to
//! `row_lower ≤ Ax ≤ row_upper` and column bounds, with an integrality flag
//! per column. Every structured model in the crate lowers to this type before
//! it reaches a solver backend.

use serde::{Deserialize, Serialize};

use crate::sparse::{CsrBuilder, CsrMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub objective_offset: f64,
    pub cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub rows: CsrMatrix,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    /// Optional; empty means generated names (`C<i>`, `R<i>`).
    #[serde(default)]
    pub col_names: Vec<String>,
    #[serde(default)]
    pub row_names: Vec<String>,
}

/// Counts reported for model-size tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ModelSize {
    pub binary: usize,
    pub integer: usize,
    pub continuous: usize,
    pub constraints: usize,
    pub nonzeros: usize,
}

impl MilpModel {
    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn size(&self) -> ModelSize {
        let mut size = ModelSize {
            constraints: self.num_rows(),
            nonzeros: self.rows.nnz(),
            ..Default::default()
        };
        for j in 0..self.num_cols() {
            if !self.integer[j] {
                size.continuous += 1;
            } else if self.col_lower[j] >= 0.0 && self.col_upper[j] <= 1.0 {
                size.binary += 1;
            } else {
                size.integer += 1;
            }
        }
        size
    }

    pub fn col_name(&self, j: usize) -> String {
        self.col_names.get(j).cloned().unwrap_or_else(|| format!("C{j}"))
    }

    pub fn row_name(&self, i: usize) -> String {
        self.row_names.get(i).cloned().unwrap_or_else(|| format!("R{i}"))
    }

    /// Largest bound or row violation of `x`, ignoring integrality.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_cols() {
            worst = worst.max(self.col_lower[j] - x[j]).max(x[j] - self.col_upper[j]);
        }
        for i in 0..self.num_rows() {
            let a = self.rows.row_dot(i, x);
            worst = worst.max(self.row_lower[i] - a).max(a - self.row_upper[i]);
        }
        worst
    }

    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.integer
            .iter()
            .zip(x)
            .filter(|(int, _)| **int)
            .map(|(_, v)| (v - v.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Copy with every integrality flag cleared.
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        m.integer.iter_mut().for_each(|f| *f = false);
        m
    }
}

/// A block of rows to append to an existing model.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBlock {
    pub matrix: CsrMatrix,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RowBlock {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

/// Accumulates columns and rows with names, then produces a [`MilpModel`].
/// Used by the structured builders.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    name: String,
    cost: Vec<f64>,
    col_lower: Vec<f64>,
    col_upper: Vec<f64>,
    integer: Vec<bool>,
    col_names: Vec<String>,
    keep_names: bool,
    row_ptr: Vec<usize>,
    entries: Vec<(usize, f64)>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    row_names: Vec<String>,
}

impl ModelBuilder {
    pub fn new(name: impl Into<String>, keep_names: bool) -> Self {
        Self {
            name: name.into(),
            cost: Vec::new(),
            col_lower: Vec::new(),
            col_upper: Vec::new(),
            integer: Vec::new(),
            col_names: Vec::new(),
            keep_names,
            row_ptr: vec![0],
            entries: Vec::new(),
            row_lower: Vec::new(),
            row_upper: Vec::new(),
            row_names: Vec::new(),
        }
    }

    pub fn add_col(&mut self, name: impl FnOnce() -> String, cost: f64, lower: f64, upper: f64, integer: bool) -> usize {
        self.cost.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.integer.push(integer);
        if self.keep_names {
            self.col_names.push(name());
        }
        self.cost.len() - 1
    }

    pub fn add_cost(&mut self, col: usize, cost: f64) {
        self.cost[col] += cost;
    }

    pub fn add_row(&mut self, name: impl FnOnce() -> String, entries: impl IntoIterator<Item = (usize, f64)>, lower: f64, upper: f64) -> usize {
        self.entries.extend(entries);
        self.row_ptr.push(self.entries.len());
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        if self.keep_names {
            self.row_names.push(name());
        }
        self.row_lower.len() - 1
    }

    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn finish(self) -> MilpModel {
        let mut builder = CsrBuilder::with_capacity(self.cost.len(), self.row_lower.len(), self.entries.len());
        for w in self.row_ptr.windows(2) {
            builder.push_row(self.entries[w[0]..w[1]].iter().copied());
        }
        drop(self.entries);
        MilpModel {
            name: self.name,
            objective_offset: 0.0,
            cost: self.cost,
            col_lower: self.col_lower,
            col_upper: self.col_upper,
            integer: self.integer,
            rows: builder.finish(),
            row_lower: self.row_lower,
            row_upper: self.row_upper,
            col_names: self.col_names,
            row_names: self.row_names,
        }
    }
}

pub mod mps {
    //! Free-format MPS reader and writer.
    //!
    //! Bounds are always written explicitly so integer columns never pick up
    //! a reader's implicit binary default. Ranged rows use the `RANGES`
    //! section; the objective offset is stored as the negated RHS of the
    //! objective row.

    use std::collections::HashMap;
    use std::fmt::Write as _;

    use thiserror::Error;

    use super::MilpModel;
    use crate::sparse::CsrMatrix;

    #[derive(Debug, Error)]
    pub enum MpsError {
        #[error("line {line}: {message}")]
        Parse { line: usize, message: String },
        #[error("row {0} has no finite bound")]
        FreeRow(String),
    }

    const OBJ: &str = "OBJ";

    pub fn write(model: &MilpModel) -> Result<String, MpsError> {
        let mut out = String::new();
        let name = if model.name.is_empty() { "MODEL" } else { &model.name };
        let _ = writeln!(out, "NAME {}", name.replace(char::is_whitespace, "_"));
        out.push_str("ROWS\n");
        let _ = writeln!(out, " N {OBJ}");
        let mut kinds = Vec::with_capacity(model.num_rows());
        for i in 0..model.num_rows() {
            let (lo, up) = (model.row_lower[i], model.row_upper[i]);
            let kind = match (lo.is_finite(), up.is_finite()) {
                (true, true) if lo == up => 'E',
                (true, true) => 'L',
                (false, true) => 'L',
                (true, false) => 'G',
                (false, false) => return Err(MpsError::FreeRow(model.row_name(i))),
            };
            kinds.push(kind);
            let _ = writeln!(out, " {kind} {}", model.row_name(i));
        }

        // Column-wise view of the constraint matrix.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_cols()];
        for (r, c, v) in model.rows.triplets() {
            cols[c].push((r, v));
        }
        out.push_str("COLUMNS\n");
        let mut in_int = false;
        for (j, entries) in cols.iter().enumerate() {
            if model.integer[j] != in_int {
                let tag = if model.integer[j] { "INTORG" } else { "INTEND" };
                let _ = writeln!(out, "    MARKER 'MARKER' '{tag}'");
                in_int = model.integer[j];
            }
            let cname = model.col_name(j);
            let _ = writeln!(out, "    {cname} {OBJ} {}", model.cost[j]);
            for &(r, v) in entries {
                let _ = writeln!(out, "    {cname} {} {v}", model.row_name(r));
            }
        }
        if in_int {
            out.push_str("    MARKER 'MARKER' 'INTEND'\n");
        }

        out.push_str("RHS\n");
        if model.objective_offset != 0.0 {
            let _ = writeln!(out, "    RHS {OBJ} {}", -model.objective_offset);
        }
        for i in 0..model.num_rows() {
            let rhs = match kinds[i] {
                'G' => model.row_lower[i],
                _ => model.row_upper[i],
            };
            if rhs != 0.0 {
                let _ = writeln!(out, "    RHS {} {rhs}", model.row_name(i));
            }
        }

        let ranged: Vec<usize> = (0..model.num_rows())
            .filter(|&i| kinds[i] == 'L' && model.row_lower[i].is_finite())
            .collect();
        if !ranged.is_empty() {
            out.push_str("RANGES\n");
            for i in ranged {
                let _ = writeln!(out, "    RNG {} {}", model.row_name(i), model.row_upper[i] - model.row_lower[i]);
            }
        }

        out.push_str("BOUNDS\n");
        for j in 0..model.num_cols() {
            let cname = model.col_name(j);
            let (lo, up) = (model.col_lower[j], model.col_upper[j]);
            if lo == up {
                let _ = writeln!(out, " FX BND {cname} {lo}");
                continue;
            }
            match (lo.is_finite(), up.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " FR BND {cname}");
                }
                (lo_fin, up_fin) => {
                    if lo_fin {
                        let _ = writeln!(out, " LO BND {cname} {lo}");
                    } else {
                        let _ = writeln!(out, " MI BND {cname}");
                    }
                    if up_fin {
                        let _ = writeln!(out, " UP BND {cname} {up}");
                    } else {
                        let _ = writeln!(out, " PL BND {cname}");
                    }
                }
            }
        }
        out.push_str("ENDATA\n");
        Ok(out)
    }

    pub fn read(text: &str) -> Result<MilpModel, MpsError> {
        #[derive(PartialEq, Clone, Copy)]
        enum Section {
            None,
            Rows,
            Columns,
            Rhs,
            Ranges,
            Bounds,
        }
        let err = |line: usize, message: &str| MpsError::Parse { line, message: message.to_string() };

        let mut name = String::new();
        let mut section = Section::None;
        let mut obj_name: Option<String> = None;
        let mut row_index: HashMap<String, usize> = HashMap::new();
        let mut row_kind: Vec<char> = Vec::new();
        let mut row_names: Vec<String> = Vec::new();
        let mut col_index: HashMap<String, usize> = HashMap::new();
        let mut col_names: Vec<String> = Vec::new();
        let mut cost: Vec<f64> = Vec::new();
        let mut integer: Vec<bool> = Vec::new();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        let mut range: Vec<Option<f64>> = Vec::new();
        let mut col_lower: Vec<f64> = Vec::new();
        let mut col_upper: Vec<f64> = Vec::new();
        let mut offset = 0.0;
        let mut in_int = false;

        let parse_f = |line: usize, s: &str| s.parse::<f64>().map_err(|_| err(line, &format!("bad number {s}")));

        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if raw.trim().is_empty() || raw.starts_with('*') {
                continue;
            }
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            if !raw.starts_with(' ') && !raw.starts_with('\t') {
                section = match tokens[0] {
                    "NAME" => {
                        name = tokens.get(1).unwrap_or(&"").to_string();
                        Section::None
                    }
                    "ROWS" => Section::Rows,
                    "COLUMNS" => Section::Columns,
                    "RHS" => Section::Rhs,
                    "RANGES" => Section::Ranges,
                    "BOUNDS" => Section::Bounds,
                    "ENDATA" => break,
                    "OBJSENSE" => return Err(err(lineno, "only minimisation is supported")),
                    other => return Err(err(lineno, &format!("unknown section {other}"))),
                };
                continue;
            }
            match section {
                Section::Rows => {
                    if tokens.len() != 2 {
                        return Err(err(lineno, "expected row kind and name"));
                    }
                    let kind = tokens[0].chars().next().unwrap_or('?');
                    if kind == 'N' {
                        if obj_name.is_none() {
                            obj_name = Some(tokens[1].to_string());
                        }
                        continue;
                    }
                    if !matches!(kind, 'L' | 'G' | 'E') {
                        return Err(err(lineno, "row kind must be N, L, G or E"));
                    }
                    row_index.insert(tokens[1].to_string(), row_kind.len());
                    row_kind.push(kind);
                    row_names.push(tokens[1].to_string());
                    rhs.push(0.0);
                    range.push(None);
                }
                Section::Columns => {
                    if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                        in_int = tokens[2] == "'INTORG'";
                        continue;
                    }
                    if tokens.len() < 3 || tokens.len() % 2 == 0 {
                        return Err(err(lineno, "expected column name and (row, value) pairs"));
                    }
                    let j = *col_index.entry(tokens[0].to_string()).or_insert_with(|| {
                        col_names.push(tokens[0].to_string());
                        cost.push(0.0);
                        integer.push(in_int);
                        col_lower.push(0.0);
                        col_upper.push(f64::INFINITY);
                        col_names.len() - 1
                    });
                    for pair in tokens[1..].chunks(2) {
                        let v = parse_f(lineno, pair[1])?;
                        if Some(pair[0]) == obj_name.as_deref() {
                            cost[j] += v;
                        } else {
                            let r = *row_index.get(pair[0]).ok_or_else(|| err(lineno, "unknown row"))?;
                            triplets.push((r, j, v));
                        }
                    }
                }
                Section::Rhs | Section::Ranges => {
                    let body = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                    for pair in body.chunks(2) {
                        if pair.len() != 2 {
                            return Err(err(lineno, "dangling entry"));
                        }
                        let v = parse_f(lineno, pair[1])?;
                        if section == Section::Rhs && Some(pair[0]) == obj_name.as_deref() {
                            offset = -v;
                            continue;
                        }
                        let r = *row_index.get(pair[0]).ok_or_else(|| err(lineno, "unknown row"))?;
                        if section == Section::Rhs {
                            rhs[r] = v;
                        } else {
                            range[r] = Some(v);
                        }
                    }
                }
                Section::Bounds => {
                    if tokens.len() < 3 {
                        return Err(err(lineno, "short bound line"));
                    }
                    let j = *col_index.get(tokens[2]).ok_or_else(|| err(lineno, "unknown column"))?;
                    let value = tokens.get(3).map(|s| parse_f(lineno, s)).transpose()?;
                    let need = |v: Option<f64>| v.ok_or_else(|| err(lineno, "bound needs a value"));
                    match tokens[0] {
                        "LO" => col_lower[j] = need(value)?,
                        "UP" => col_upper[j] = need(value)?,
                        "FX" => {
                            let v = need(value)?;
                            col_lower[j] = v;
                            col_upper[j] = v;
                        }
                        "FR" => {
                            col_lower[j] = f64::NEG_INFINITY;
                            col_upper[j] = f64::INFINITY;
                        }
                        "MI" => col_lower[j] = f64::NEG_INFINITY,
                        "PL" => col_upper[j] = f64::INFINITY,
                        "BV" => {
                            col_lower[j] = 0.0;
                            col_upper[j] = 1.0;
                            integer[j] = true;
                        }
                        other => return Err(err(lineno, &format!("unsupported bound type {other}"))),
                    }
                }
                Section::None => return Err(err(lineno, "data outside a section")),
            }
        }

        let m = row_kind.len();
        let mut row_lower = vec![f64::NEG_INFINITY; m];
        let mut row_upper = vec![f64::INFINITY; m];
        for i in 0..m {
            match (row_kind[i], range[i]) {
                ('L', None) => row_upper[i] = rhs[i],
                ('G', None) => row_lower[i] = rhs[i],
                ('E', None) => {
                    row_lower[i] = rhs[i];
                    row_upper[i] = rhs[i];
                }
                ('L', Some(r)) => {
                    row_upper[i] = rhs[i];
                    row_lower[i] = rhs[i] - r.abs();
                }
                ('G', Some(r)) => {
                    row_lower[i] = rhs[i];
                    row_upper[i] = rhs[i] + r.abs();
                }
                ('E', Some(r)) if r >= 0.0 => {
                    row_lower[i] = rhs[i];
                    row_upper[i] = rhs[i] + r;
                }
                ('E', Some(r)) => {
                    row_lower[i] = rhs[i] + r;
                    row_upper[i] = rhs[i];
                }
                _ => unreachable!(),
            }
        }
        let n = cost.len();
        let rows = CsrMatrix::from_triplets(m, n, &triplets)
            .map_err(|e| MpsError::Parse { line: 0, message: e.to_string() })?;
        Ok(MilpModel {
            name,
            objective_offset: offset,
            cost,
            col_lower,
            col_upper,
            integer,
            rows,
            row_lower,
            row_upper,
            col_names,
            row_names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MilpModel {
        let mut b = ModelBuilder::new("small", true);
        let x = b.add_col(|| "x".into(), 1.0, 0.0, 1.0, true);
        let y = b.add_col(|| "y".into(), -2.0, f64::NEG_INFINITY, 4.0, false);
        let z = b.add_col(|| "z".into(), 0.5, -1.0, f64::INFINITY, false);
        let f = b.add_col(|| "f".into(), 0.0, 2.5, 2.5, false);
        b.add_row(|| "le".into(), vec![(x, 1.0), (y, 1.0)], f64::NEG_INFINITY, 3.0);
        b.add_row(|| "ge".into(), vec![(y, 2.0), (z, -1.0)], -1.0, f64::INFINITY);
        b.add_row(|| "eq".into(), vec![(z, 1.0), (f, 1.0)], 2.0, 2.0);
        b.add_row(|| "rng".into(), vec![(x, 1.0), (z, 1.0)], -0.5, 7.0);
        let mut m = b.finish();
        m.objective_offset = 1.25;
        m
    }

    #[test]
    fn mps_round_trip_preserves_model() {
        let m = small();
        let text = mps::write(&m).unwrap();
        let back = mps::read(&text).unwrap();
        assert_eq!(back.cost, m.cost);
        assert_eq!(back.col_lower, m.col_lower);
        assert_eq!(back.col_upper, m.col_upper);
        assert_eq!(back.integer, m.integer);
        assert_eq!(back.row_lower, m.row_lower);
        assert_eq!(back.row_upper, m.row_upper);
        assert_eq!(back.rows, m.rows);
        assert_eq!(back.objective_offset, m.objective_offset);
        assert_eq!(back.col_names, m.col_names);
    }

    #[test]
    fn size_counts_kinds() {
        let s = small().size();
        assert_eq!((s.binary, s.integer, s.continuous, s.constraints), (1, 0, 3, 4));
    }

    #[test]
    fn violation_measures_rows_and_bounds() {
        let m = small();
        assert!(m.max_violation(&[0.0, 0.0, -0.5, 2.5]) <= 0.0);
        assert!((m.max_violation(&[0.0, 5.0, -0.5, 2.5]) - 2.0).abs() < 1e-12);
    }
}

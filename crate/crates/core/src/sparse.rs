//! Compressed sparse row storage.
//!
//! Row aggregation and violated-row extraction are both row-major, so every
//! constraint block in the crate is kept in CSR form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) lies outside a {nrows}x{ncols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
}

/// Row-major sparse matrix. Column indices inside a row are strictly
/// increasing and explicit zeros are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicate entries
    /// are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(row, col, value) in triplets {
            if row >= nrows || col >= ncols {
                return Err(SparseError::OutOfBounds { row, col, nrows, ncols });
            }
            if !value.is_finite() {
                return Err(SparseError::NonFinite { row, col, value });
            }
            per_row[row].push((col, value));
        }
        let mut builder = CsrBuilder::new(ncols);
        for entries in per_row {
            builder.push_row(entries);
        }
        Ok(builder.finish())
    }

    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Self {
        let mut builder = CsrBuilder::new(ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged dense matrix");
            builder.push_row(row.iter().copied().enumerate());
        }
        builder.finish()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "vector length mismatch");
        (0..self.nrows).map(|r| self.row_dot(r, x)).collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Copies the selected rows into a new matrix, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut builder = CsrBuilder::new(self.ncols);
        for &r in rows {
            builder.push_sorted_row(self.row(r));
        }
        builder.finish()
    }

    /// Sums each range of rows into one row.
    pub fn sum_row_groups(&self, groups: &[std::ops::Range<usize>]) -> Self {
        let mut builder = CsrBuilder::new(self.ncols);
        for g in groups {
            builder.push_row(g.clone().flat_map(|r| self.row(r)));
        }
        builder.finish()
    }

    /// Shifts every column index by `offset` and widens to `ncols`.
    pub fn with_column_offset(&self, offset: usize, ncols: usize) -> Self {
        assert!(self.ncols + offset <= ncols);
        Self {
            nrows: self.nrows,
            ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.iter().map(|c| c + offset).collect(),
            values: self.values.clone(),
        }
    }

    /// Places blocks side by side. All blocks must share the row count.
    pub fn hstack(blocks: &[&CsrMatrix]) -> Self {
        let nrows = blocks.first().map_or(0, |b| b.nrows);
        let ncols: usize = blocks.iter().map(|b| b.ncols).sum();
        let mut builder = CsrBuilder::new(ncols);
        for r in 0..nrows {
            let mut offset = 0;
            let mut entries = Vec::new();
            for b in blocks {
                assert_eq!(b.nrows, nrows, "hstack row mismatch");
                entries.extend(b.row(r).map(|(c, v)| (c + offset, v)));
                offset += b.ncols;
            }
            builder.push_sorted_row(entries);
        }
        builder.finish()
    }

    /// Stacks blocks vertically. All blocks must share the column count.
    pub fn vstack(blocks: &[&CsrMatrix]) -> Self {
        let ncols = blocks.first().map_or(0, |b| b.ncols);
        let mut builder = CsrBuilder::new(ncols);
        for b in blocks {
            assert_eq!(b.ncols, ncols, "vstack column mismatch");
            for r in 0..b.nrows {
                builder.push_sorted_row(b.row(r));
            }
        }
        builder.finish()
    }
}

/// Incremental row-by-row CSR construction.
#[derive(Debug, Clone)]
pub struct CsrBuilder {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    scratch: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn with_capacity(ncols: usize, rows: usize, nnz: usize) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        indptr.push(0);
        Self {
            ncols,
            indptr,
            indices: Vec::with_capacity(nnz),
            values: Vec::with_capacity(nnz),
            scratch: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Appends a row given in any order; duplicates are summed and zeros
    /// dropped.
    pub fn push_row<I: IntoIterator<Item = (usize, f64)>>(&mut self, entries: I) -> usize {
        self.scratch.clear();
        self.scratch.extend(entries);
        self.scratch.sort_unstable_by_key(|e| e.0);
        let mut i = 0;
        while i < self.scratch.len() {
            let col = self.scratch[i].0;
            let mut sum = 0.0;
            while i < self.scratch.len() && self.scratch[i].0 == col {
                sum += self.scratch[i].1;
                i += 1;
            }
            assert!(col < self.ncols, "column {col} out of range {}", self.ncols);
            if sum != 0.0 {
                self.indices.push(col);
                self.values.push(sum);
            }
        }
        self.indptr.push(self.indices.len());
        self.nrows() - 1
    }

    /// Appends a row whose columns are already strictly increasing.
    pub fn push_sorted_row<I: IntoIterator<Item = (usize, f64)>>(&mut self, entries: I) -> usize {
        for (c, v) in entries {
            debug_assert!(c < self.ncols);
            if v != 0.0 {
                self.indices.push(c);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.nrows() - 1
    }

    pub fn finish(self) -> CsrMatrix {
        CsrMatrix {
            nrows: self.indptr.len() - 1,
            ncols: self.ncols,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
        }
    }
}

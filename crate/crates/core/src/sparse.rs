//! Compressed sparse row matrices.
//!
//! Canonical weight storage for the whole crate. The orientation
//! convention is row = target: entry `(i, j)` is the weight of the
//! connection from neuron `j` to neuron `i`, so a row holds everything a
//! neuron receives and `A · spikes` is a plain row traversal.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SparseError {
    #[error("row pointer array must have rows+1 entries and be non-decreasing")]
    BadRowPointers,
    #[error("column indices must be strictly increasing within a row and < cols")]
    BadColumnIndices,
    #[error("column index and value arrays differ in length")]
    LengthMismatch,
}

/// CSR matrix over f64.
///
/// Invariants: `row_ptr` is non-decreasing with `row_ptr[0] == 0` and
/// `row_ptr[rows] == nnz`; column indices are strictly increasing within
/// each row. Constructors from dense data drop exact zeros; in-place
/// value updates (plasticity) may drive stored values to zero without
/// changing the pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 || row_ptr[rows] != col_idx.len() {
            return Err(SparseError::BadRowPointers);
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(SparseError::BadRowPointers);
        }
        if col_idx.len() != values.len() {
            return Err(SparseError::LengthMismatch);
        }
        for r in 0..rows {
            let row = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if row.iter().any(|&c| c >= cols) {
                return Err(SparseError::BadColumnIndices);
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SparseError::BadColumnIndices);
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Matrix with no stored entries.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from `(row, col, value)` triplets. Zeros are dropped;
    /// duplicate positions must not occur.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.retain(|&(_, _, v)| v != 0.0);
        entries.sort_unstable_by_key(|a| (a.0, a.1));
        debug_assert!(entries.windows(2).all(|w| (w[0].0, w[0].1) != (w[1].0, w[1].1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            debug_assert!(r < rows && c < cols);
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Build from entries already sorted by (row, col) with no
    /// duplicates, keeping explicit zeros. Partitioning uses this so
    /// plastic weights that reached zero keep their slot.
    pub(crate) fn from_sorted_triplets(
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    ) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            debug_assert!(r < rows && c < cols);
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Build from a dense row-major matrix, dropping zeros.
    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        assert!(dense.iter().all(|r| r.len() == cols), "ragged dense input");
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in dense {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for (i, j, v) in self.iter() {
            dense[i][j] = v;
        }
        dense
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Row access with mutable values (pattern stays fixed).
    pub fn row_mut(&mut self, i: usize) -> (&[usize], &mut [f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &mut self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Number of stored entries per column (out-degree when columns are
    /// sources).
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cols];
        for &j in &self.col_idx {
            counts[j] += 1;
        }
        counts
    }

    pub fn row_pointers(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Mean of the stored values, 0.0 for an empty matrix.
    pub fn mean_value(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

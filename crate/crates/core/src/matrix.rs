//! Column-compressed storage for constraint matrices.
//!
//! The simplex engine touches `A` almost exclusively by column (basis
//! columns, entering columns, pricing dot products), so columns are stored
//! contiguously. Dense inputs are accepted and converted; explicit zeros are
//! dropped.

use serde::{Deserialize, Serialize};

/// A sparse column of an `m`-row matrix: parallel row indices and values.
#[derive(Debug, Clone, Copy)]
pub struct ColumnView<'a> {
    pub rows: &'a [usize],
    pub values: &'a [f64],
}

impl ColumnView<'_> {
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(self.values)
            .map(|(&r, &v)| v * dense[r])
            .sum()
    }

    pub fn to_dense(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (&r, &v) in self.rows.iter().zip(self.values) {
            out[r] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from dense rows. All rows must have the same length.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        Self::from_fn(nrows, ncols, |i, j| rows[i][j])
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..ncols {
            for i in 0..nrows {
                let v = f(i, j);
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            cols[j].push((i, v));
        }
        Self::from_columns(nrows, cols)
    }

    /// Builds from per-column `(row, value)` lists (any order, duplicates summed).
    pub fn from_columns(nrows: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let ncols = columns.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut col in columns {
            col.sort_by_key(|&(r, _)| r);
            let mut last: Option<usize> = None;
            for (r, v) in col {
                assert!(r < nrows, "row {r} out of bounds");
                if last == Some(r) {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                    last = Some(r);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let mut out = Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        };
        out.drop_zeros();
        out
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut col_ptr = Vec::with_capacity(self.ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..self.ncols {
            let c = self.column(j);
            for (&r, &v) in c.rows.iter().zip(c.values) {
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        self.col_ptr = col_ptr;
        self.row_idx = row_idx;
        self.values = values;
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

    pub fn column(&self, j: usize) -> ColumnView<'_> {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        ColumnView {
            rows: &self.row_idx[s..e],
            values: &self.values[s..e],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let c = self.column(j);
        match c.rows.binary_search(&i) {
            Ok(k) => c.values[k],
            Err(_) => 0.0,
        }
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let c = self.column(j);
                for (&r, &v) in c.rows.iter().zip(c.values) {
                    out[r] += v * xj;
                }
            }
        }
        out
    }

    /// `Aᵀ y`
    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        (0..self.ncols).map(|j| self.column(j).dot(y)).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            let c = self.column(j);
            for (&r, &v) in c.rows.iter().zip(c.values) {
                rows[r][j] = v;
            }
        }
        rows
    }

    /// `[A | I]`
    pub fn append_identity(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.nrows {
            out.row_idx.push(i);
            out.values.push(1.0);
            out.col_ptr.push(out.row_idx.len());
        }
        out.ncols += self.nrows;
        out
    }

    /// Iterates `(row, col, value)` over stored entries in column order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            let c = self.column(j);
            c.rows.iter().zip(c.values).map(move |(&r, &v)| (r, j, v))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_drops_zeros() {
        let rows = vec![vec![1.0, 0.0, 2.0], vec![0.0, 0.0, -3.0]];
        let a = SparseMatrix::from_dense_rows(&rows);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.to_dense_rows(), rows);
        assert_eq!(a.get(1, 2), -3.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, -1.0]];
        let a = SparseMatrix::from_dense_rows(&rows);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 7.0, -1.0]);
        assert_eq!(a.transpose_mul_vec(&[1.0, 0.0, 1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (1, 1, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn identity_append() {
        let a = SparseMatrix::from_dense_rows(&[vec![2.0]]);
        let s = a.append_identity();
        assert_eq!(s.to_dense_rows(), vec![vec![2.0, 1.0]]);
    }
}

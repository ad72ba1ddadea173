//! Compressed sparse row matrices.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{FemError, Result};

/// Square or rectangular CSR matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking their consistency.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() {
            return Err(FemError::InvalidParameter("inconsistent CSR row pointers".into()));
        }
        if col_idx.len() != values.len() {
            return Err(FemError::DimensionMismatch {
                expected: col_idx.len(),
                got: values.len(),
            });
        }
        for r in 0..nrows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(FemError::InvalidParameter(format!(
                    "row {r}: columns must be sorted, unique and < {ncols}"
                )));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sums duplicate `(row, col, value)` entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    /// Builds from per-row `(col, value)` lists; duplicates are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Position of `(r, c)` in the value array, if structurally present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| span.start + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |p| self.values[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`, rows computed in parallel (each row summed sequentially).
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let row = |r: usize| -> f64 {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            s
        };
        if self.nnz() > 50_000 {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = row(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, yr)| *yr = row(r));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                rows[c].push((r, v));
            }
        }
        Self::from_rows(self.nrows, rows)
    }

    /// `max |a_ij - a_ji|` over the union of both patterns.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// Pattern containing both inputs, plus where each input's entries land in it.
    pub fn union_pattern(a: &Self, b: &Self) -> (Self, Vec<usize>, Vec<usize>) {
        assert_eq!((a.nrows, a.ncols), (b.nrows, b.ncols));
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(a.nnz().max(b.nnz()));
        let mut map_a = vec![0; a.nnz()];
        let mut map_b = vec![0; b.nnz()];
        for r in 0..a.nrows {
            let (mut i, ie) = (a.row_ptr[r], a.row_ptr[r + 1]);
            let (mut j, je) = (b.row_ptr[r], b.row_ptr[r + 1]);
            while i < ie || j < je {
                let ca = if i < ie { a.col_idx[i] } else { usize::MAX };
                let cb = if j < je { b.col_idx[j] } else { usize::MAX };
                let c = ca.min(cb);
                if ca == c {
                    map_a[i] = col_idx.len();
                    i += 1;
                }
                if cb == c {
                    map_b[j] = col_idx.len();
                    j += 1;
                }
                col_idx.push(c);
            }
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        let m = Self {
            nrows: a.nrows,
            ncols: a.ncols,
            row_ptr,
            col_idx,
            values,
        };
        (m, map_a, map_b)
    }

    /// Writes `row col value` lines (0-based) for debugging.
    pub fn write_coordinate(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

//! Compressed-column matrices built from triplets.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    /// Appends an entry; duplicates are summed on conversion.
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        assert!(
            row < self.nrows && col < self.ncols,
            "triplet ({row}, {col}) out of range"
        );
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn to_csc(&self) -> CscMatrix {
        CscMatrix::from_triplets(self)
    }
}

/// Column-compressed sparse matrix with sorted, unique row indices in each
/// column. Explicit zeros are kept, so patterns stay stable when values
/// change.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowind: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowind: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = CscMatrix::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    pub fn from_triplets(t: &Triplets) -> Self {
        Self::from_triplets_mapped(t).0
    }

    /// Also returns, for every triplet, the index of the stored entry it was
    /// accumulated into.
    pub fn from_triplets_mapped(t: &Triplets) -> (Self, Vec<usize>) {
        let mut order: Vec<usize> = (0..t.len()).collect();
        order.sort_unstable_by_key(|&k| (t.cols[k], t.rows[k], k));
        let mut colptr = vec![0; t.ncols + 1];
        let mut rowind = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        let mut map = vec![0; t.len()];
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let key = (t.cols[k], t.rows[k]);
            if last != Some(key) {
                rowind.push(key.1);
                values.push(0.0);
                colptr[key.0 + 1] += 1;
                last = Some(key);
            }
            let pos = values.len() - 1;
            values[pos] += t.vals[k];
            map[k] = pos;
        }
        for j in 0..t.ncols {
            colptr[j + 1] += colptr[j];
        }
        (
            CscMatrix {
                nrows: t.nrows,
                ncols: t.ncols,
                colptr,
                rowind,
                values,
            },
            map,
        )
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Triplets::new(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csc()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.colptr[j]..self.colptr[j + 1];
        self.rowind[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// `(row, col, value)` of every stored entry in column order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col(j).map(move |(i, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.colptr[j]..self.colptr[j + 1];
        match self.rowind[r.clone()].binary_search(&i) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_acc(x, &mut y);
        y
    }

    /// `y += A x`.
    pub fn mul_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowind[p]] += self.values[p] * xj;
            }
        }
    }

    /// `y = Aᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_mul_vec_acc(x, &mut y);
        y
    }

    pub fn tr_mul_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate().take(self.ncols) {
            let mut s = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                s += self.values[p] * x[self.rowind[p]];
            }
            *yj += s;
        }
    }

    /// `y = A x` for a symmetric matrix of which only the upper triangle is
    /// stored.
    pub fn sym_upper_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let (i, v) = (self.rowind[p], self.values[p]);
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for (i, j, v) in self.entries() {
            t.push(j, i, v);
        }
        t.to_csc()
    }

    /// Entries with `row <= col`.
    pub fn upper_triangle(&self) -> CscMatrix {
        let mut t = Triplets::new(self.nrows, self.ncols);
        for (i, j, v) in self.entries() {
            if i <= j {
                t.push(i, j, v);
            }
        }
        t.to_csc()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        self.entries()
            .all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.entries() {
            d[i][j] += v;
        }
        d
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

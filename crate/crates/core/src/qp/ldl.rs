//! Up-looking sparse LDLᵀ for quasi-definite matrices.
//!
//! The input is the upper triangle of a symmetric matrix. The symbolic part
//! (ordering, elimination tree, column counts, value map) is computed once
//! per pattern; numeric factorizations reuse it.

use alloc::vec;
use alloc::vec::Vec;

use super::ordering::{inverse, minimum_degree};
use super::sparse::{CscMatrix, Triplets};

const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq)]
pub enum LdlError {
    NotUpperTriangular,
    ZeroPivot(usize),
    NonFinite,
}

#[derive(Clone, Debug)]
pub struct Symbolic {
    n: usize,
    perm: Vec<usize>,
    /// Permuted upper-triangular pattern.
    ap: Vec<usize>,
    ai: Vec<usize>,
    /// Original entry index -> position in the permuted values.
    map: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
}

impl Symbolic {
    /// Analyses the upper-triangular `pattern`; a minimum-degree ordering is
    /// applied.
    pub fn new(pattern: &CscMatrix) -> Result<Self, LdlError> {
        let perm = minimum_degree(pattern);
        Self::with_perm(pattern, perm)
    }

    pub fn with_perm(pattern: &CscMatrix, perm: Vec<usize>) -> Result<Self, LdlError> {
        let n = pattern.ncols;
        let pinv = inverse(&perm);
        let mut t = Triplets::new(n, n);
        for (i, j, _) in pattern.entries() {
            if i > j {
                return Err(LdlError::NotUpperTriangular);
            }
            let (a, b) = (pinv[i], pinv[j]);
            t.push(a.min(b), a.max(b), 0.0);
        }
        let (permuted, map) = CscMatrix::from_triplets_mapped(&t);
        let (ap, ai) = (permuted.colptr, permuted.rowind);

        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &r in &ai[ap[j]..ap[j + 1]] {
                let mut i = r;
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        Ok(Symbolic {
            n,
            perm,
            ap,
            ai,
            map,
            etree,
            lp,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }
}

#[derive(Clone, Debug)]
pub struct Factor {
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    ax: Vec<f64>,
    // scratch
    y_vals: Vec<f64>,
    y_idx: Vec<usize>,
    y_mark: Vec<bool>,
    elim: Vec<usize>,
    l_next: Vec<usize>,
    work: Vec<f64>,
}

impl Factor {
    pub fn new(sym: &Symbolic) -> Self {
        let n = sym.n;
        Factor {
            li: vec![0; sym.nnz_l()],
            lx: vec![0.0; sym.nnz_l()],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            ax: vec![0.0; sym.ai.len()],
            y_vals: vec![0.0; n],
            y_idx: vec![0; n],
            y_mark: vec![false; n],
            elim: vec![0; n],
            l_next: vec![0; n],
            work: vec![0.0; n],
        }
    }

    /// Factors the matrix whose upper-triangle values (in the order of the
    /// pattern passed to [`Symbolic::new`]) are `values`.
    pub fn factor(&mut self, sym: &Symbolic, values: &[f64]) -> Result<(), LdlError> {
        let n = sym.n;
        self.ax.iter_mut().for_each(|v| *v = 0.0);
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(LdlError::NonFinite);
            }
            self.ax[sym.map[k]] += v;
        }
        for i in 0..n {
            self.l_next[i] = sym.lp[i];
            self.y_mark[i] = false;
            self.y_vals[i] = 0.0;
            self.d[i] = 0.0;
        }
        let (ap, ai, ax) = (&sym.ap, &sym.ai, &self.ax);
        for k in 0..n {
            let mut nnz_y = 0;
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    self.d[k] = ax[p];
                    continue;
                }
                self.y_vals[b] = ax[p];
                if !self.y_mark[b] {
                    self.y_mark[b] = true;
                    self.elim[0] = b;
                    let mut n_elim = 1;
                    let mut next = sym.etree[b];
                    while next != NONE && next < k {
                        if self.y_mark[next] {
                            break;
                        }
                        self.y_mark[next] = true;
                        self.elim[n_elim] = next;
                        n_elim += 1;
                        next = sym.etree[next];
                    }
                    while n_elim > 0 {
                        n_elim -= 1;
                        self.y_idx[nnz_y] = self.elim[n_elim];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = self.y_idx[i];
                let tmp = self.l_next[c];
                let yc = self.y_vals[c];
                for j in sym.lp[c]..tmp {
                    self.y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                self.lx[tmp] = yc * self.dinv[c];
                self.d[k] -= yc * self.lx[tmp];
                self.l_next[c] += 1;
                self.y_vals[c] = 0.0;
                self.y_mark[c] = false;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(LdlError::ZeroPivot(sym.perm[k]));
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves in place for the original (unpermuted) ordering.
    pub fn solve(&mut self, sym: &Symbolic, b: &mut [f64]) {
        let n = sym.n;
        for k in 0..n {
            self.work[k] = b[sym.perm[k]];
        }
        let x = &mut self.work;
        for i in 0..n {
            let xi = x[i];
            for j in sym.lp[i]..sym.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in sym.lp[i]..sym.lp[i + 1] {
                s -= self.lx[j] * x[self.li[j]];
            }
            x[i] = s;
        }
        for k in 0..n {
            b[sym.perm[k]] = self.work[k];
        }
    }

    /// Number of negative pivots (the inertia of a quasi-definite matrix is
    /// fixed by its block sizes).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&d| d < 0.0).count()
    }
}

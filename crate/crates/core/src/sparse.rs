//! Compressed sparse row storage and the handful of kernels the operators need.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Rows above which matrix-vector products are split across the worker pool.
const PAR_ROWS: usize = 4096;

/// A real matrix in CSR form with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order, explicit zeros are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (a, b) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(a..b);
            // stable: duplicates are summed in insertion order
            order.sort_by_key(|&p| cols[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if cols[p] == last {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    col_idx.push(cols[p]);
                    values.push(vals[p]);
                    last = cols[p];
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
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

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|p| vals[p]).unwrap_or(0.0)
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    /// `y = M x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let row = |r: usize| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).fold(0.0, |acc, (&c, &v)| acc + v * x[c])
        };
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[fill[c]] = r;
                values[fill[c]] = v;
                fill[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr: counts, col_idx, values }
    }

    /// Sparse product `self · rhs` (row-by-row accumulation).
    pub fn matmul(&self, rhs: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, rhs.nrows);
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut acc = vec![0.0; rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            let (cols, vals) = self.row(r);
            for (&k, &a) in cols.iter().zip(vals) {
                let (rc, rv) = rhs.row(k);
                for (&c, &b) in rc.iter().zip(rv) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                col_idx.push(c);
                values.push(acc[c]);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: rhs.ncols, row_ptr, col_idx, values }
    }

    /// Gram matrix `selfᵀ · self`.
    ///
    /// Entry `(i, j)` accumulates `M[k,i]·M[k,j]` over ascending `k`, the same
    /// products in the same order as entry `(j, i)`, so the result is exactly
    /// symmetric.
    pub fn gram(&self) -> Self {
        self.transpose().matmul(self)
    }

    /// `a·self + b·rhs`.
    pub fn add_scaled(&self, a: f64, rhs: &CsrMatrix, b: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + rhs.nnz());
        let mut values = Vec::with_capacity(self.nnz() + rhs.nnz());
        row_ptr.push(0);
        for r in 0..self.nrows {
            let (c1, v1) = self.row(r);
            let (c2, v2) = rhs.row(r);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let take1 = q >= c2.len() || (p < c1.len() && c1[p] < c2[q]);
                let take2 = p >= c1.len() || (q < c2.len() && c2[q] < c1[p]);
                if take1 {
                    col_idx.push(c1[p]);
                    values.push(a * v1[p]);
                    p += 1;
                } else if take2 {
                    col_idx.push(c2[q]);
                    values.push(b * v2[q]);
                    q += 1;
                } else {
                    col_idx.push(c1[p]);
                    values.push(a * v1[p] + b * v2[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows);
        self.add_scaled(1.0, &CsrMatrix::diagonal(d), 1.0)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &CsrMatrix) -> Self {
        let mut t = Vec::with_capacity(self.nnz() * rhs.nnz());
        for r1 in 0..self.nrows {
            let (c1, v1) = self.row(r1);
            for r2 in 0..rhs.nrows {
                let (c2, v2) = rhs.row(r2);
                for (&a, &x) in c1.iter().zip(v1) {
                    for (&b, &y) in c2.iter().zip(v2) {
                        t.push((r1 * rhs.nrows + r2, a * rhs.ncols + b, x * y));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.nrows * rhs.nrows, self.ncols * rhs.ncols, &t)
    }

    /// Largest `|M[i,j] - M[j,i]|`.
    pub fn max_asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Writes `row col value` lines (zero-based) preceded by a size header.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "% rows cols nnz")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.nnz() * (std::mem::size_of::<usize>() + std::mem::size_of::<f64>())
            + (self.nrows + 1) * std::mem::size_of::<usize>()
    }
}

/// What an operator discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Laplacian,
    AngularGram,
    HBeta0,
    HOfS,
    H3d,
    /// Built by hand, e.g. in tests.
    External,
}

/// A symmetric sparse operator with its symmetry certificate.
#[derive(Debug, Clone)]
pub struct SparseSymOperator {
    matrix: CsrMatrix,
    provenance: Provenance,
    asymmetry: f64,
}

impl SparseSymOperator {
    /// Wraps `matrix`, rejecting it unless it is exactly symmetric.
    pub fn new(matrix: CsrMatrix, provenance: Provenance) -> Result<Self> {
        let asymmetry = matrix.max_asymmetry();
        if asymmetry != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{provenance:?} operator is not symmetric (max |M - Mᵀ| = {asymmetry:e})"
            )));
        }
        Ok(SparseSymOperator { matrix, provenance, asymmetry })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Max `|M[i,j] - M[j,i]|`, zero for every constructed operator.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// `scale(M)`, the largest absolute row sum.
    pub fn scale(&self) -> f64 {
        self.matrix.max_row_sum()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// `xᵀ M x / xᵀ x`.
    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let y = self.apply(x);
        dot(x, &y) / dot(x, x)
    }

    /// `self + diag(d)`, keeping symmetry.
    pub fn with_diagonal(&self, d: &[f64], provenance: Provenance) -> Self {
        SparseSymOperator { matrix: self.matrix.add_diagonal(d), provenance, asymmetry: 0.0 }
    }

    pub(crate) fn from_parts_unchecked(matrix: CsrMatrix, provenance: Provenance) -> Self {
        debug_assert_eq!(matrix.max_asymmetry(), 0.0);
        SparseSymOperator { matrix, provenance, asymmetry: 0.0 }
    }
}

/// A general sparse operator (no symmetry requirement).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    matrix: CsrMatrix,
}

impl SparseOperator {
    pub fn new(matrix: CsrMatrix) -> Self {
        SparseOperator { matrix }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// `MᵀM`, symmetric positive semidefinite.
    pub fn gram(&self, provenance: Provenance) -> SparseSymOperator {
        SparseSymOperator::from_parts_unchecked(self.matrix.gram(), provenance)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_sparse(n: usize, m: usize, entries: &[(usize, usize, f64)]) -> CsrMatrix {
        let t: Vec<_> = entries.iter().map(|&(r, c, v)| (r % n, c % m, v)).collect();
        CsrMatrix::from_triplets(n, m, &t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn kron_of_identities() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let k = CsrMatrix::identity(2).kron(&a);
        assert_eq!(k.nrows(), 4);
        assert_eq!(k.get(2, 3), 2.0);
        assert_eq!(k.get(0, 3), 0.0);
        let k2 = a.kron(&CsrMatrix::identity(2));
        assert_eq!(k2.get(1, 3), 2.0);
    }

    proptest! {
        #[test]
        fn products_match_dense(
            entries in prop::collection::vec((0usize..7, 0usize..5, -3.0f64..3.0), 0..30),
            other in prop::collection::vec((0usize..5, 0usize..4, -3.0f64..3.0), 0..20),
        ) {
            let a = random_sparse(7, 5, &entries);
            let b = random_sparse(5, 4, &other);
            let dense = a.to_dense() * b.to_dense();
            let prod = a.matmul(&b).to_dense();
            prop_assert!((dense - prod).abs().max() < 1e-12);
            let g = a.gram();
            prop_assert_eq!(g.max_asymmetry(), 0.0);
            prop_assert!((g.to_dense() - a.to_dense().transpose() * a.to_dense()).abs().max() < 1e-12);
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            let x: Vec<f64> = (0..5).map(|i| i as f64 - 1.5).collect();
            let y = a.mul_vec(&x);
            let yd = a.to_dense() * nalgebra::DVector::from_vec(x);
            for r in 0..7 {
                prop_assert!((y[r] - yd[r]).abs() < 1e-12);
            }
        }

        #[test]
        fn add_scaled_matches_dense(
            e1 in prop::collection::vec((0usize..6, 0usize..6, -3.0f64..3.0), 0..25),
            e2 in prop::collection::vec((0usize..6, 0usize..6, -3.0f64..3.0), 0..25),
            a in -2.0f64..2.0, b in -2.0f64..2.0,
        ) {
            let m1 = random_sparse(6, 6, &e1);
            let m2 = random_sparse(6, 6, &e2);
            let s = m1.add_scaled(a, &m2, b).to_dense();
            let d = m1.to_dense() * a + m2.to_dense() * b;
            prop_assert!((s - d).abs().max() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_operator_is_rejected() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]);
        assert!(SparseSymOperator::new(m, Provenance::External).is_err());
    }

    #[test]
    fn coordinate_export() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (1, 0, -2.0)]);
        let mut buf = Vec::new();
        m.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1], "2 3 2");
        assert!(lines[2].starts_with("0 2 1.5"));
        assert!(lines[3].starts_with("1 0 -2"));
    }
}

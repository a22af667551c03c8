//! Compressed-column complex sparse matrices.
//!
//! [`SparseOp`] is the single operator carrier used throughout the crate:
//! Fock-space operators (dimension `4^N`), vectorized superoperators
//! (dimension `16^N`) and the small pseudospin generators all live here.
//! Row indices are stored as `u32`, which covers every dimension the
//! simulator is allowed to build.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Complex sparse matrix in compressed sparse column (CSC) layout.
///
/// Row indices inside every column are strictly increasing and explicit
/// zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<C64>,
}

impl SparseOp {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseOp {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![ONE; n])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        col_ptr.push(0);
        for (j, &v) in diag.iter().enumerate() {
            if v != ZERO {
                row_idx.push(j as u32);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        SparseOp { nrows: n, ncols: n, col_ptr, row_idx, values }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let mut cols: Vec<Vec<(u32, C64)>> = vec![Vec::new(); ncols];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            cols[j].push((i as u32, v));
        }
        let mut builder = ColumnBuilder::new(nrows, ncols);
        for mut col in cols {
            col.sort_unstable_by_key(|&(i, _)| i);
            let mut merged: Vec<(u32, C64)> = Vec::with_capacity(col.len());
            for (i, v) in col {
                match merged.last_mut() {
                    Some((last, acc)) if *last == i => *acc += v,
                    _ => merged.push((i, v)),
                }
            }
            builder.push_sorted_column(merged);
        }
        builder.finish()
    }

    /// Dense row-major view, intended for small matrices and tests.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[C64]) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        Self::from_triplets(
            nrows,
            ncols,
            (0..nrows)
                .flat_map(|i| (0..ncols).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, data[i * ncols + j]))
                .filter(|t| t.2 != ZERO),
        )
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

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Iterates over the stored entries of column `j` as `(row, value)`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&i, &v)| (i as usize, v))
    }

    /// Iterates over every stored entry as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.column(j).map(move |(i, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&(i as u32)) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> Vec<C64> {
        let mut out = vec![ZERO; self.nrows * self.ncols];
        for (i, j, v) in self.triplets() {
            out[i * self.ncols + j] = v;
        }
        out
    }

    pub fn to_faer(&self) -> faer::Mat<C64> {
        let mut m = faer::Mat::<C64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v.conj())),
        )
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, c: C64) -> Self {
        if c == ZERO {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Largest entry modulus (the max norm). Zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max-norm distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &SparseOp) -> f64 {
        (self - other).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn trace(&self) -> C64 {
        (0..self.ncols.min(self.nrows)).map(|j| self.get(j, j)).sum()
    }

    /// Linear combination `a*self + b*other`.
    pub fn lincomb(&self, a: C64, other: &SparseOp, b: C64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch");
        let mut builder = ColumnBuilder::new(self.nrows, self.ncols);
        let mut merged = Vec::new();
        for j in 0..self.ncols {
            merged.clear();
            let mut x = self.column(j).peekable();
            let mut y = other.column(j).peekable();
            loop {
                match (x.peek(), y.peek()) {
                    (Some(&(ix, vx)), Some(&(iy, vy))) => {
                        if ix == iy {
                            merged.push((ix as u32, a * vx + b * vy));
                            x.next();
                            y.next();
                        } else if ix < iy {
                            merged.push((ix as u32, a * vx));
                            x.next();
                        } else {
                            merged.push((iy as u32, b * vy));
                            y.next();
                        }
                    }
                    (Some(&(ix, vx)), None) => {
                        merged.push((ix as u32, a * vx));
                        x.next();
                    }
                    (None, Some(&(iy, vy))) => {
                        merged.push((iy as u32, b * vy));
                        y.next();
                    }
                    (None, None) => break,
                }
            }
            builder.push_sorted_column(merged.drain(..));
        }
        builder.finish()
    }

    /// Sparse matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &SparseOp) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "inner dimension mismatch");
        let mut builder = ColumnBuilder::new(self.nrows, rhs.ncols);
        let mut acc = vec![ZERO; self.nrows];
        let mut touched = vec![false; self.nrows];
        let mut pattern: Vec<u32> = Vec::new();
        for j in 0..rhs.ncols {
            for (k, b) in rhs.column(j) {
                for (i, a) in self.column(k) {
                    if !touched[i] {
                        touched[i] = true;
                        pattern.push(i as u32);
                    }
                    acc[i] += a * b;
                }
            }
            pattern.sort_unstable();
            builder.push_sorted_column(pattern.iter().map(|&i| {
                let v = acc[i as usize];
                acc[i as usize] = ZERO;
                touched[i as usize] = false;
                (i, v)
            }));
            pattern.clear();
        }
        builder.finish()
    }

    /// Kronecker product `self ⊗ rhs`; index `(a, b)` maps to `a * rhs.dim + b`.
    pub fn kron(&self, rhs: &SparseOp) -> Self {
        let nrows = self.nrows * rhs.nrows;
        let ncols = self.ncols * rhs.ncols;
        let mut builder = ColumnBuilder::new(nrows, ncols);
        let mut col = Vec::new();
        for ja in 0..self.ncols {
            for jb in 0..rhs.ncols {
                col.clear();
                for (ia, va) in self.column(ja) {
                    for (ib, vb) in rhs.column(jb) {
                        col.push(((ia * rhs.nrows + ib) as u32, va * vb));
                    }
                }
                builder.push_sorted_column(col.drain(..));
            }
        }
        builder.finish()
    }

    /// `[self, rhs] = self*rhs - rhs*self`.
    pub fn commutator(&self, rhs: &SparseOp) -> Self {
        self.matmul(rhs).lincomb(ONE, &rhs.matmul(self), -ONE)
    }

    /// `{self, rhs} = self*rhs + rhs*self`.
    pub fn anticommutator(&self, rhs: &SparseOp) -> Self {
        self.matmul(rhs).lincomb(ONE, &rhs.matmul(self), ONE)
    }

    /// `y = self * x`.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = ZERO);
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k] as usize] += self.values[k] * xj;
            }
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.apply_into(x, &mut y);
        y
    }

    /// `y = self† * x`, computed column by column without forming the adjoint.
    pub fn apply_adjoint_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (j, yj) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.values[k].conj() * x[self.row_idx[k] as usize];
            }
            *yj = acc;
        }
    }

    /// `<x| self |y>` for dense vectors.
    pub fn expectation(&self, x: &[C64], y: &[C64]) -> C64 {
        let mut acc = ZERO;
        for (j, &yj) in y.iter().enumerate() {
            if yj == ZERO {
                continue;
            }
            for (i, v) in self.column(j) {
                acc += x[i].conj() * v * yj;
            }
        }
        acc
    }

    /// Principal submatrix on `keep` (sorted, deduplicated indices).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut position = vec![u32::MAX; self.nrows];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new as u32;
        }
        let mut builder = ColumnBuilder::new(keep.len(), keep.len());
        for &j in keep {
            builder.push_sorted_column(self.column(j).filter_map(|(i, v)| {
                let p = position[i];
                (p != u32::MAX).then_some((p, v))
            }));
        }
        builder.finish()
    }

    /// Converts into a `faer` sparse matrix with `shift` added on the diagonal.
    pub(crate) fn to_faer_shifted(&self, shift: C64) -> Result<faer::sparse::SparseColMat<usize, C64>> {
        use faer::sparse::Triplet;
        let mut trip: Vec<Triplet<usize, usize, C64>> = self
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        if shift != ZERO {
            trip.extend((0..self.nrows.min(self.ncols)).map(|i| Triplet::new(i, i, shift)));
        }
        faer::sparse::SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::Numerical(format!("sparse conversion failed: {e:?}")))
    }
}

/// Incremental CSC assembly, one column at a time.
pub(crate) struct ColumnBuilder {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<C64>,
}

impl ColumnBuilder {
    pub(crate) fn new(nrows: usize, ncols: usize) -> Self {
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        col_ptr.push(0);
        ColumnBuilder { nrows, ncols, col_ptr, row_idx: Vec::new(), values: Vec::new() }
    }

    /// Appends the next column. Entries must have strictly increasing rows;
    /// exact zeros are dropped.
    pub(crate) fn push_sorted_column(&mut self, entries: impl IntoIterator<Item = (u32, C64)>) {
        for (i, v) in entries {
            debug_assert!((i as usize) < self.nrows);
            if v == ZERO {
                continue;
            }
            debug_assert!(
                self.row_idx.len() == *self.col_ptr.last().unwrap()
                    || *self.row_idx.last().unwrap() < i
            );
            self.row_idx.push(i);
            self.values.push(v);
        }
        self.col_ptr.push(self.row_idx.len());
    }

    pub(crate) fn finish(self) -> SparseOp {
        assert_eq!(self.col_ptr.len(), self.ncols + 1, "column count mismatch");
        SparseOp {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr: self.col_ptr,
            row_idx: self.row_idx,
            values: self.values,
        }
    }
}

impl Add for &SparseOp {
    type Output = SparseOp;
    fn add(self, rhs: &SparseOp) -> SparseOp {
        self.lincomb(ONE, rhs, ONE)
    }
}

impl Sub for &SparseOp {
    type Output = SparseOp;
    fn sub(self, rhs: &SparseOp) -> SparseOp {
        self.lincomb(ONE, rhs, -ONE)
    }
}

impl Mul for &SparseOp {
    type Output = SparseOp;
    fn mul(self, rhs: &SparseOp) -> SparseOp {
        self.matmul(rhs)
    }
}

impl Mul<C64> for &SparseOp {
    type Output = SparseOp;
    fn mul(self, rhs: C64) -> SparseOp {
        self.scale(rhs)
    }
}

impl Mul<f64> for &SparseOp {
    type Output = SparseOp;
    fn mul(self, rhs: f64) -> SparseOp {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Neg for &SparseOp {
    type Output = SparseOp;
    fn neg(self) -> SparseOp {
        self.scale(-ONE)
    }
}

/// Dense vector helpers shared by the solvers.
pub(crate) mod vecops {
    use super::C64;

    pub fn dot(x: &[C64], y: &[C64]) -> C64 {
        x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(x: &[C64]) -> f64 {
        x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
    }

    pub fn scale(a: C64, x: &mut [C64]) {
        x.iter_mut().for_each(|v| *v *= a);
    }

    pub fn max_abs_diff(x: &[C64], y: &[C64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dense_mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    out[i * n + j] += a[i * n + k] * b[k * n + j];
                }
            }
        }
        out
    }

    fn small_matrix(n: usize) -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec(
            prop_oneof![
                3 => Just(ZERO),
                2 => (-2i32..=2, -2i32..=2).prop_map(|(a, b)| c(a as f64, b as f64)),
            ],
            n * n,
        )
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseOp::from_triplets(
            2,
            2,
            [(0, 0, c(1.0, 0.0)), (0, 0, c(2.0, 0.0)), (1, 0, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), c(3.0, 0.0));
        assert_eq!(m.get(1, 0), ZERO);
    }

    #[test]
    fn kron_index_convention() {
        let a = SparseOp::from_dense(2, 2, &[c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)]);
        let b = SparseOp::from_dense(2, 2, &[ZERO, ONE, I, ZERO]);
        let k = a.kron(&b);
        // (a ⊗ b)[(ia*2+ib), (ja*2+jb)] = a[ia,ja] b[ib,jb]
        assert_eq!(k.get(1, 0), a.get(0, 0) * b.get(1, 0));
        assert_eq!(k.get(2 + 0, 2 + 1), a.get(1, 1) * b.get(0, 1));
        assert_eq!(k.get(3, 0), a.get(1, 0) * b.get(1, 0));
    }

    #[test]
    fn submatrix_keeps_selected_block() {
        let m = SparseOp::from_dense(3, 3, &(0..9).map(|k| c(k as f64, 0.0)).collect::<Vec<_>>());
        let s = m.submatrix(&[0, 2]);
        assert_eq!(s.to_dense(), vec![c(0., 0.), c(2., 0.), c(6., 0.), c(8., 0.)]);
    }

    proptest! {
        #[test]
        fn matmul_matches_dense(a in small_matrix(4), b in small_matrix(4)) {
            let sa = SparseOp::from_dense(4, 4, &a);
            let sb = SparseOp::from_dense(4, 4, &b);
            prop_assert_eq!(sa.matmul(&sb).to_dense(), dense_mul(&a, &b, 4));
        }

        #[test]
        fn apply_and_adjoint_are_consistent(a in small_matrix(5), x in small_matrix(1).prop_flat_map(|_| prop::collection::vec((-3i32..3, -3i32..3), 5))) {
            let sa = SparseOp::from_dense(5, 5, &a);
            let xv: Vec<C64> = x.iter().map(|&(r, i)| c(r as f64, i as f64)).collect();
            let y1 = sa.adjoint().apply(&xv);
            let mut y2 = vec![ZERO; 5];
            sa.apply_adjoint_into(&xv, &mut y2);
            prop_assert_eq!(y1, y2);
            prop_assert_eq!(sa.adjoint().adjoint(), sa);
        }
    }
}

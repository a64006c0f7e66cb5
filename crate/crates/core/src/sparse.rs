//! Compressed sparse row matrices over complex numbers.
//!
//! Only what the operator algebra and the propagators need: construction from
//! triplets, Kronecker products, sums, products, adjoints and allocation-free
//! matrix–vector products.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.len(),
            diag.iter().enumerate().map(|(i, &v)| (i, i, v)),
        )
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut data: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indptr[r + 1] += 1;
                indices.push(c);
                data.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
        .pruned()
    }

    fn pruned(self) -> Self {
        if self.data.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return self;
        }
        let triplets: Vec<_> = self.triplets().filter(|t| t.2 != C64::new(0.0, 0.0)).collect();
        let mut indptr = vec![0usize; self.nrows + 1];
        for &(r, _, _) in &triplets {
            indptr[r + 1] += 1;
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices: triplets.iter().map(|t| t.1).collect(),
            data: triplets.iter().map(|t| t.2).collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn is_zero(&self) -> bool {
        self.data.is_empty()
    }

    /// Iterates stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&c) {
            Ok(k) => self.data[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out.pruned()
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// Kronecker product `self ⊗ other`; `self` indexes the slow (major) factor.
    pub fn kron(&self, other: &CsrMatrix) -> Self {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() * other.nnz());
        let mut data = Vec::with_capacity(self.nnz() * other.nnz());
        indptr.push(0);
        for ra in 0..self.nrows {
            for rb in 0..other.nrows {
                for (ca, va) in self.row(ra) {
                    for (cb, vb) in other.row(rb) {
                        indices.push(ca * other.ncols + cb);
                        data.push(va * vb);
                    }
                }
                indptr.push(indices.len());
            }
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
        .pruned()
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut triplets = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut touched = Vec::new();
        let mut seen = vec![false; other.ncols];
        for r in 0..self.nrows {
            for (k, va) in self.row(r) {
                for (c, vb) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += va * vb;
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = C64::new(0.0, 0.0);
                seen[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, triplets)
    }

    fn combine(&self, other: &CsrMatrix, sign: f64) -> Self {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "shape mismatch"
        );
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .chain(other.triplets().map(|(r, c, v)| (r, c, v * sign))),
        )
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &CsrMatrix) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `y = self · x`.
    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// `y += factor · self · x`.
    pub fn mul_vec_add(&self, factor: C64, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *out += factor * acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `⟨x|self|x⟩` without allocating.
    pub fn quadratic_form(&self, x: &[C64]) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for (r, xr) in x.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            total += xr.conj() * acc;
        }
        total
    }

    /// Largest absolute row sum; bounds the spectral radius.
    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        (self - other).data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Add for &CsrMatrix {
    type Output = CsrMatrix;
    fn add(self, rhs: &CsrMatrix) -> CsrMatrix {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &CsrMatrix {
    type Output = CsrMatrix;
    fn sub(self, rhs: &CsrMatrix) -> CsrMatrix {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &CsrMatrix {
    type Output = CsrMatrix;
    fn mul(self, rhs: &CsrMatrix) -> CsrMatrix {
        self.matmul(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CsrMatrix> {
        proptest::collection::vec(
            (0..rows, 0..cols, -2i32..=2, -2i32..=2),
            0..(rows * cols),
        )
        .prop_map(move |entries| {
            CsrMatrix::from_triplets(
                rows,
                cols,
                entries
                    .into_iter()
                    .map(|(r, cc, re, im)| (r, cc, c(re as f64, im as f64))),
            )
        })
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            [(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 0, c(2.0, 1.0)), (1, 0, c(1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), c(3.0, 1.0));
        assert_eq!(m.get(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn kron_matches_block_layout() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 1, c(1.0, 0.0)), (1, 0, c(2.0, 0.0))]);
        let b = CsrMatrix::from_triplets(2, 2, [(0, 0, c(1.0, 0.0)), (1, 1, c(0.0, 1.0))]);
        let k = a.kron(&b).to_dense();
        assert_eq!(k[(0, 2)], c(1.0, 0.0));
        assert_eq!(k[(1, 3)], c(0.0, 1.0));
        assert_eq!(k[(2, 0)], c(2.0, 0.0));
        assert_eq!(k[(3, 1)], c(0.0, 2.0));
        assert_eq!(a.kron(&b).nnz(), 4);
    }

    #[test]
    fn identity_is_neutral() {
        let m = CsrMatrix::from_triplets(3, 3, [(0, 2, c(1.0, -1.0)), (2, 1, c(0.5, 0.0))]);
        let id = CsrMatrix::identity(3);
        assert_eq!(&id * &m, m);
        assert_eq!(&m * &id, m);
    }

    proptest! {
        #[test]
        fn sparse_ops_agree_with_dense(a in arb_matrix(4, 3), b in arb_matrix(3, 5), x in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let prod = (&a * &b).to_dense();
            let dense = a.to_dense() * b.to_dense();
            prop_assert!((prod - dense).norm() < 1e-12);
            let xv: Vec<C64> = x.iter().map(|&v| c(v, 0.5 * v)).collect();
            let y = a.mul_vec(&xv);
            let yd = a.to_dense() * nalgebra::DVector::from_vec(xv.clone());
            for (u, v) in y.iter().zip(yd.iter()) {
                prop_assert!((u - v).norm() < 1e-12);
            }
            prop_assert!((a.adjoint().to_dense() - a.to_dense().adjoint()).norm() == 0.0);
            let k = a.kron(&b).to_dense();
            let (ad, bd) = (a.to_dense(), b.to_dense());
            prop_assert!((k - ad.kronecker(&bd)).norm() < 1e-12);
        }
    }
}

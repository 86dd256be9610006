//! Dense row-major matrices and the Cholesky kernels the sampler is built on.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!("{} entries", rows * cols), format!("{}", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::shape(format!("{ncols} columns"), format!("{} in row {i}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols: ncols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Columns `[start, end)`.
    pub fn column_block(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(k), out_row);
                }
            }
        }
        out
    }

    /// `selfᵀ * other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "t_matmul row counts");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, b, &mut out.data[i * other.cols..(i + 1) * other.cols]);
                }
            }
        }
        out
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_t column counts");
        let m = other.rows;
        let mut out = Matrix::zeros(self.rows, m);
        for i in 0..self.rows {
            let a = self.row(i);
            let out_row = &mut out.data[i * m..(i + 1) * m];
            let mut j = 0;
            while j + 4 <= m {
                let d = dot4(a, [other.row(j), other.row(j + 1), other.row(j + 2), other.row(j + 3)]);
                out_row[j..j + 4].copy_from_slice(&d);
                j += 4;
            }
            for (k, o) in out_row.iter_mut().enumerate().skip(j) {
                *o = dot(a, other.row(k));
            }
        }
        out
    }

    /// `selfᵀ * self`, symmetric.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut out = Matrix::zeros(n, n);
        for k in 0..self.rows {
            let r = self.row(k);
            for i in 0..n {
                let a = r[i];
                if a != 0.0 {
                    let row = &mut out.data[i * n..i * n + i + 1];
                    axpy(a, &r[..=i], row);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out.data[j * n + i] = out.data[i * n + j];
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (i, &a) in v.iter().enumerate() {
            axpy(a, self.row(i), &mut out);
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        axpy(1.0, &other.data, &mut self.data);
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(dot(&self.data, &self.data))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    // Independent accumulators let the compiler vectorise without
    // reassociation flags.
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Four dot products sharing the left operand, so each of its elements
/// is loaded once.
#[inline]
fn dot4(a: &[f64], b: [&[f64]; 4]) -> [f64; 4] {
    let n = a.len();
    let b = b.map(|r| &r[..n]);
    let mut acc = [[0.0f64; 4]; 4];
    let mut i = 0;
    while i + 4 <= n {
        let x = &a[i..i + 4];
        for (k, row) in b.iter().enumerate() {
            let y = &row[i..i + 4];
            for l in 0..4 {
                acc[k][l] += x[l] * y[l];
            }
        }
        i += 4;
    }
    let mut out = [0.0; 4];
    for k in 0..4 {
        let mut s = (acc[k][0] + acc[k][1]) + (acc[k][2] + acc[k][3]);
        for t in i..n {
            s += a[t] * b[k][t];
        }
        out[k] = s;
    }
    out
}

/// `y += a x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    /// Accepts `a` if it is square and symmetric to 1e-12 relative tolerance.
    /// Positive definiteness is established by factorization, not here.
    pub fn new(a: Matrix) -> Result<Self> {
        if a.rows() != a.cols() || a.rows() == 0 {
            return Err(Error::shape("non-empty square matrix", format!("{}x{}", a.rows(), a.cols())));
        }
        let scale = a.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        for i in 0..a.rows() {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid("spd", format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SpdMatrix(a))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Lower Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

fn try_factor(a: &Matrix, jitter: f64) -> core::result::Result<Matrix, (usize, f64)> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    try_factor_into(a, jitter, &mut l)?;
    Ok(l)
}

/// Writes the lower factor into `l`, whose strict upper triangle must be zero.
fn try_factor_into(a: &Matrix, jitter: f64, l: &mut Matrix) -> core::result::Result<(), (usize, f64)> {
    let n = a.rows();
    for j in 0..n {
        let lj = l.row(j);
        let d = a[(j, j)] + jitter - dot(&lj[..j], &lj[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return Err((j, d));
        }
        let djj = libm::sqrt(d);
        l[(j, j)] = djj;
        for i in j + 1..n {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / djj;
        }
    }
    Ok(())
}

impl Cholesky {
    /// Factors `a`. On failure a single jitter of `1e-10 * trace / dim` is
    /// added to the diagonal and the factorization retried once.
    pub fn factor(a: &SpdMatrix) -> Result<Self> {
        Self::factor_matrix(a.as_matrix())
    }

    pub(crate) fn factor_matrix(a: &Matrix) -> Result<Self> {
        match try_factor(a, 0.0) {
            Ok(l) => Ok(Cholesky { l }),
            Err(_) => {
                let n = a.rows();
                let jitter = 1e-10 * a.trace().abs() / n as f64;
                try_factor(a, jitter)
                    .map(|l| Cholesky { l })
                    .map_err(|(index, pivot)| Error::NotPositiveDefinite { index, pivot })
            }
        }
    }

    /// Factor of the identity, a starting point for [`Cholesky::refactor`].
    pub(crate) fn unit(n: usize) -> Self {
        Cholesky { l: Matrix::identity(n) }
    }

    /// Refactors in place for a matrix of the same dimension, reusing storage.
    pub(crate) fn refactor(&mut self, a: &Matrix) -> Result<()> {
        debug_assert_eq!(a.rows(), self.dim());
        if try_factor_into(a, 0.0, &mut self.l).is_ok() {
            return Ok(());
        }
        let jitter = 1e-10 * a.trace().abs() / a.rows() as f64;
        try_factor_into(a, jitter, &mut self.l).map_err(|(index, pivot)| Error::NotPositiveDefinite { index, pivot })
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn into_l(self) -> Matrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            self.solve_in_place(&mut e);
            inv.set_column(j, &e);
        }
        // symmetrise away rounding
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| libm::log(self.l[(i, i)])).sum::<f64>()
    }
}

/// Lower-triangular `L` with `L Lᵀ = a`.
pub fn cholesky_factor(a: &SpdMatrix) -> Result<Matrix> {
    Cholesky::factor(a).map(Cholesky::into_l)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// matrix columns.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

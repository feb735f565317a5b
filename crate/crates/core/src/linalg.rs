//! Dense row-major matrices and the vectorization identities used by the
//! cost reductions.
//!
//! `vec` stacks columns (column-major order), so for conformable `B, C, D`
//!
//! ```text
//! vec(B C D) = (Dᵀ ⊗ B) vec(C)
//! tr(Bᵀ C)   = vec(B)ᵀ vec(C)
//! ```

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::new",
                format!("{} values for {rows}x{cols}", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// All-ones matrix.
    pub fn ones(rows: usize, cols: usize) -> Self {
        Matrix::filled(rows, cols, 1.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
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

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// In-place `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dims(
                "add_scaled",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dims(op, format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        matmul(self, other)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    /// Matrix-vector product with a plain slice.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dims(
                "mul_vec",
                format!("{}x{} times {}", self.rows, self.cols, x.len()),
            ));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::dims(
            "matmul",
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

/// Kronecker product `[a_ij · B]`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for p in 0..b.rows {
                let dst = (i * b.rows + p) * cols + j * b.cols;
                let src = b.row(p);
                for (o, v) in out.data[dst..dst + b.cols].iter_mut().zip(src) {
                    *o = aij * v;
                }
            }
        }
    }
    out
}

/// Stacks the columns of `m` into one column vector.
pub fn vec(m: &Matrix) -> Matrix {
    Matrix {
        rows: m.len(),
        cols: 1,
        data: vec_values(m),
    }
}

/// Column-stacked entries of `m` as a plain vector.
pub fn vec_values(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for j in 0..m.cols {
        for i in 0..m.rows {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`]: refills a `rows × cols` matrix column by column.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::dims("unvec", format!("{} values for {rows}x{cols}", v.len())));
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| v[j * rows + i]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluates both sides of
/// `tr(B Xᵀ C Y D) = vec(X)ᵀ [(B ⊗ I)ᵀ (Dᵀ ⊗ C)] vec(Y)`
/// and reports whether they agree to 1e-10 relative.
pub fn trace_bilinear_check(b: &Matrix, x: &Matrix, c: &Matrix, y: &Matrix, d: &Matrix) -> Result<bool> {
    let (lhs, rhs) = trace_bilinear_sides(b, x, c, y, d)?;
    let scale = 1.0f64.max(lhs.abs()).max(rhs.abs());
    Ok((lhs - rhs).abs() <= 1e-10 * scale)
}

/// Both sides of the trace identity, `(tr(B Xᵀ C Y D), vec(X)ᵀ Q vec(Y))`.
pub fn trace_bilinear_sides(b: &Matrix, x: &Matrix, c: &Matrix, y: &Matrix, d: &Matrix) -> Result<(f64, f64)> {
    let lhs_mat = b.matmul(&x.transpose())?.matmul(c)?.matmul(y)?.matmul(d)?;
    if lhs_mat.rows() != lhs_mat.cols() {
        return Err(Error::dims(
            "trace_bilinear_check",
            format!("B Xᵀ C Y D is {:?}, not square", lhs_mat.shape()),
        ));
    }
    let lhs = lhs_mat.trace();

    let left = kron(b, &Matrix::identity(x.rows())).transpose();
    let right = kron(&d.transpose(), c);
    let middle = left.matmul(&right)?;
    let vy = middle.mul_vec(&vec_values(y))?;
    let vx = vec_values(x);
    if vx.len() != vy.len() {
        return Err(Error::dims(
            "trace_bilinear_check",
            format!("vec(X) has {} entries, operator yields {}", vx.len(), vy.len()),
        ));
    }
    Ok((lhs, dot(&vx, &vy)))
}

/// Solves `H z = -f` for symmetric positive definite `H`, i.e. the minimizer
/// of `½ zᵀHz + fᵀz`.
pub fn solve_spd(h: &Matrix, f: &[f64]) -> Result<Vec<f64>> {
    let n = h.rows();
    if h.cols() != n || f.len() != n {
        return Err(Error::dims(
            "solve_spd",
            format!("H is {:?}, f has {}", h.shape(), f.len()),
        ));
    }
    let asym = h.max_asymmetry();
    if asym > 1e-9 * (1.0 + h.max_abs()) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let l = cholesky(h)?;
    // forward: L y = -f
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = dot(&row[..i], &y[..i]);
        y[i] = (-f[i] - s) / row[i];
    }
    // backward: Lᵀ z = y
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    Ok(z)
}

/// Lower Cholesky factor. Fails with the pivot index when a pivot drops to
/// 1e-12 of the largest diagonal entry or below.
pub fn cholesky(h: &Matrix) -> Result<Matrix> {
    let n = h.rows();
    let scale = (0..n).fold(0.0f64, |m, i| m.max(h[(i, i)].abs())).max(1e-300);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let pivot = h[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if !(pivot > 1e-12 * scale) {
            return Err(Error::NotPositiveDefinite { index: j, value: pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let (head, tail) = l.data.split_at_mut(i * n);
            let lj = &head[j * n..j * n + j];
            let li = &tail[..j];
            let s = h[(i, j)] - dot(li, lj);
            tail[j] = s / ljj;
        }
    }
    Ok(l)
}

//! Dense vector/matrix kernels and the LU-structured weight representation.
//!
//! A weight matrix is stored as `W = L * U` where `L` is unit lower triangular
//! with trainable strict-lower entries and `U` is upper triangular with
//! trainable strict-upper entries and fixed non-zero diagonal constants.
//! `det(W)` is therefore the product of the diagonal constants and never
//! vanishes, so `W` stays invertible no matter what values training assigns
//! to the off-diagonal entries. Applying `W` and applying `W^-1` are both
//! O(n^2): two triangular matvecs, or forward plus back substitution. The
//! dense `W` is only ever materialized on request.

use std::ops::{Deref, DerefMut, Index};

use crate::error::{Error, Result};

/// Smallest admissible magnitude for a diagonal constant.
pub const DIAG_FLOOR: f64 = 1e-12;

/// Length of a strict triangle for dimension `n`.
#[inline]
pub fn strict_len(n: usize) -> usize {
    n * (n - 1) / 2
}

// ---------------------------------------------------------------------------
// Vector
// ---------------------------------------------------------------------------

/// Owned column vector of f64 values.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    /// Boundary constructor: rejects NaN/Inf entries, naming `context` in the error.
    pub fn finite(data: Vec<f64>, context: &str) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(context.to_string()));
        }
        Ok(Vector { data })
    }

    pub fn zeros(dim: usize) -> Self {
        Vector {
            data: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max absolute componentwise difference.
    pub fn inf_dist(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Vector::new(
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector::new(data)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { data, rows: r, cols: c })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.dim(),
            });
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            out.push(self.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum());
        }
        Ok(Vector::new(out))
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// TriangularParams
// ---------------------------------------------------------------------------

/// Parameters of one LU-structured weight matrix.
///
/// `l` holds the strict-lower entries of `L` and `u` the strict-upper entries
/// of `U`, both in row-major order; each has length `n(n-1)/2`. `k` holds the
/// `n` diagonal constants of `U`. The diagonal of `L` is implicitly 1. The
/// constants in `k` are fixed at construction and never receive gradients,
/// which pins `det(W) = prod(k)` for the lifetime of the value.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularParams {
    n: usize,
    l: Vec<f64>,
    u: Vec<f64>,
    k: Vec<f64>,
}

/// Flat index of strict-lower entry `(i, j)`, `i > j`, row-major.
#[inline]
pub fn lower_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

/// Flat index of strict-upper entry `(i, j)`, `i < j`, row-major for dimension `n`.
#[inline]
pub fn upper_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    upper_row_offset(n, i) + (j - i - 1)
}

impl TriangularParams {
    pub fn new(n: usize, l: Vec<f64>, u: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let m = strict_len(n);
        if l.len() != m {
            return Err(Error::InvalidParameter(format!(
                "strict-lower length {} does not match n(n-1)/2 = {} for n = {}",
                l.len(),
                m,
                n
            )));
        }
        if u.len() != m {
            return Err(Error::InvalidParameter(format!(
                "strict-upper length {} does not match n(n-1)/2 = {} for n = {}",
                u.len(),
                m,
                n
            )));
        }
        if k.len() != n {
            return Err(Error::InvalidParameter(format!(
                "diagonal length {} does not match n = {}",
                k.len(),
                n
            )));
        }
        for (index, &ki) in k.iter().enumerate() {
            if !ki.is_finite() || ki.abs() < DIAG_FLOOR {
                return Err(Error::SingularDiagonal {
                    index,
                    magnitude: ki.abs(),
                    floor: DIAG_FLOOR,
                });
            }
        }
        Ok(TriangularParams { n, l, u, k })
    }

    /// Identity weight: zero strict triangles, unit diagonal.
    pub fn identity(n: usize) -> Self {
        let m = strict_len(n);
        TriangularParams {
            n,
            l: vec![0.0; m],
            u: vec![0.0; m],
            k: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Mutable access to the trainable strict-lower entries.
    pub fn l_mut(&mut self) -> &mut [f64] {
        &mut self.l
    }

    /// Mutable access to the trainable strict-upper entries.
    pub fn u_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    /// Number of trainable entries (`l` plus `u`).
    pub fn trainable_len(&self) -> usize {
        2 * strict_len(self.n)
    }

    /// Dense `L`: 1 on the diagonal, `l` below, 0 above.
    pub fn materialize_lower(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                m.set(i, j, self.l[lower_index(i, j)]);
            }
            m.set(i, i, 1.0);
        }
        m
    }

    /// Dense `U`: `k` on the diagonal, `u` above, 0 below.
    pub fn materialize_upper(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, self.k[i]);
            for j in (i + 1)..n {
                m.set(i, j, self.u[upper_index(n, i, j)]);
            }
        }
        m
    }

    /// Dense `W = L * U`.
    pub fn compose_weight(&self) -> Matrix {
        self.materialize_lower()
            .matmul(&self.materialize_upper())
            .expect("L and U are square of equal dimension")
    }

    /// `det(W) = det(L) * det(U) = prod(k)`, computed without touching `l` or `u`.
    pub fn determinant(&self) -> f64 {
        self.k.iter().product()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }

    /// `W x` computed as `L (U x)`: two triangular matvecs, no dense `W`.
    pub fn apply_weight(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x.dim())?;
        let z = self.apply_upper(x);
        Ok(Vector::new(self.apply_lower(&z)))
    }

    /// Solve `W x = b` by forward substitution on `L` then back substitution
    /// on `U`. O(n^2); the dense inverse is never formed.
    pub fn solve_weight(&self, b: &Vector) -> Result<Vector> {
        self.check_dim(b.dim())?;
        let z = self.solve_lower(b);
        Ok(Vector::new(self.solve_upper(&z)?))
    }

    /// Exact induced 1-norm condition number `||W||_1 * ||W^-1||_1`,
    /// column by column via applies and solves.
    pub fn condition_1norm(&self) -> Result<f64> {
        let n = self.n;
        let mut e = Vector::zeros(n);
        let mut w_norm: f64 = 0.0;
        let mut winv_norm: f64 = 0.0;
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply_weight(&e)?;
            w_norm = w_norm.max(col.iter().map(|v| v.abs()).sum());
            let inv_col = self.solve_weight(&e)?;
            winv_norm = winv_norm.max(inv_col.iter().map(|v| v.abs()).sum());
            e[j] = 0.0;
        }
        Ok(w_norm * winv_norm)
    }

    // -- triangular kernels -------------------------------------------------

    /// `z = U x`.
    pub(crate) fn apply_upper(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            let off = upper_row_offset(n, i);
            let dot: f64 = self.u[off..off + (n - 1 - i)]
                .iter()
                .zip(&x[i + 1..])
                .map(|(a, b)| a * b)
                .sum();
            z.push(self.k[i] * x[i] + dot);
        }
        z
    }

    /// `y = L z`.
    pub(crate) fn apply_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let off = lower_row_offset(i);
            let dot: f64 = self.l[off..off + i]
                .iter()
                .zip(&z[..i])
                .map(|(a, b)| a * b)
                .sum();
            y.push(z[i] + dot);
        }
        y
    }

    /// Forward substitution: solve `L z = b` (unit diagonal).
    pub(crate) fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            let off = lower_row_offset(i);
            let dot: f64 = self.l[off..off + i]
                .iter()
                .zip(&z[..i])
                .map(|(a, b)| a * b)
                .sum();
            z.push(b[i] - dot);
        }
        z
    }

    /// Back substitution: solve `U x = z`.
    pub(crate) fn solve_upper(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let off = upper_row_offset(n, i);
            let dot: f64 = self.u[off..off + (n - 1 - i)]
                .iter()
                .zip(&x[i + 1..])
                .map(|(a, b)| a * b)
                .sum();
            let k = self.k[i];
            if k.abs() < DIAG_FLOOR {
                return Err(Error::SingularDiagonal {
                    index: i,
                    magnitude: k.abs(),
                    floor: DIAG_FLOOR,
                });
            }
            x[i] = (z[i] - dot) / k;
        }
        Ok(x)
    }

    /// `t = L^T g`, accumulated row-major over `l`.
    pub(crate) fn apply_lower_transpose(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut t = g.to_vec();
        for j in 1..n {
            let off = lower_row_offset(j);
            let gj = g[j];
            for (i, &lv) in self.l[off..off + j].iter().enumerate() {
                t[i] += lv * gj;
            }
        }
        t
    }

    /// `d = U^T t`, accumulated row-major over `u`.
    pub(crate) fn apply_upper_transpose(&self, t: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut d: Vec<f64> = (0..n).map(|i| self.k[i] * t[i]).collect();
        for j in 0..n {
            let off = upper_row_offset(n, j);
            let tj = t[j];
            for (m, &uv) in self.u[off..off + (n - 1 - j)].iter().enumerate() {
                d[j + 1 + m] += uv * tj;
            }
        }
        d
    }
}

/// Offset of row `i`'s strict-lower block in `l`.
#[inline]
pub(crate) fn lower_row_offset(i: usize) -> usize {
    i * (i.saturating_sub(1)) / 2
}

/// Offset of row `i`'s strict-upper block in `u` for dimension `n`.
#[inline]
pub(crate) fn upper_row_offset(n: usize, i: usize) -> usize {
    i * (n - 1) - i * (i.saturating_sub(1)) / 2
}

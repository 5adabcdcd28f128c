//! Dense row-major matrices and a Hermitian eigensolver.
//!
//! The eigensolver reduces a Hermitian matrix to real symmetric tridiagonal
//! form with complex Householder reflections, removes the phases of the
//! off-diagonal with a diagonal unitary, and finishes with implicit QL
//! iterations. Real symmetric problems go through the same path.

use alloc::vec;
use alloc::vec::Vec;

use libm::{hypot, sqrt};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major real matrix. Also used as the instance-by-feature matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
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

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        if self.rows > 0 {
            let n = self.rows as f64;
            mean.iter_mut().for_each(|m| *m /= n);
        }
        mean
    }

    /// Keeps the rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
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
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn conj_transpose(&self) -> CMatrix {
        let mut t = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].conj();
            }
        }
        t
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^H * self`, exploiting Hermitian symmetry of the result.
    pub fn gram(&self) -> CMatrix {
        let n = self.cols;
        let t = self.conj_transpose();
        let mut g = CMatrix::zeros(n, n);
        for i in 0..n {
            let ri = t.row(i);
            for j in i..n {
                let rj = t.row(j);
                let mut s = Complex64::new(0.0, 0.0);
                for (a, b) in ri.iter().zip(rj) {
                    s += a * b.conj();
                }
                // g[i][j] = sum_r conj(X[r][i]) X[r][j] = sum_r t[i][r] conj(t[j][r])
                g[(i, j)] = s;
                g[(j, i)] = s.conj();
            }
        }
        g
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// `vectors[c]` is the unit eigenvector for `values[c]`.
    pub vectors: Vec<Vec<Complex64>>,
}

/// Full eigen-decomposition of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    hermitian_eigen_top(a, a.rows())
}

/// Eigenvalues of a Hermitian matrix (all of them) and the eigenvectors of
/// the `k` largest, in descending eigenvalue order.
pub fn hermitian_eigen_top(a: &CMatrix, k: usize) -> Result<HermitianEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.cols(),
        });
    }
    if k > n {
        return Err(crate::error::param("requested more eigenvectors than rows"));
    }
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    if a.data
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Format("non-finite matrix entry".into()));
    }

    let tri = tridiagonalize(a.clone());
    let mut d = tri.diag.clone();
    let mut e = tri.sub_abs.clone();
    // z[c] holds eigenvector c of the real tridiagonal matrix.
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut col = vec![0.0; n];
            col[c] = 1.0;
            col
        })
        .collect();
    tql2(&mut d, &mut e, &mut z);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = order[..k]
        .iter()
        .map(|&c| tri.back_transform(&z[c]))
        .collect();
    Ok(HermitianEigen { values, vectors })
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues descending.
pub fn symmetric_eigen_top(a: &Matrix, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.rows();
    let mut c = CMatrix::zeros(n, a.cols());
    for i in 0..n {
        for j in 0..a.cols() {
            c[(i, j)] = Complex64::new(a[(i, j)], 0.0);
        }
    }
    let eig = hermitian_eigen_top(&c, k)?;
    // A real symmetric input keeps the reduction real, so imaginary parts are
    // rounding noise.
    let vecs = eig
        .vectors
        .into_iter()
        .map(|v| v.into_iter().map(|z| z.re).collect())
        .collect();
    Ok((eig.values, vecs))
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// |T[i+1][i]|, with a trailing zero.
    sub_abs: Vec<f64>,
    /// Phase of each basis vector after making the off-diagonal real.
    phase: Vec<Complex64>,
    /// Householder vectors; reflector `k` acts on indices `k+1..n`.
    reflectors: Vec<Option<Vec<Complex64>>>,
}

impl Tridiagonal {
    fn back_transform(&self, z: &[f64]) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = z.iter().zip(&self.phase).map(|(&x, &p)| p * x).collect();
        for (k, refl) in self.reflectors.iter().enumerate().rev() {
            if let Some(v) = refl {
                let tail = &mut w[k + 1..];
                let mut dot = Complex64::new(0.0, 0.0);
                for (vi, wi) in v.iter().zip(tail.iter()) {
                    dot += vi.conj() * wi;
                }
                let s = dot * 2.0;
                for (vi, wi) in v.iter().zip(tail.iter_mut()) {
                    *wi -= vi * s;
                }
            }
        }
        w
    }
}

fn tridiagonalize(mut m: CMatrix) -> Tridiagonal {
    let n = m.rows();
    let mut sub = vec![Complex64::new(0.0, 0.0); n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    let mut q = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x: Vec<Complex64> = (k + 1..n).map(|i| m[(i, k)]).collect();
        let xnorm = sqrt(x.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if xnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let x0abs = hypot(x[0].re, x[0].im);
        let phase = if x0abs > 0.0 {
            x[0] / x0abs
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        v.iter_mut().for_each(|z| *z /= vnorm);

        // p = A22 v
        let off = k + 1;
        for i in 0..len {
            let row = &m.row(off + i)[off..];
            let mut s = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(&v) {
                s += a * b;
            }
            p[i] = s;
        }
        let mut kk = Complex64::new(0.0, 0.0);
        for i in 0..len {
            kk += v[i].conj() * p[i];
        }
        for i in 0..len {
            q[i] = (p[i] - v[i] * kk.re) * 2.0;
        }
        // A22 -= v q^H + q v^H
        for i in 0..len {
            let (vi, qi) = (v[i], q[i]);
            let row = &mut m.row_mut(off + i)[off..];
            for j in 0..len {
                row[j] -= vi * q[j].conj() + qi * v[j].conj();
            }
        }
        // Column k below the diagonal is now alpha * e1.
        for i in off..n {
            m[(i, k)] = Complex64::new(0.0, 0.0);
            m[(k, i)] = Complex64::new(0.0, 0.0);
        }
        m[(off, k)] = alpha;
        m[(k, off)] = alpha.conj();
        sub[k] = alpha;
        reflectors.push(Some(v));
    }
    if n >= 2 {
        sub[n - 2] = m[(n - 1, n - 2)];
    }
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();

    let mut phase = vec![Complex64::new(1.0, 0.0); n];
    let mut sub_abs = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let a = hypot(sub[k].re, sub[k].im);
        sub_abs[k] = a;
        phase[k + 1] = if a > 0.0 {
            phase[k] * (sub[k] / a)
        } else {
            phase[k]
        };
    }
    Tridiagonal {
        diag,
        sub_abs,
        phase,
        reflectors,
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. `d` holds the diagonal,
/// `e[i]` the element coupling `i` and `i + 1` (last entry ignored). On
/// return `d` holds eigenvalues and `z[c]` the matching eigenvector.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [Vec<f64>]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 * n {
                    break;
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = z.split_at_mut(i + 1);
                    let zi = &mut lo[i];
                    let zi1 = &mut hi[0];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let hb = *b;
                        *b = s * *a + c * hb;
                        *a = c * *a - s * hb;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

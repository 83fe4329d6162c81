//! Small dense square matrices for the moment recursions.

use std::ops::{Index, IndexMut};

use crate::error::{check_dim, Error, Result};

/// Row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            check_dim(n, r.len())?;
        }
        Ok(Matrix::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `max |A - A^T|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        check_dim(self.n, other.n)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: f64, other: &Matrix) -> Result<()> {
        check_dim(self.n, other.n)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// `self += s * (other + other^T)`
    pub fn add_scaled_sym(&mut self, s: f64, other: &Matrix) -> Result<()> {
        check_dim(self.n, other.n)?;
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] += s * (other.data[i * n + j] + other.data[j * n + i]);
            }
        }
        Ok(())
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, v.len())?;
        Ok((0..self.n).map(|i| dot(self.row(i), v)).collect())
    }

    /// `v^T A v`
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        let av = self.matvec(v)?;
        Ok(dot(v, &av))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_dim(a.n, b.n)?;
    let n = a.n;
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a.data[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * n..(k + 1) * n];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (o, bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `tr(A B) = sum_ij A_ij B_ji`, without forming the product.
pub fn trace_of_product(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_dim(a.n, b.n)?;
    let n = a.n;
    let mut t = 0.0;
    for i in 0..n {
        for j in 0..n {
            t += a.data[i * n + j] * b.data[j * n + i];
        }
    }
    Ok(t)
}

/// `a b^T`
pub fn outer(a: &[f64], b: &[f64]) -> Result<Matrix> {
    check_dim(a.len(), b.len())?;
    Ok(Matrix::from_fn(a.len(), |i, j| a[i] * b[j]))
}

/// `(A + A^T) / 2`
pub fn symmetrize(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    let n = a.n;
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            out[(i, j)] = m;
            out[(j, i)] = m;
        }
    }
    out
}

/// Stationary autocovariance of `x_n = coeff x_{n-1} + nu_n` over `len`
/// consecutive lags: `[R]_ij = signal_var * coeff^|i - j|`.
pub fn ar1_correlation(len: usize, coeff: f64, signal_var: f64) -> Result<Matrix> {
    if len == 0 {
        return Err(Error::domain("filter length must be at least 1"));
    }
    if !coeff.is_finite() || coeff.abs() >= 1.0 {
        return Err(Error::domain(format!(
            "AR(1) coefficient {coeff} is not stationary"
        )));
    }
    if !(signal_var > 0.0 && signal_var.is_finite()) {
        return Err(Error::domain(format!(
            "signal variance {signal_var} must be positive"
        )));
    }
    let lags: Vec<f64> = (0..len)
        .scan(1.0, |p, _| {
            let cur = *p;
            *p *= coeff;
            Some(cur * signal_var)
        })
        .collect();
    Ok(Matrix::from_fn(len, |i, j| lags[i.abs_diff(j)]))
}

//! Small dense matrix kernels: thin SVD, singular value thresholding and
//! ridge-regularized block least squares.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix from a buffer of length {}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shapes");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shapes");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "distance shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Thin SVD `a = u · diag(singular_values) · vt`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `m × r`, orthonormal columns.
    pub u: Matrix,
    /// Length `r = min(m, n)`, nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `r × n`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    /// `u · diag(weights) · vt`, skipping zero weights.
    pub fn recompose_with(&self, weights: &[f64]) -> Matrix {
        let (m, n) = (self.u.rows(), self.vt.cols());
        let mut out = Matrix::zeros(m, n);
        for (t, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let vrow = self.vt.row(t);
            for r in 0..m {
                let coef = w * self.u.get(r, t);
                if coef == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[r * n..(r + 1) * n];
                for (o, &v) in out_row.iter_mut().zip(vrow) {
                    *o += coef * v;
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.recompose_with(&self.singular_values)
    }
}

/// Thin SVD by Householder bidiagonalization followed by implicit-shift QR.
pub fn thin_svd(a: &Matrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::domain("SVD input contains NaN or infinite entries"));
    }
    let svd = a.to_nalgebra().svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        unreachable!("both singular vector sets were requested");
    };
    let sigma = svd.singular_values;

    // Sort nonincreasing; the decomposition does not guarantee an order.
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&p, &q| sigma[q].total_cmp(&sigma[p]));

    let r = sigma.len();
    let u_sorted = Matrix::from_fn(u.nrows(), r, |row, c| u[(row, order[c])]);
    let vt_sorted = Matrix::from_fn(r, vt.ncols(), |row, c| vt[(order[row], c)]);
    let values = order.iter().map(|&t| sigma[t].max(0.0)).collect();

    Ok(SvdResult {
        u: u_sorted,
        singular_values: values,
        vt: vt_sorted,
    })
}

/// Sum of singular values.
pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    Ok(thin_svd(a)?.singular_values.iter().sum())
}

/// Singular value soft thresholding `U diag(max(σ − δ, 0)) Vᵀ`, the proximal
/// map of `δ‖·‖_*`. Values with `σ == δ` go to zero.
pub fn svt(a: &Matrix, delta: f64) -> Result<Matrix> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!(
            "threshold must be a finite nonnegative number, got {delta}"
        )));
    }
    let svd = thin_svd(a)?;
    let shrunk: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| (s - delta).max(0.0))
        .collect();
    Ok(svd.recompose_with(&shrunk))
}

/// Minimizer of `½‖h·a − x‖² + (ratio/2)‖a − v‖²` for a `p × ℓ` block `h`.
///
/// Solved through the `ℓ × ℓ` normal equations `(hᵀh + ratio·I) a = hᵀx + ratio·v`
/// with a Cholesky factorization.
pub fn ridge_block_solve(h: &Matrix, x: &[f64], v: &[f64], ratio: f64) -> Result<Vec<f64>> {
    let (p, l) = h.shape();
    if x.len() != p || v.len() != l {
        return Err(Error::dim(format!(
            "ridge block {p}x{l} with data length {} and prior length {}",
            x.len(),
            v.len()
        )));
    }
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::domain(format!(
            "ridge ratio must be positive and finite, got {ratio}"
        )));
    }
    let mut gram = vec![0.0; l * l];
    let mut rhs = vec![0.0; l];
    for k in 0..p {
        let row = h.row(k);
        for s in 0..l {
            rhs[s] += row[s] * x[k];
            for t in 0..=s {
                gram[s * l + t] += row[s] * row[t];
            }
        }
    }
    for s in 0..l {
        rhs[s] += ratio * v[s];
        gram[s * l + s] += ratio;
    }
    cholesky_solve_in_place(&mut gram, &mut rhs, l)?;
    Ok(rhs)
}

/// Solve `g · a = rhs` for symmetric positive definite `g` (`n × n`, row-major,
/// lower triangle read). `g` is overwritten by its Cholesky factor and `rhs` by
/// the solution.
pub(crate) fn cholesky_solve_in_place(g: &mut [f64], rhs: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d -= g[j * n + k] * g[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::domain("normal matrix is not positive definite"));
        }
        let d = d.sqrt();
        g[j * n + j] = d;
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= g[i * n + k] * g[j * n + k];
            }
            g[i * n + j] = s / d;
        }
    }
    // L y = rhs
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= g[i * n + k] * rhs[k];
        }
        rhs[i] = s / g[i * n + i];
    }
    // Lᵀ a = y
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= g[k * n + i] * rhs[k];
        }
        rhs[i] = s / g[i * n + i];
    }
    Ok(())
}

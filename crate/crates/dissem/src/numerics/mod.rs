//! Self-contained dense numerical kernels: matrices, linear solves, matrix
//! exponentials, spectral abscissa, fixed-step ODE integration, normal CDFs
//! and Gauss-Legendre quadrature.
//!
//! Everything here is plain `f64` row-major storage. The systems assembled by
//! the moment engines have dimension `d*I` and `d*I*(I+1)/2` with desk-scale
//! `I` and `d`, so dense algebra is both simpler and faster than anything
//! sparse.

mod eigen;
mod expm;
mod normal;
mod ode;
mod quadrature;

pub use eigen::spectral_abscissa;
pub use expm::expm;
pub use normal::{bivariate_normal_cdf, std_normal_cdf};
pub use ode::{integrate_linear_ode, rk4_integrate, OdeSolution};
pub use quadrature::gauss_legendre;

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is numerically singular (pivot {pivot:.3e} below {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },
    #[error("QR iteration did not converge within the budget of {budget} iterations")]
    NoConvergence { budget: usize },
    #[error("non-finite value encountered during {0}")]
    NonFinite(String),
}

/// Dense row-major matrix of `f64`.
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
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from nested rows. Panics if the rows are ragged or any entry is
    /// not finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged row {i} in matrix literal");
            for (j, &v) in row.iter().enumerate() {
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "apply dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:>12.6}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting, followed by
/// one step of iterative refinement.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let x = solve_columns(a, &[b.to_vec()])?;
    let mut x = x.into_iter().next().unwrap();
    // One refinement pass tightens the residual on mildly ill-conditioned
    // systems (e.g. stationary balance equations with disparate rates).
    let r: Vec<f64> = a.apply(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    if let Ok(correction) = solve_columns(a, &[r]) {
        for (xi, ci) in x.iter_mut().zip(&correction[0]) {
            *xi += ci;
        }
    }
    Ok(x)
}

/// Solve `A X = B` where `B` is given column-by-column.
pub fn solve_columns(a: &Matrix, columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::Dimension(format!(
            "solve requires a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let m = columns.len();
    for col in columns {
        if col.len() != n {
            return Err(NumericsError::Dimension(format!(
                "right-hand side length {} does not match matrix dimension {n}",
                col.len()
            )));
        }
    }
    let threshold = 1e-14 * a.inf_norm().max(f64::MIN_POSITIVE);

    // Augmented system [A | B].
    let w = n + m;
    let mut aug = vec![0.0; n * w];
    for i in 0..n {
        for j in 0..n {
            aug[i * w + j] = a[(i, j)];
        }
        for (j, col) in columns.iter().enumerate() {
            aug[i * w + n + j] = col[i];
        }
    }

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = aug[col * w + col].abs();
        for row in col + 1..n {
            let v = aug[row * w + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < threshold {
            return Err(NumericsError::Singular {
                pivot: pivot_val,
                threshold,
            });
        }
        if pivot_row != col {
            for j in 0..w {
                aug.swap(col * w + j, pivot_row * w + j);
            }
        }
        let pivot = aug[col * w + col];
        for row in col + 1..n {
            let factor = aug[row * w + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..w {
                aug[row * w + j] -= factor * aug[col * w + j];
            }
        }
    }

    let mut out = vec![vec![0.0; n]; m];
    for j in 0..m {
        for row in (0..n).rev() {
            let mut sum = aug[row * w + n + j];
            for k in row + 1..n {
                sum -= aug[row * w + k] * out[j][k];
            }
            out[j][row] = sum / aug[row * w + row];
        }
    }
    Ok(out)
}

/// Solve `A X = B` for a matrix right-hand side.
pub fn solve_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::Dimension(format!(
            "solve_matrix: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let cols: Vec<Vec<f64>> = (0..b.cols())
        .map(|j| (0..b.rows()).map(|i| b[(i, j)]).collect())
        .collect();
    let solved = solve_columns(a, &cols)?;
    Ok(Matrix::from_fn(a.rows(), b.cols(), |i, j| solved[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_solve_returns_rhs() {
        let a = Matrix::identity(4);
        let b = vec![1.0, -2.5, 3.0, 0.25];
        let x = solve_linear(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let err = solve_linear(&a, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, NumericsError::Singular { .. }));
    }

    #[test]
    fn random_system_residual() {
        // Deterministic "random" 8x8 via a simple LCG; residual oracle.
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = Matrix::from_fn(8, 8, |i, j| next() + if i == j { 4.0 } else { 0.0 });
        let b: Vec<f64> = (0..8).map(|_| next()).collect();
        let x = solve_linear(&a, &b).unwrap();
        let ax = a.apply(&x);
        let xnorm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bnorm = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bound = 1e-10 * (a.inf_norm() * xnorm + bnorm);
        for (axi, bi) in ax.iter().zip(&b) {
            assert!(
                (axi - bi).abs() <= bound,
                "residual {} above {}",
                (axi - bi).abs(),
                bound
            );
        }
    }

    #[test]
    fn matmul_against_hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let c = a.matmul(&b);
        assert_abs_diff_eq!(c[(0, 0)], 2.0);
        assert_abs_diff_eq!(c[(0, 1)], 1.0);
        assert_abs_diff_eq!(c[(1, 0)], 4.0);
        assert_abs_diff_eq!(c[(1, 1)], 3.0);
    }
}

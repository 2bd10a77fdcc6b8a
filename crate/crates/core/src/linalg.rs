//! Dense row-major matrices and a partial-pivoting linear solver.

use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Pivots whose magnitude relative to their row scale falls below this are
/// treated as zero.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    SingularSystem { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

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

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Ok(Matrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `x^T A`, i.e. a row vector times the matrix.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += xr * a;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Solves `A x = rhs` by Gaussian elimination with scaled partial pivoting.
pub fn solve_linear_system(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::DimensionMismatch(format!("{}x{} is not square", n, a.cols())));
    }
    if rhs.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has {} entries, expected {n}",
            rhs.len()
        )));
    }
    let mut m = a.clone();
    let mut b = rhs.to_vec();
    let scale: Vec<f64> =
        (0..n).map(|r| m.row(r).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))).collect();
    let mut scale = scale;

    for col in 0..n {
        let (pivot_row, rel) = (col..n)
            .map(|r| {
                let rel = if scale[r] > 0.0 { m[(r, col)].abs() / scale[r] } else { 0.0 };
                (r, rel)
            })
            .fold((col, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
        if rel < PIVOT_TOL {
            return Err(LinalgError::SingularSystem { column: col, pivot: m[(pivot_row, col)] });
        }
        if pivot_row != col {
            for c in 0..n {
                m.data.swap(pivot_row * n + c, col * n + c);
            }
            b.swap(pivot_row, col);
            scale.swap(pivot_row, col);
        }
        let pivot = m[(col, col)];
        for r in col + 1..n {
            let factor = m[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            m[(r, col)] = 0.0;
            for c in col + 1..n {
                let v = m[(col, c)];
                m[(r, c)] -= factor * v;
            }
            b[r] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| m[(r, c)] * x[c]).sum();
        x[r] = (b[r] - tail) / m[(r, r)];
    }
    Ok(x)
}

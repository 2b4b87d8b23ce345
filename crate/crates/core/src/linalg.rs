//! Dense row-major matrices and a small SPD solver.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }
}

impl<T> Mat<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        crate::error::check_len("matrix data", rows * cols, data.len())?;
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

impl<T: Copy> Mat<T> {
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }
}

/// Solves `M X = B` for symmetric positive definite `M` (n×n) and several
/// right-hand sides `B` (n×m), both row-major. Returns X (n×m).
pub fn solve_spd(m: &[f64], n: usize, b: &[f64], rhs: usize) -> Result<Vec<f64>> {
    crate::error::check_len("spd matrix", n * n, m.len())?;
    crate::error::check_len("spd right-hand side", n * rhs, b.len())?;
    // Cholesky: m = L Lᵀ
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for t in 0..j {
                s -= l[i * n + t] * l[j * n + t];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::invalid("matrix is not positive definite"));
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    for c in 0..rhs {
        for i in 0..n {
            let mut s = x[i * rhs + c];
            for t in 0..i {
                s -= l[i * n + t] * x[t * rhs + c];
            }
            x[i * rhs + c] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i * rhs + c];
            for t in i + 1..n {
                s -= l[t * n + i] * x[t * rhs + c];
            }
            x[i * rhs + c] = s / l[i * n + i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_solve_recovers_solution() {
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let x_true = [1.0, -2.0, 0.5, 3.0, 0.25, -1.0];
        let mut b = [0.0; 6];
        for i in 0..3 {
            for c in 0..2 {
                b[i * 2 + c] = (0..3).map(|t| m[i * 3 + t] * x_true[t * 2 + c]).sum();
            }
        }
        let x = solve_spd(&m, 3, &b, 2).unwrap();
        for (a, e) in x.iter().zip(x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn spd_rejects_indefinite() {
        assert!(solve_spd(&[1.0, 2.0, 2.0, 1.0], 2, &[1.0, 1.0], 1).is_err());
    }
}

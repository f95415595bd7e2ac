#![allow(dead_code)]

use nalgebra::DMatrix;
use overparam::matcore::Matrix;
use proptest::prelude::*;

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-scale..scale, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

pub fn sized_matrix(max_rows: usize, max_cols: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(move |(r, c)| matrix(r, c, scale))
}

/// Independent fractional power through nalgebra's symmetric eigensolver.
pub fn na_psd_power(a: &Matrix, alpha: f64) -> Matrix {
    let n = a.rows();
    if alpha == 0.0 {
        return Matrix::identity(n);
    }
    let eig = nalgebra::SymmetricEigen::new(to_na(a));
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = 16.0 * n as f64 * f64::EPSILON * top;
    let mut out = DMatrix::zeros(n, n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= cutoff {
            continue;
        }
        let q = eig.eigenvectors.column(i);
        out += l.powf(alpha) * q * q.transpose();
    }
    from_na(&out)
}

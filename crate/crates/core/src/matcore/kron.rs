use super::matrix::Matrix;

/// Kronecker product: block `(i, j)` of the result is `a[i, j] · b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Matrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Stacks the columns of `a` into one vector (column-first order).
pub fn vec(a: &Matrix) -> Vec<f64> {
    let (rows, cols) = a.shape();
    (0..cols)
        .flat_map(|j| (0..rows).map(move |i| (i, j)))
        .map(|idx| a[idx])
        .collect()
}

/// Inverse of [`vec`].
pub fn unvec(values: &[f64], rows: usize, cols: usize) -> Matrix {
    assert_eq!(values.len(), rows * cols, "unvec length mismatch");
    Matrix::from_fn(rows, cols, |i, j| values[j * rows + i])
}

/// `m · x` for a plain vector `x`.
pub fn mat_vec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.cols(), x.len(), "mat_vec shape mismatch");
    (0..m.rows())
        .map(|i| m.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor_gives_block_diagonal() {
        let b = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let k = kron(&Matrix::identity(2), &b);
        let expected = Matrix::from_rows(&[
            &[1.0, 2.0, 0.0, 0.0],
            &[3.0, 4.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 2.0],
            &[0.0, 0.0, 3.0, 4.0],
        ]);
        assert_eq!(k, expected);
    }

    #[test]
    fn row_times_column() {
        let k = kron(&Matrix::row_vector(&[1.0, 2.0]), &Matrix::from_rows(&[&[3.0], &[4.0]]));
        assert_eq!(k, Matrix::from_rows(&[&[3.0, 6.0], &[4.0, 8.0]]));
    }

    #[test]
    fn vec_is_column_first() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(vec(&a), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&vec(&a), 2, 2), a);
        assert_eq!(vec(&Matrix::row_vector(&[5.0, 6.0, 7.0])), vec![5.0, 6.0, 7.0]);
    }
}

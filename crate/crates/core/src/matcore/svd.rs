//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! The algorithm is fully deterministic: sweeps visit column pairs in a fixed
//! order and nothing is randomized, so identical inputs give bit-identical
//! factors.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `a = u · diag(s) · vᵀ` with `p = min(rows, cols)` triplets.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// `k × p`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `d × p`, orthonormal columns.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &sigma) in self.s.iter().enumerate() {
            for i in 0..us.rows() {
                us[(i, j)] *= sigma;
            }
        }
        us.matmul_t(&self.v)
    }

    /// Singular values at or below the numerical rank threshold, reported as
    /// exact zeros.
    pub fn snapped_values(&self) -> Vec<f64> {
        let dim = self.u.rows().max(self.v.rows()) as f64;
        let top = self.s.first().copied().unwrap_or(0.0);
        let cutoff = (16.0 * dim * f64::EPSILON).sqrt() * top;
        self.s
            .iter()
            .map(|&s| if s <= cutoff { 0.0 } else { s })
            .collect()
    }
}

pub fn svd(a: &Matrix) -> Result<SvdFactors> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if a.rows() >= a.cols() {
        tall_svd(a)
    } else {
        let t = tall_svd(&a.transpose())?;
        Ok(SvdFactors {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

/// Full bases: `u` is `k × k`, `v` is `d × d`; `s` still has `min(k, d)`
/// entries. Extra columns complete the thin factors orthonormally.
pub fn svd_full(a: &Matrix) -> Result<SvdFactors> {
    let thin = svd(a)?;
    Ok(SvdFactors {
        u: complete_columns(&thin.u, a.rows()),
        s: thin.s,
        v: complete_columns(&thin.v, a.cols()),
    })
}

fn tall_svd(a: &Matrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    // Column-major working copies so rotations touch contiguous memory.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    // Columns below ε‖a‖_F are round-off; rotating against them never
    // satisfies the relative orthogonality test.
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut vcols, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "jacobi svd",
            iterations: MAX_SWEEPS,
        });
    }

    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (dot(c, c).sqrt(), j))
        .collect();
    // Stable sort keeps the result deterministic when values tie.
    order.sort_by(|x, y| y.0.total_cmp(&x.0));

    let top = order.first().map_or(0.0, |o| o.0);
    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut filled = vec![false; n];
    for (slot, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        v.set_column(slot, &vcols[j]);
        if sigma > top * f64::EPSILON * m as f64 && sigma > f64::MIN_POSITIVE {
            let unit: Vec<f64> = cols[j].iter().map(|x| x / sigma).collect();
            u.set_column(slot, &unit);
            filled[slot] = true;
        }
    }
    fill_missing_columns(&mut u, &filled);
    Ok(SvdFactors { u, s, v })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Extends the orthonormal columns of `basis` to `dim` columns.
pub(crate) fn complete_columns(basis: &Matrix, dim: usize) -> Matrix {
    let (rows, have) = basis.shape();
    assert!(dim >= have && rows == dim, "cannot complete {rows}x{have} to {dim}");
    let mut out = Matrix::zeros(rows, dim);
    for j in 0..have {
        out.set_column(j, &basis.column(j));
    }
    let filled: Vec<bool> = (0..dim).map(|j| j < have).collect();
    fill_missing_columns(&mut out, &filled);
    out
}

/// Replaces every column not flagged in `filled` by a unit vector orthogonal
/// to all other columns, drawn from the standard basis by Gram-Schmidt.
fn fill_missing_columns(m: &mut Matrix, filled: &[bool]) {
    let rows = m.rows();
    let mut accepted: Vec<Vec<f64>> = filled
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(j, _)| m.column(j))
        .collect();
    let mut candidate = 0usize;
    for (j, &f) in filled.iter().enumerate() {
        if f {
            continue;
        }
        loop {
            assert!(candidate < rows, "ran out of basis vectors");
            let mut e = vec![0.0; rows];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of classical Gram-Schmidt.
            for _ in 0..2 {
                for b in &accepted {
                    let proj = dot(&e, b);
                    for (x, y) in e.iter_mut().zip(b) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-6 {
                e.iter_mut().for_each(|x| *x /= norm);
                m.set_column(j, &e);
                accepted.push(e);
                break;
            }
        }
    }
}

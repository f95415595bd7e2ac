//! Symmetric eigendecomposition (cyclic Jacobi) and fractional powers of
//! positive semidefinite matrices.

use super::matrix::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Tolerance on asymmetry and on negative eigenvalues, scaled by
/// `max(1, max |a_ij|)`.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`.
    pub vectors: Matrix,
}

/// Eigen-decomposes a symmetric matrix. Only the upper triangle is trusted;
/// the input is symmetrized first.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::Shape(format!("eigen needs a square matrix, got {:?}", a.shape())));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigen input".into()));
    }
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut q = Matrix::identity(n);
    let scale = m.frobenius_norm();

    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                routine: "jacobi eigen",
                iterations: MAX_SWEEPS,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = m[(p, r)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkr) = (m[(k, p)], m[(k, r)]);
                    m[(k, p)] = c * mkp - s * mkr;
                    m[(k, r)] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let (mpk, mrk) = (m[(p, k)], m[(r, k)]);
                    m[(p, k)] = c * mpk - s * mrk;
                    m[(r, k)] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].total_cmp(&m[(y, y)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| q[(i, order[j])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Eigen-decomposition of a validated PSD matrix, reusable for several
/// fractional powers of the same matrix.
///
/// Eigenvalues within `16·n·ε·λ_max` of zero are treated as exact zeros:
/// the fractional power is not Lipschitz at the origin, and round-off in a
/// Gram matrix would otherwise leak `(ε‖a‖)^alpha` into null directions.
#[derive(Clone, Debug)]
pub struct PsdSpectrum {
    values: Vec<f64>,
    vectors: Matrix,
}

impl PsdSpectrum {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!(
                "fractional power needs a square matrix, got {:?}",
                a.shape()
            )));
        }
        let scale = a.max_abs().max(1.0);
        let asym = a.asymmetry();
        if asym > PSD_TOLERANCE * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let eig = symmetric_eigen(a)?;
        let lowest = eig.values.first().copied().unwrap_or(0.0);
        if lowest < -PSD_TOLERANCE * scale {
            return Err(Error::NotPsd(lowest));
        }
        let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
        let cutoff = 16.0 * a.rows() as f64 * f64::EPSILON * top;
        let values = eig
            .values
            .iter()
            .map(|&l| if l <= cutoff { 0.0 } else { l })
            .collect();
        Ok(Self {
            values,
            vectors: eig.vectors,
        })
    }

    /// Clamped, snapped eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `a^alpha` with `0^0 = 1`.
    pub fn power(&self, alpha: f64) -> Matrix {
        let n = self.vectors.rows();
        if alpha == 0.0 {
            return Matrix::identity(n);
        }
        let powered: Vec<f64> = self
            .values
            .iter()
            .map(|&l| if l == 0.0 { 0.0 } else { l.powf(alpha) })
            .collect();
        spectral_sum(&self.vectors, &powered)
    }
}

/// `a^alpha` for symmetric positive semidefinite `a` and `alpha ∈ [0, 1]`,
/// with `0^0 = 1` so that `a^0 = I` for every input.
pub fn psd_frac_power(a: &Matrix, alpha: f64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("exponent {alpha} outside [0, 1]")));
    }
    let spectrum = PsdSpectrum::new(a)?;
    Ok(if alpha == 0.0 {
        Matrix::identity(a.rows())
    } else if alpha == 1.0 {
        a.symmetrized()
    } else {
        spectrum.power(alpha)
    })
}

/// `Q · diag(values) · Qᵀ`.
pub(crate) fn spectral_sum(q: &Matrix, values: &[f64]) -> Matrix {
    let n = q.rows();
    let mut out = Matrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        for i in 0..n {
            let qik = q[(i, k)] * lambda;
            for j in 0..n {
                out[(i, j)] += qik * q[(j, k)];
            }
        }
    }
    out.symmetrized()
}

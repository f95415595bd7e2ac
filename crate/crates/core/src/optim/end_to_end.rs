//! End-to-end update rules: what gradient descent on a depth-`N` linear
//! network does to its end-to-end matrix, written as a preconditioned step on
//! the end-to-end matrix itself. Three routes compute the same direction:
//!
//! * the sandwich sum `Σ_j [W_e W_eᵀ]^{(j−1)/N} · G · [W_eᵀ W_e]^{(N−j)/N}`,
//!   through eigen-decompositions of the two Gram matrices;
//! * an explicit `kd × kd` preconditioner assembled from the SVD of `W_e`,
//!   applied to `vec(G)`;
//! * for one output, `‖W_e‖^{2−2/N} (G + (N−1)·Pr_{W_e}{G})`.
//!
//! None of them depends on the hidden widths of the emulated network.

use super::EndToEndState;
use crate::error::{Error, Result};
use crate::matcore::{mat_vec, svd_full, unvec, vec, Matrix, PsdSpectrum};

fn check_grad(w_e: &Matrix, grad: &Matrix) -> Result<()> {
    if w_e.shape() != grad.shape() {
        return Err(Error::Shape(format!(
            "gradient is {:?} but the end-to-end matrix is {:?}",
            grad.shape(),
            w_e.shape()
        )));
    }
    Ok(())
}

/// Sandwich-sum direction through fractional powers of `W_e W_eᵀ` and
/// `W_eᵀ W_e`.
pub fn e2e_direction_general(w_e: &Matrix, grad: &Matrix, depth: usize) -> Result<Matrix> {
    check_grad(w_e, grad)?;
    if depth == 1 {
        return Ok(grad.clone());
    }
    let left = PsdSpectrum::new(&w_e.matmul_t(w_e))?;
    let right = PsdSpectrum::new(&w_e.t_matmul(w_e))?;
    let n = depth as f64;
    let mut total = Matrix::zeros(grad.rows(), grad.cols());
    for j in 1..=depth {
        let l = left.power((j - 1) as f64 / n);
        let r = right.power((depth - j) as f64 / n);
        total.axpy(1.0, &l.matmul(grad).matmul(&r));
    }
    Ok(total)
}

pub fn e2e_step_general(state: &EndToEndState, grad: &Matrix) -> Result<EndToEndState> {
    let direction = e2e_direction_general(&state.w_e, grad, state.depth())?;
    state.advanced(&direction)
}

/// `Σ_{j=1}^N σ_r^{2(N−j)/N} σ_{r'}^{2(j−1)/N}` with `0^0 = 1`.
pub fn precond_eigenvalue(sigma_r: f64, sigma_rp: f64, depth: usize) -> f64 {
    let n = depth as f64;
    (1..=depth)
        .map(|j| {
            let a = 2.0 * (depth - j) as f64 / n;
            let b = 2.0 * (j - 1) as f64 / n;
            sigma_r.powf(a) * sigma_rp.powf(b)
        })
        .sum()
}

/// The `kd × kd` PSD preconditioner acting on `vec(dL¹/dW)`.
///
/// Eigenvectors are `vec(u_r v_{r'}ᵀ)` over full singular bases of `W_e`,
/// with `σ_r = 0` beyond `min(k, d)` and singular values at the numerical
/// rank threshold snapped to zero.
pub fn precond_matrix(w_e: &Matrix, depth: usize) -> Result<Matrix> {
    let (k, d) = w_e.shape();
    let f = svd_full(w_e)?;
    let snapped = f.snapped_values();
    let sigma = |r: usize| snapped.get(r).copied().unwrap_or(0.0);
    let size = k * d;
    let mut p = Matrix::zeros(size, size);
    for r in 0..k {
        let u = f.u.column(r);
        for rp in 0..d {
            let lambda = precond_eigenvalue(sigma(r), sigma(rp), depth);
            if lambda == 0.0 {
                continue;
            }
            let v = f.v.column(rp);
            // vec(u vᵀ) = v ⊗ u in column-first order.
            let e: Vec<f64> = v.iter().flat_map(|&vj| u.iter().map(move |&ui| vj * ui)).collect();
            for a in 0..size {
                let ea = lambda * e[a];
                if ea == 0.0 {
                    continue;
                }
                for b in 0..size {
                    p[(a, b)] += ea * e[b];
                }
            }
        }
    }
    Ok(p.symmetrized())
}

/// Direction `unvec(P · vec(G))`.
pub fn e2e_direction_vec(w_e: &Matrix, grad: &Matrix, depth: usize) -> Result<Matrix> {
    check_grad(w_e, grad)?;
    let p = precond_matrix(w_e, depth)?;
    Ok(unvec(&mat_vec(&p, &vec(grad)), w_e.rows(), w_e.cols()))
}

pub fn e2e_step_vec(state: &EndToEndState, grad: &Matrix) -> Result<EndToEndState> {
    let direction = e2e_direction_vec(&state.w_e, grad, state.depth())?;
    state.advanced(&direction)
}

/// Projection of `v` onto the direction of `w` (both `1 × d`); zero when
/// `w = 0`.
pub fn project_onto(w: &Matrix, v: &Matrix) -> Matrix {
    assert_eq!(w.shape(), v.shape(), "projection shape mismatch");
    let norm_sq = w.inner(w);
    if norm_sq == 0.0 {
        return Matrix::zeros(w.rows(), w.cols());
    }
    w.scale(w.inner(v) / norm_sq)
}

/// `‖W_e‖^{2−2/N} (G + (N−1)·Pr_{W_e}{G})` for a single-output `W_e`.
pub fn e2e_direction_single(w_e: &Matrix, grad: &Matrix, depth: usize) -> Result<Matrix> {
    check_grad(w_e, grad)?;
    if w_e.rows() != 1 {
        return Err(Error::Shape(format!(
            "single-output rule needs a 1 x d matrix, got {:?}",
            w_e.shape()
        )));
    }
    let n = depth as f64;
    let gain = w_e.frobenius_norm().powf(2.0 - 2.0 / n);
    let mut direction = grad.clone();
    direction.axpy(n - 1.0, &project_onto(w_e, grad));
    Ok(direction.scale(gain))
}

pub fn e2e_step_single(state: &EndToEndState, grad: &Matrix) -> Result<EndToEndState> {
    let direction = e2e_direction_single(&state.w_e, grad, state.depth())?;
    state.advanced(&direction)
}

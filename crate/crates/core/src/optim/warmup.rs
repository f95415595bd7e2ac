//! Scalar overparameterization `w = w₂·w₁` of a single-output linear model.
//! One gradient step on `(w₁, w₂)` moves the product like a step on `w` with
//! an adaptive rate `ρ = η·w₂²` and a momentum-like term `γ·w`,
//! `γ = η·w₂⁻¹·∇_{w₂}`, up to an `O(η²)` remainder.

use crate::error::{Error, Result};
use crate::matcore::Matrix;
use crate::objective::{grad1, LpObjective};

/// `(∇_{w₁}, ∇_{w₂}) = (w₂·∇_w, ⟨w₁, ∇_w⟩)` with `∇_w` taken at `w₂·w₁`.
pub fn warmup_grads(w1: &Matrix, w2: f64, obj: &LpObjective) -> Result<(Matrix, f64)> {
    let g = grad1(&w1.scale(w2), obj)?;
    Ok((g.scale(w2), w1.inner(&g)))
}

pub fn warmup_step(w1: &Matrix, w2: f64, obj: &LpObjective, eta: f64) -> Result<(Matrix, f64)> {
    let (g1, g2) = warmup_grads(w1, w2, obj)?;
    let mut next = w1.clone();
    next.axpy(-eta, &g1);
    let next2 = w2 - eta * g2;
    if !next.is_finite() || !next2.is_finite() {
        return Err(Error::Diverged { loss: f64::NAN });
    }
    Ok((next, next2))
}

/// `(ρ, γ) = (η·w₂², η·w₂⁻¹·∇_{w₂})`.
pub fn warmup_coeffs(w1: &Matrix, w2: f64, obj: &LpObjective, eta: f64) -> Result<(f64, f64)> {
    if w2 == 0.0 {
        return Err(Error::InvalidArgument("w2 must be nonzero".into()));
    }
    let (_, g2) = warmup_grads(w1, w2, obj)?;
    Ok((eta * w2 * w2, eta * g2 / w2))
}

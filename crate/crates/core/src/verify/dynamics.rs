//! Conserved quantities and step-size scaling of the discrete and
//! continuous dynamics.

use crate::error::{Error, Result};
use crate::matcore::Matrix;
use crate::model::{balancedness_residual, end_to_end, LinearNetwork};
use crate::objective::{grad1, LpObjective};
use crate::optim::{flow_rk4_deep, flow_rk4_e2e, gd_step_deep, warmup_coeffs, warmup_step, GdConfig};

/// `‖w₁'w₂' − (w − ρ·∇_w − γ·w)‖` for one warmup step from `(w₁, w₂)`.
pub fn warmup_residual(w1: &Matrix, w2: f64, obj: &LpObjective, eta: f64) -> Result<f64> {
    let (n1, n2) = warmup_step(w1, w2, obj, eta)?;
    let (rho, gamma) = warmup_coeffs(w1, w2, obj, eta)?;
    let w = w1.scale(w2);
    let g = grad1(&w, obj)?;
    let mut predicted = w.scale(1.0 - gamma);
    predicted.axpy(-rho, &g);
    Ok((&n1.scale(n2) - &predicted).frobenius_norm())
}

/// Max balancedness residual along an RK4 trajectory of the deep flow.
pub fn flow_balancedness_drift(
    net: &LinearNetwork,
    obj: &LpObjective,
    config: &GdConfig,
    dt: f64,
    steps: usize,
) -> Result<f64> {
    let traj = flow_rk4_deep(net, obj, config, dt, steps)?;
    Ok(traj.iter().map(balancedness_residual).fold(0.0, f64::max))
}

/// Balancedness residual after `iters` discrete deep GD steps.
pub fn discrete_balancedness_drift(
    net: &LinearNetwork,
    obj: &LpObjective,
    config: &GdConfig,
    iters: usize,
) -> Result<f64> {
    let mut cur = net.clone();
    for _ in 0..iters {
        cur = gd_step_deep(&cur, obj, config)?;
    }
    Ok(balancedness_residual(&cur))
}

/// Max `‖W_N ⋯ W_1 − W_e‖_F` between the deep flow and the end-to-end flow
/// started from the collapse of `net`.
pub fn flow_equivalence_gap(
    net: &LinearNetwork,
    obj: &LpObjective,
    config: &GdConfig,
    dt: f64,
    steps: usize,
) -> Result<f64> {
    let deep = flow_rk4_deep(net, obj, config, dt, steps)?;
    let e2e = flow_rk4_e2e(&end_to_end(net), obj, config, net.depth(), dt, steps)?;
    if deep.len() != e2e.len() {
        return Err(Error::Shape("trajectories differ in length".into()));
    }
    Ok(deep
        .iter()
        .zip(&e2e)
        .map(|(n, w)| (&end_to_end(n) - w).frobenius_norm())
        .fold(0.0, f64::max))
}

//! Fixed-step classical Runge–Kutta for the gradient flows of the deep
//! parameterization and of the end-to-end matrix.

use super::end_to_end::e2e_direction_general;
use super::GdConfig;
use crate::error::{Error, Result};
use crate::matcore::Matrix;
use crate::model::LinearNetwork;
use crate::objective::{grad1, layer_grads, LpObjective};

/// A point of a flow: something that can be moved along a tangent.
pub trait FlowState: Clone {
    /// `self + h·tangent`.
    fn shifted(&self, tangent: &Self, h: f64) -> Self;
    fn is_finite(&self) -> bool;
}

impl FlowState for Matrix {
    fn shifted(&self, tangent: &Self, h: f64) -> Self {
        let mut out = self.clone();
        out.axpy(h, tangent);
        out
    }

    fn is_finite(&self) -> bool {
        Matrix::is_finite(self)
    }
}

impl FlowState for Vec<Matrix> {
    fn shifted(&self, tangent: &Self, h: f64) -> Self {
        self.iter().zip(tangent).map(|(a, t)| a.shifted(t, h)).collect()
    }

    fn is_finite(&self) -> bool {
        self.iter().all(Matrix::is_finite)
    }
}

/// Integrates `ẋ = field(x)` for `steps` steps of size `dt`, calling
/// `observe(i, x_i)` on the initial state and after every step. Returns the
/// final state.
pub fn integrate_rk4<S: FlowState>(
    init: S,
    dt: f64,
    steps: usize,
    mut field: impl FnMut(&S) -> Result<S>,
    mut observe: impl FnMut(usize, &S),
) -> Result<S> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let mut x = init;
    observe(0, &x);
    for i in 1..=steps {
        let k1 = field(&x)?;
        let k2 = field(&x.shifted(&k1, dt / 2.0))?;
        let k3 = field(&x.shifted(&k2, dt / 2.0))?;
        let k4 = field(&x.shifted(&k3, dt))?;
        x = x
            .shifted(&k1, dt / 6.0)
            .shifted(&k2, dt / 3.0)
            .shifted(&k3, dt / 3.0)
            .shifted(&k4, dt / 6.0);
        if !x.is_finite() {
            return Err(Error::Diverged { loss: f64::NAN });
        }
        observe(i, &x);
    }
    Ok(x)
}

/// `Ẇ_j = −ηλ·W_j − η·∂L^N/∂W_j`; returns `steps + 1` networks.
pub fn flow_rk4_deep(
    net: &LinearNetwork,
    obj: &LpObjective,
    config: &GdConfig,
    dt: f64,
    steps: usize,
) -> Result<Vec<LinearNetwork>> {
    let (eta, lambda) = (config.eta(), config.lambda());
    let mut trajectory = Vec::with_capacity(steps + 1);
    integrate_rk4(
        net.weights().to_vec(),
        dt,
        steps,
        |ws: &Vec<Matrix>| {
            let grads = layer_grads(&net.with_weights(ws.clone()), obj)?;
            Ok(ws
                .iter()
                .zip(&grads)
                .map(|(w, g)| {
                    let mut t = w.scale(-eta * lambda);
                    t.axpy(-eta, g);
                    t
                })
                .collect())
        },
        |_, ws| trajectory.push(net.with_weights(ws.clone())),
    )?;
    Ok(trajectory)
}

/// `Ẇ_e = −ηλN·W_e − η·Σ_j [W_e W_eᵀ]^{(j−1)/N} · dL¹/dW · [W_eᵀ W_e]^{(N−j)/N}`.
pub fn e2e_vector_field(w_e: &Matrix, obj: &LpObjective, config: &GdConfig, depth: usize) -> Result<Matrix> {
    let direction = e2e_direction_general(w_e, &grad1(w_e, obj)?, depth)?;
    let mut t = w_e.scale(-config.eta() * config.lambda() * depth as f64);
    t.axpy(-config.eta(), &direction);
    Ok(t)
}

/// Returns `steps + 1` end-to-end matrices.
pub fn flow_rk4_e2e(
    w_e: &Matrix,
    obj: &LpObjective,
    config: &GdConfig,
    depth: usize,
    dt: f64,
    steps: usize,
) -> Result<Vec<Matrix>> {
    if depth == 0 {
        return Err(Error::InvalidArgument("emulated depth must be at least 1".into()));
    }
    let mut trajectory = Vec::with_capacity(steps + 1);
    integrate_rk4(
        w_e.clone(),
        dt,
        steps,
        |w| e2e_vector_field(w, obj, config, depth),
        |_, w| trajectory.push(w.clone()),
    )?;
    Ok(trajectory)
}

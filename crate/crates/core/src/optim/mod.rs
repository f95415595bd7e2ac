//! Update rules: per-layer gradient descent on deep linear networks, the
//! equivalent end-to-end preconditioned rules, continuous flows, the scalar
//! overparameterization warmup, and adaptive baselines.

mod adaptive;
mod deep;
mod end_to_end;
mod flow;
mod warmup;

pub use adaptive::{AdaptiveState, AdaptiveVariant};
pub use deep::gd_step_deep;
pub use end_to_end::{
    e2e_direction_general, e2e_direction_single, e2e_direction_vec, e2e_step_general,
    e2e_step_single, e2e_step_vec, precond_eigenvalue, precond_matrix, project_onto,
};
pub use flow::{e2e_vector_field, flow_rk4_deep, flow_rk4_e2e, integrate_rk4, FlowState};
pub use warmup::{warmup_coeffs, warmup_grads, warmup_step};

use crate::error::{Error, Result};
use crate::matcore::Matrix;

/// Learning rate `η > 0` and weight decay `λ ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdConfig {
    eta: f64,
    lambda: f64,
}

impl GdConfig {
    pub fn new(eta: f64, lambda: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {eta}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight decay must be non-negative, got {lambda}")));
        }
        Ok(Self { eta, lambda })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// End-to-end matrix `W_e` evolved by a rule that emulates depth `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EndToEndState {
    pub w_e: Matrix,
    depth: usize,
    pub config: GdConfig,
}

impl EndToEndState {
    pub fn new(w_e: Matrix, depth: usize, config: GdConfig) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("emulated depth must be at least 1".into()));
        }
        Ok(Self { w_e, depth, config })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `(1 − ηλN)·W_e − η·direction`.
    fn advanced(&self, direction: &Matrix) -> Result<Self> {
        let GdConfig { eta, lambda } = self.config;
        let mut w_e = self.w_e.scale(1.0 - eta * lambda * self.depth as f64);
        w_e.axpy(-eta, direction);
        if !w_e.is_finite() {
            return Err(Error::Diverged { loss: f64::NAN });
        }
        Ok(Self {
            w_e,
            depth: self.depth,
            config: self.config,
        })
    }
}

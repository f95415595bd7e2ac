//! Per-coordinate adaptive baselines: AdaGrad, AdaDelta, Adam.

use crate::error::{Error, Result};
use crate::matcore::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdaptiveVariant {
    AdaGrad { eps: f64 },
    AdaDelta { rho: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl AdaptiveVariant {
    pub fn adagrad() -> Self {
        Self::AdaGrad { eps: 1e-8 }
    }

    pub fn adadelta() -> Self {
        Self::AdaDelta { rho: 0.95, eps: 1e-6 }
    }

    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AdaGrad { .. } => "adagrad",
            Self::AdaDelta { .. } => "adadelta",
            Self::Adam { .. } => "adam",
        }
    }
}

/// Accumulators for one optimized matrix.
///
/// * AdaGrad: `first` is the running sum of squared gradients.
/// * AdaDelta: `first` is the squared-gradient EMA, `second` the squared-update EMA.
/// * Adam: `first` and `second` are the moment EMAs.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveState {
    variant: AdaptiveVariant,
    first: Matrix,
    second: Matrix,
    steps: u64,
}

impl AdaptiveState {
    pub fn new(variant: AdaptiveVariant, rows: usize, cols: usize) -> Self {
        Self {
            variant,
            first: Matrix::zeros(rows, cols),
            second: Matrix::zeros(rows, cols),
            steps: 0,
        }
    }

    pub fn variant(&self) -> AdaptiveVariant {
        self.variant
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Returns the updated `w`; accumulators advance in place.
    pub fn step(&mut self, w: &Matrix, grad: &Matrix, eta: f64) -> Result<Matrix> {
        if w.shape() != grad.shape() || w.shape() != self.first.shape() {
            return Err(Error::Shape(format!(
                "weights {:?}, gradient {:?}, state {:?}",
                w.shape(),
                grad.shape(),
                self.first.shape()
            )));
        }
        let (rows, cols) = w.shape();
        let mut next = w.clone();
        self.steps += 1;
        match self.variant {
            AdaptiveVariant::AdaGrad { eps } => {
                for i in 0..rows {
                    for j in 0..cols {
                        let g = grad[(i, j)];
                        self.first[(i, j)] += g * g;
                        next[(i, j)] -= eta * g / (self.first[(i, j)].sqrt() + eps);
                    }
                }
            }
            AdaptiveVariant::AdaDelta { rho, eps } => {
                for i in 0..rows {
                    for j in 0..cols {
                        let g = grad[(i, j)];
                        let eg = rho * self.first[(i, j)] + (1.0 - rho) * g * g;
                        self.first[(i, j)] = eg;
                        let delta = -((self.second[(i, j)] + eps).sqrt() / (eg + eps).sqrt()) * g;
                        self.second[(i, j)] = rho * self.second[(i, j)] + (1.0 - rho) * delta * delta;
                        next[(i, j)] += eta * delta;
                    }
                }
            }
            AdaptiveVariant::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for i in 0..rows {
                    for j in 0..cols {
                        let g = grad[(i, j)];
                        let m = beta1 * self.first[(i, j)] + (1.0 - beta1) * g;
                        let v = beta2 * self.second[(i, j)] + (1.0 - beta2) * g * g;
                        self.first[(i, j)] = m;
                        self.second[(i, j)] = v;
                        next[(i, j)] -= eta * (m / c1) / ((v / c2).sqrt() + eps);
                    }
                }
            }
        }
        if !next.is_finite() {
            return Err(Error::Diverged { loss: f64::NAN });
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> [AdaptiveVariant; 3] {
        [AdaptiveVariant::adagrad(), AdaptiveVariant::adadelta(), AdaptiveVariant::adam()]
    }

    #[test]
    fn zero_gradient_keeps_weights() {
        let w = Matrix::row_vector(&[1.0, -2.0]);
        let g = Matrix::zeros(1, 2);
        for v in all() {
            let mut state = AdaptiveState::new(v, 1, 2);
            let mut cur = w.clone();
            for _ in 0..10 {
                cur = state.step(&cur, &g, 0.1).unwrap();
            }
            assert_eq!(cur, w, "{}", v.name());
        }
    }

    #[test]
    fn adagrad_first_step() {
        let w = Matrix::row_vector(&[1.0, -2.0]);
        let g = Matrix::row_vector(&[0.5, -3.0]);
        let mut state = AdaptiveState::new(AdaptiveVariant::adagrad(), 1, 2);
        let next = state.step(&w, &g, 0.1).unwrap();
        let expected = Matrix::row_vector(&[1.0 - 0.1 * 0.5 / (0.5 + 1e-8), -2.0 + 0.1 * 3.0 / (3.0 + 1e-8)]);
        assert!(next.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn adam_first_step_is_signed() {
        let w = Matrix::row_vector(&[0.0, 0.0]);
        let g = Matrix::row_vector(&[1e-3, -40.0]);
        let mut state = AdaptiveState::new(AdaptiveVariant::adam(), 1, 2);
        let next = state.step(&w, &g, 0.01).unwrap();
        assert!((next[(0, 0)] + 0.01).abs() < 1e-7);
        assert!((next[(0, 1)] - 0.01).abs() < 1e-7);
        assert_eq!(state.steps(), 1);
    }

    #[test]
    fn adadelta_first_step() {
        // E[g²] = 0.05 g², Δ = −sqrt(ε)/sqrt(0.05 g² + ε)·g
        let g = 2.0;
        let mut state = AdaptiveState::new(AdaptiveVariant::adadelta(), 1, 1);
        let next = state.step(&Matrix::zeros(1, 1), &Matrix::row_vector(&[g]), 1.0).unwrap();
        let expected = -(1e-6f64).sqrt() / (0.05 * g * g + 1e-6f64).sqrt() * g;
        assert!((next[(0, 0)] - expected).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdaptiveState::new(AdaptiveVariant::adam(), 1, 2);
        assert!(state.step(&Matrix::zeros(1, 3), &Matrix::zeros(1, 3), 0.1).is_err());
    }
}

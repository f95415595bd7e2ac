//! Two-coordinate ℓ₄ problem with targets `y₁ ≫ y₂`: the single-output
//! depth-2 rule from an ill-conditioned near-zero start against plain
//! gradient descent at the edge of stability.
//!
//! Gradients are taken per coordinate, `(w_i − y_i)³`, i.e. without the
//! `1/m` average of `L¹`.

use crate::error::Result;
use crate::matcore::Matrix;
use crate::objective::{grad1, Dataset, LpObjective};
use crate::optim::e2e_direction_single;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppBOptions {
    /// Convergence means `|w₂ − y₂| ≤ tolerance`.
    pub tolerance: f64,
    pub max_op_iterations: usize,
    /// Plain descent stops after `cap_factor ×` the overparameterized count.
    pub gd_cap_factor: usize,
    /// Steps used to classify plain descent on coordinate 1 as convergent.
    pub stability_steps: usize,
}

impl Default for AppBOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_op_iterations: 100_000_000,
            gd_cap_factor: 40,
            stability_steps: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppBReport {
    pub y: [f64; 2],
    pub eps: [f64; 2],
    /// `1/(2ε₁y₁²)`.
    pub eta: f64,
    /// `1/(2ε₁y₁)`, the rate the rule induces on `w₂`.
    pub eta_op: f64,
    /// `2/y₁²`, the supremum of stable plain rates.
    pub eta_gd: f64,
    pub warnings: Vec<String>,
    pub after_first_step: [f64; 2],
    pub first_step_relative_error: f64,
    /// Max over steps `t ≥ 1` of `|Δw₂ / (−η^OP (w₂ − y₂)³) − 1|`.
    pub max_step_deviation: f64,
    /// Max `|w₂|` over the overparameterized run.
    pub max_abs_w2: f64,
    pub op_iterations: Option<usize>,
    pub gd_iterations: usize,
    pub gd_capped: bool,
    /// `gd_iterations / op_iterations`; a lower bound when `gd_capped`.
    pub acceleration_ratio: f64,
    pub gd_unstable_at_2_2: bool,
    pub gd_converging_at_1_8: bool,
}

fn precondition_warnings(y1: f64, y2: f64, eps1: f64, eps2: f64) -> Vec<String> {
    let mut w = Vec::new();
    let much = |a: f64, b: f64| a >= 10.0 * b;
    if !much(y1, y2) {
        w.push(format!("y1 = {y1} is not much larger than y2 = {y2}"));
    }
    if !much(y2, eps1) {
        w.push(format!("y2 = {y2} is not much larger than eps1 = {eps1}"));
    }
    if !much(eps1, eps2) {
        w.push(format!("eps1 = {eps1} is not much larger than eps2 = {eps2}"));
    }
    let ratio = (eps1 / eps2) / (y1 / y2);
    if !(0.5..=2.0).contains(&ratio) {
        w.push(format!("eps1/eps2 = {} is far from y1/y2 = {}", eps1 / eps2, y1 / y2));
    }
    if eps1 * y1 < 10.0 {
        w.push(format!("eps1 * y1 = {} is not much larger than 1", eps1 * y1));
    }
    if (y2 - 1.0).abs() > 0.9 * y2.max(1.0) {
        w.push(format!("y2 = {y2} is not of order one"));
    }
    w
}

/// `|Δ|` after `steps` of `Δ ← Δ(1 − ηΔ²)`, or `None` once it leaves
/// `[0, 10·|Δ₀|]`. Also reports whether `|Δ|` never increased.
fn scalar_descent(delta0: f64, eta: f64, steps: usize) -> Option<(f64, bool)> {
    let mut delta = delta0;
    let mut monotone = true;
    for _ in 0..steps {
        let next = delta - eta * delta * delta * delta;
        if !next.is_finite() || next.abs() > 10.0 * delta0.abs() {
            return None;
        }
        monotone &= next.abs() <= delta.abs();
        delta = next;
    }
    Some((delta.abs(), monotone))
}

fn scalar_iterations(delta0: f64, eta: f64, tol: f64, cap: usize) -> (usize, bool) {
    let mut delta = delta0;
    for t in 0..cap {
        if delta.abs() <= tol {
            return (t, false);
        }
        delta -= eta * delta * delta * delta;
    }
    (cap, delta.abs() > tol)
}

pub fn appb_experiment(y1: f64, y2: f64, eps1: f64, eps2: f64) -> Result<AppBReport> {
    appb_experiment_with(y1, y2, eps1, eps2, &AppBOptions::default())
}

pub fn appb_experiment_with(y1: f64, y2: f64, eps1: f64, eps2: f64, opts: &AppBOptions) -> Result<AppBReport> {
    let warnings = precondition_warnings(y1, y2, eps1, eps2);
    let data = Dataset::scalar(Matrix::identity(2), &[y1, y2])?;
    let m = data.len() as f64;
    let obj = LpObjective::new(data, 4)?;
    let eta = 1.0 / (2.0 * eps1 * y1 * y1);
    let eta_op = 1.0 / (2.0 * eps1 * y1);
    let eta_gd = 2.0 / (y1 * y1);

    let step = |w: &Matrix| -> Result<Matrix> {
        let g = grad1(w, &obj)?.scale(m);
        let mut next = w.clone();
        next.axpy(-eta, &e2e_direction_single(w, &g, 2)?);
        Ok(next)
    };

    let mut w = step(&Matrix::row_vector(&[eps1, eps2]))?;
    let after_first_step = [w[(0, 0)], w[(0, 1)]];
    let mut max_step_deviation: f64 = 0.0;
    let mut max_abs_w2 = w[(0, 1)].abs();
    let mut op_iterations = None;
    for t in 1..=opts.max_op_iterations {
        let delta2 = w[(0, 1)] - y2;
        if delta2.abs() <= opts.tolerance {
            op_iterations = Some(t);
            break;
        }
        let next = step(&w)?;
        let predicted = -eta_op * delta2 * delta2 * delta2;
        if predicted != 0.0 {
            let actual = next[(0, 1)] - w[(0, 1)];
            max_step_deviation = max_step_deviation.max((actual / predicted - 1.0).abs());
        }
        w = next;
        max_abs_w2 = max_abs_w2.max(w[(0, 1)].abs());
        if !w.is_finite() {
            break;
        }
    }

    let cap = op_iterations.unwrap_or(opts.max_op_iterations).saturating_mul(opts.gd_cap_factor);
    let (gd_iterations, gd_capped) = scalar_iterations(eps2 - y2, eta_gd, opts.tolerance, cap);
    let acceleration_ratio = match op_iterations {
        Some(op) => gd_iterations as f64 / op as f64,
        None => 0.0,
    };

    let delta1 = eps1 - y1;
    let gd_unstable_at_2_2 = match scalar_descent(delta1, 2.2 / (y1 * y1), opts.stability_steps) {
        None => true,
        Some((last, _)) => last >= delta1.abs(),
    };
    let gd_converging_at_1_8 = [(delta1, y1), (eps2 - y2, y2)].iter().all(|&(d0, _)| {
        matches!(scalar_descent(d0, 1.8 / (y1 * y1), opts.stability_steps),
            Some((last, true)) if last < d0.abs())
    });

    Ok(AppBReport {
        y: [y1, y2],
        eps: [eps1, eps2],
        eta,
        eta_op,
        eta_gd,
        warnings,
        after_first_step,
        first_step_relative_error: (after_first_step[0] - y1).abs() / y1,
        max_step_deviation,
        max_abs_w2,
        op_iterations,
        gd_iterations,
        gd_capped,
        acceleration_ratio,
        gd_unstable_at_2_2,
        gd_converging_at_1_8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warnings_flag_violations() {
        assert!(precondition_warnings(100.0, 1.0, 0.1, 1e-3).is_empty());
        assert!(!precondition_warnings(2.0, 1.0, 0.1, 1e-3).is_empty());
    }

    #[test]
    fn scalar_descent_edges() {
        // η = 2/Δ₀² flips the sign with equal magnitude.
        let (last, monotone) = scalar_descent(-2.0, 0.5, 1).unwrap();
        assert_eq!(last, 2.0);
        assert!(monotone);
        assert!(scalar_descent(-2.0, 0.6, 50).is_none());
    }

    #[test]
    fn scalar_iterations_counts() {
        assert_eq!(scalar_iterations(0.5, 0.1, 1.0, 10), (0, false));
        assert_eq!(scalar_iterations(1.0, 0.1, 1e-6, 10), (10, true));
    }

    #[test]
    fn small_instance() {
        let opts = AppBOptions {
            tolerance: 1e-2,
            ..AppBOptions::default()
        };
        let rep = appb_experiment_with(100.0, 1.0, 0.1, 1e-3, &opts).unwrap();
        assert!(rep.first_step_relative_error <= 0.1);
        assert!(rep.op_iterations.is_some());
        assert!(rep.acceleration_ratio >= 10.0, "{rep:?}");
    }
}

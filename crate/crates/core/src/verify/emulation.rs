//! Deep gradient descent side by side with the end-to-end rule started from
//! the collapsed initialization.

use crate::error::Result;
use crate::matcore::Matrix;
use crate::model::{end_to_end, init_balanced, LinearNetwork};
use crate::objective::{grad1, loss1, loss_n, LpObjective};
use crate::optim::{e2e_step_general, e2e_step_single, gd_step_deep, EndToEndState, GdConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct EmulationReport {
    /// Losses at iterations `0..=n` where `n` is the last iteration both runs completed.
    pub deep_losses: Vec<f64>,
    pub e2e_losses: Vec<f64>,
    /// `‖W_e^{deep} − W_e^{e2e}‖_F` per iteration.
    pub we_gaps: Vec<f64>,
    /// `max_t |a_t − b_t| / max(a_t, b_t)`; infinite when a run diverged.
    pub max_relative_gap: f64,
    pub deep_diverged_at: Option<usize>,
    pub e2e_diverged_at: Option<usize>,
}

impl EmulationReport {
    pub fn max_we_gap(&self) -> f64 {
        self.we_gaps.iter().copied().fold(0.0, f64::max)
    }
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Balanced near-zero initialization of a net with `widths` at scale `init_std`.
pub fn emulation_report(
    widths: &[usize],
    obj: &LpObjective,
    eta: f64,
    iters: usize,
    seed: u64,
    init_std: f64,
) -> Result<EmulationReport> {
    let net = init_balanced(widths, init_std, seed)?;
    emulation_report_from(&net, obj, eta, iters)
}

/// Runs `iters` steps of deep GD from `net` and of the end-to-end rule
/// (single-output form when `k = 1`) from `end_to_end(net)`, with `λ = 0`.
pub fn emulation_report_from(
    net: &LinearNetwork,
    obj: &LpObjective,
    eta: f64,
    iters: usize,
) -> Result<EmulationReport> {
    let config = GdConfig::new(eta, 0.0)?;
    let depth = net.depth();
    let single = obj.weight_shape().0 == 1;
    let loss_ok = |l: f64, initial: f64| l.is_finite() && l <= 1e3 * initial.max(f64::MIN_POSITIVE);

    let mut deep = net.clone();
    let mut e2e = EndToEndState::new(end_to_end(net), depth, config)?;
    let initial = loss_n(&deep, obj)?;
    let mut report = EmulationReport {
        deep_losses: vec![initial],
        e2e_losses: vec![loss1(&e2e.w_e, obj)?],
        we_gaps: vec![(&end_to_end(&deep) - &e2e.w_e).frobenius_norm()],
        max_relative_gap: 0.0,
        deep_diverged_at: None,
        e2e_diverged_at: None,
    };

    for t in 1..=iters {
        let next_deep = gd_step_deep(&deep, obj, &config)
            .ok()
            .and_then(|n| loss_n(&n, obj).ok().filter(|&l| loss_ok(l, initial)).map(|l| (n, l)));
        let grad = grad1(&e2e.w_e, obj)?;
        let stepped = if single {
            e2e_step_single(&e2e, &grad)
        } else {
            e2e_step_general(&e2e, &grad)
        };
        let next_e2e = stepped
            .ok()
            .and_then(|s| loss1(&s.w_e, obj).ok().filter(|&l| loss_ok(l, initial)).map(|l| (s, l)));

        if next_deep.is_none() {
            report.deep_diverged_at = Some(t);
        }
        if next_e2e.is_none() {
            report.e2e_diverged_at = Some(t);
        }
        let (Some((nd, ld)), Some((ne, le))) = (next_deep, next_e2e) else {
            report.max_relative_gap = f64::INFINITY;
            return Ok(report);
        };
        deep = nd;
        e2e = ne;
        report.deep_losses.push(ld);
        report.e2e_losses.push(le);
        report.we_gaps.push(gap(&end_to_end(&deep), &e2e.w_e));
    }
    report.max_relative_gap = report
        .deep_losses
        .iter()
        .zip(&report.e2e_losses)
        .map(|(&a, &b)| relative_gap(a, b))
        .fold(0.0, f64::max);
    Ok(report)
}

fn gap(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).frobenius_norm()
}

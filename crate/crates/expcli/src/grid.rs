//! Learning-rate grid search.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use overparam::objective::{reference_optimum, LpObjective};

use crate::config::ExperimentConfig;
use crate::error::{ExpError, Result};
use crate::runner::{run_trace, Trace};

pub const DEFAULT_RATES: [f64; 10] = [1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1];

#[derive(Clone, Debug)]
pub struct GridResult {
    /// One trace per rate, in the order the rates were given.
    pub traces: Vec<Trace>,
    /// Index into `traces` of the rate that reached the threshold in the
    /// fewest iterations, ties going to the smaller rate.
    pub best: Option<usize>,
}

impl GridResult {
    pub fn best_trace(&self) -> Option<&Trace> {
        self.best.map(|i| &self.traces[i])
    }

    pub fn best_rate(&self) -> Option<f64> {
        self.best_trace().map(|t| t.eta)
    }

    /// Per-rate outcome table, one line per rate in ascending order.
    pub fn table(&self) -> String {
        let mut order: Vec<&Trace> = self.traces.iter().collect();
        order.sort_by(|a, b| a.eta.total_cmp(&b.eta));
        let mut out = String::from("rate        outcome\n");
        for t in order {
            let outcome = if t.diverged {
                format!("diverged at iteration {}", t.rows.last().map_or(0, |r| r.iter))
            } else if let Some(i) = t.converged_at {
                format!("threshold reached at iteration {i}")
            } else {
                format!("threshold not reached (final loss {:.6e})", t.final_loss())
            };
            let _ = writeln!(out, "{:<11.3e} {outcome}", t.eta);
        }
        out
    }
}

fn better(a: &Trace, b: &Trace) -> Ordering {
    a.converged_at
        .cmp(&b.converged_at)
        .then_with(|| a.eta.total_cmp(&b.eta))
}

pub fn grid_search_objective(
    cfg: &ExperimentConfig,
    obj: &LpObjective,
    loss_star: f64,
    rates: &[f64],
) -> Result<GridResult> {
    if rates.is_empty() {
        return Err(ExpError::Config("grid needs at least one learning rate".into()));
    }
    if let Some(bad) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(ExpError::Config(format!("learning rates must be positive, got {bad}")));
    }
    let mut traces = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut c = cfg.clone();
        c.optimizer = cfg.optimizer.with_eta(rate);
        c.stop_at_threshold = true;
        traces.push(run_trace(&c, obj, loss_star)?);
    }
    let best = traces
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.diverged && t.converged_at.is_some())
        .min_by(|(_, a), (_, b)| better(a, b))
        .map(|(i, _)| i);
    Ok(GridResult { traces, best })
}

pub fn grid_search(cfg: &ExperimentConfig, rates: &[f64], data_dir: Option<&Path>) -> Result<(GridResult, Vec<String>)> {
    cfg.validate()?;
    let (obj, warnings) = cfg.objective(data_dir)?;
    let loss_star = reference_optimum(&obj)?.loss;
    Ok((grid_search_objective(cfg, &obj, loss_star, rates)?, warnings))
}

pub fn parse_rates(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| ExpError::Config(format!("bad learning rate {s:?}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_parse() {
        assert_eq!(parse_rates("1e-3, 0.5").unwrap(), vec![1e-3, 0.5]);
        assert!(parse_rates("1e-3,x").is_err());
    }
}

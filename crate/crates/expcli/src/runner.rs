//! Single optimization runs: per-iteration traces, CSV and JSON sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use overparam::matcore::Matrix;
use overparam::model::{end_to_end, LinearNetwork};
use overparam::objective::{grad1, layer_grads, loss1, reference_optimum, LpObjective};
use overparam::optim::{
    e2e_step_general, e2e_step_single, gd_step_deep, AdaptiveState, AdaptiveVariant, EndToEndState, GdConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Optimizer, Problem};
use crate::error::{ExpError, Result};

/// A run is stopped as divergent once its loss exceeds this multiple of the
/// initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub loss: f64,
    pub loss_minus_opt: f64,
    pub grad_norm: f64,
    pub we_fro_norm: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub label: String,
    pub eta: f64,
    pub loss_star: f64,
    pub initial_loss: f64,
    /// Rows for iterations `1..=n`; a divergent run ends with a marker row
    /// whose loss is non-finite or above the divergence limit.
    pub rows: Vec<TraceRow>,
    pub diverged: bool,
    /// First iteration with `loss − loss_star ≤ δ·(loss₀ − loss_star)`.
    pub converged_at: Option<usize>,
}

impl Trace {
    pub fn final_loss(&self) -> f64 {
        self.rows.last().map_or(self.initial_loss, |r| r.loss)
    }
}

enum Model {
    Deep(LinearNetwork, Option<Vec<AdaptiveState>>),
    EndToEnd(EndToEndState),
}

impl Model {
    fn w_e(&self) -> Matrix {
        match self {
            Model::Deep(net, _) => end_to_end(net),
            Model::EndToEnd(s) => s.w_e.clone(),
        }
    }
}

fn adaptive_variant(opt: &Optimizer) -> Option<AdaptiveVariant> {
    match opt {
        Optimizer::Adagrad { .. } => Some(AdaptiveVariant::adagrad()),
        Optimizer::Adadelta { .. } => Some(AdaptiveVariant::adadelta()),
        Optimizer::Adam { .. } => Some(AdaptiveVariant::adam()),
        _ => None,
    }
}

fn build_model(cfg: &ExperimentConfig, obj: &LpObjective) -> Result<Model> {
    let net = cfg.init_network(obj)?;
    Ok(match cfg.optimizer {
        Optimizer::E2e { n, eta, lambda } => {
            Model::EndToEnd(EndToEndState::new(end_to_end(&net), n, GdConfig::new(eta, lambda)?)?)
        }
        ref other => {
            let states = adaptive_variant(other).map(|v| {
                net.weights()
                    .iter()
                    .map(|w| AdaptiveState::new(v, w.rows(), w.cols()))
                    .collect()
            });
            Model::Deep(net, states)
        }
    })
}

fn step(model: Model, opt: &Optimizer, obj: &LpObjective, grad_at_we: &Matrix) -> overparam::Result<Model> {
    match (model, opt) {
        (Model::EndToEnd(s), _) => {
            let next = if s.w_e.rows() == 1 {
                e2e_step_single(&s, grad_at_we)?
            } else {
                e2e_step_general(&s, grad_at_we)?
            };
            Ok(Model::EndToEnd(next))
        }
        (Model::Deep(net, None), Optimizer::Gd { eta, lambda }) => {
            Ok(Model::Deep(gd_step_deep(&net, obj, &GdConfig::new(*eta, *lambda)?)?, None))
        }
        (Model::Deep(net, Some(mut states)), opt) => {
            let grads = layer_grads(&net, obj)?;
            let mut weights = Vec::with_capacity(grads.len());
            for ((w, g), st) in net.weights().iter().zip(&grads).zip(states.iter_mut()) {
                weights.push(st.step(w, g, opt.eta())?);
            }
            Ok(Model::Deep(LinearNetwork::from_weights(weights)?, Some(states)))
        }
        (Model::Deep(..), _) => unreachable!("plain descent carries no adaptive state"),
    }
}

/// Runs `cfg` against `obj` with the offset `loss_star`.
pub fn run_trace(cfg: &ExperimentConfig, obj: &LpObjective, loss_star: f64) -> Result<Trace> {
    let start = Instant::now();
    let mut model = build_model(cfg, obj)?;
    let mut w_e = model.w_e();
    let initial_loss = loss1(&w_e, obj)?;
    let mut grad = grad1(&w_e, obj)?;
    let target = loss_star + cfg.delta * (initial_loss - loss_star);
    let limit = DIVERGENCE_FACTOR * initial_loss;

    let mut trace = Trace {
        label: cfg.label(),
        eta: cfg.optimizer.eta(),
        loss_star,
        initial_loss,
        rows: Vec::with_capacity(cfg.iters.min(1 << 20)),
        diverged: false,
        converged_at: (initial_loss <= target).then_some(0),
    };
    if trace.converged_at.is_some() && cfg.stop_at_threshold {
        return Ok(trace);
    }

    for iter in 1..=cfg.iters {
        let elapsed_ms = |s: &Instant| if cfg.record_timing { s.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let stepped = match step(model, &cfg.optimizer, obj, &grad) {
            Ok(m) => m,
            Err(overparam::Error::Diverged { .. }) => {
                trace.rows.push(marker_row(iter, f64::NAN, elapsed_ms(&start)));
                trace.diverged = true;
                return Ok(trace);
            }
            Err(e) => return Err(e.into()),
        };
        model = stepped;
        w_e = model.w_e();
        let loss = loss1(&w_e, obj)?;
        if !loss.is_finite() || loss > limit {
            trace.rows.push(marker_row(iter, loss, elapsed_ms(&start)));
            trace.diverged = true;
            return Ok(trace);
        }
        grad = grad1(&w_e, obj)?;
        trace.rows.push(TraceRow {
            iter,
            loss,
            loss_minus_opt: loss - loss_star,
            grad_norm: grad.frobenius_norm(),
            we_fro_norm: w_e.frobenius_norm(),
            elapsed_ms: elapsed_ms(&start),
        });
        if trace.converged_at.is_none() && loss <= target {
            trace.converged_at = Some(iter);
            if cfg.stop_at_threshold {
                break;
            }
        }
    }
    Ok(trace)
}

fn marker_row(iter: usize, loss: f64, elapsed_ms: f64) -> TraceRow {
    TraceRow {
        iter,
        loss,
        loss_minus_opt: f64::NAN,
        grad_norm: f64::NAN,
        we_fro_norm: f64::NAN,
        elapsed_ms,
    }
}

pub fn write_trace_csv(rows: &[TraceRow], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["iter", "loss", "loss_minus_opt", "grad_norm", "we_fro_norm", "elapsed_ms"])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| ExpError::io("<trace>", e))?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub label: String,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub eta: f64,
    pub loss_star: f64,
    pub initial_loss: f64,
    pub iterations_run: usize,
    pub converged_at: Option<usize>,
    pub diverged: bool,
    pub preprocessing: Option<String>,
    pub warnings: Vec<String>,
}

impl Metadata {
    pub fn new(cfg: &ExperimentConfig, trace: &Trace, warnings: Vec<String>) -> Self {
        let preprocessing = matches!(cfg.problem, Problem::UciEthanol { .. })
            .then(|| "features standardized per column (zero mean, unit variance); targets raw".to_string());
        Self {
            label: trace.label.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            seed: cfg.seed,
            eta: trace.eta,
            loss_star: trace.loss_star,
            initial_loss: trace.initial_loss,
            iterations_run: trace.rows.last().map_or(0, |r| r.iter),
            converged_at: trace.converged_at,
            diverged: trace.diverged,
            preprocessing,
            warnings,
        }
    }
}

/// The JSON sidecar next to a trace CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "trace".into()
    } else {
        s
    }
}

pub fn write_outputs(dir: &Path, stem: &str, trace: &Trace, meta: &Metadata) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path).map_err(|e| ExpError::io(&csv_path, e))?;
    write_trace_csv(&trace.rows, std::io::BufWriter::new(file))?;
    let meta_path = sidecar_path(&csv_path);
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(&meta_path, json + "\n").map_err(|e| ExpError::io(&meta_path, e))?;
    Ok(csv_path)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: Trace,
    pub metadata: Metadata,
    pub csv_path: PathBuf,
}

/// Loads the problem, computes the reference optimum and writes
/// `<out>/<label>.csv` plus its JSON sidecar.
pub fn run_experiment(cfg: &ExperimentConfig, data_dir: Option<&Path>, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let (obj, warnings) = cfg.objective(data_dir)?;
    let loss_star = reference_optimum(&obj)?.loss;
    let trace = run_trace(cfg, &obj, loss_star)?;
    let metadata = Metadata::new(cfg, &trace, warnings);
    let csv_path = write_outputs(out_dir, &slug(&trace.label), &trace, &metadata)?;
    Ok(RunOutput {
        trace,
        metadata,
        csv_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(iters: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
            "problem": {{"kind": "synth_gaussian", "d": 4, "m": 32, "seed": 2}},
            "p": 2,
            "model": {{"depth": 1, "init": {{"kind": "gaussian", "std": 0.01}}}},
            "optimizer": {{"kind": "gd", "eta": 0.05}},
            "iters": {iters}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn zero_iterations_has_no_rows() {
        let cfg = config(0);
        let (obj, _) = cfg.objective(None).unwrap();
        let t = run_trace(&cfg, &obj, 0.0).unwrap();
        assert!(t.rows.is_empty());
        let mut buf = Vec::new();
        write_trace_csv(&t.rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,loss,loss_minus_opt,grad_norm,we_fro_norm,elapsed_ms\n");
    }

    #[test]
    fn divergence_marker() {
        let mut cfg = config(100);
        cfg.optimizer = Optimizer::Gd { eta: 5.0, lambda: 0.0 };
        let (obj, _) = cfg.objective(None).unwrap();
        let t = run_trace(&cfg, &obj, 0.0).unwrap();
        assert!(t.diverged);
        let last = t.rows.last().unwrap();
        assert!(!last.loss.is_finite() || last.loss > DIVERGENCE_FACTOR * t.initial_loss);
        assert!(t.rows[..t.rows.len() - 1].iter().all(|r| r.loss.is_finite()));
    }

    #[test]
    fn adaptive_and_e2e_run() {
        for opt in [
            Optimizer::Adagrad { eta: 0.05 },
            Optimizer::Adadelta { eta: 1.0 },
            Optimizer::Adam { eta: 0.01 },
            Optimizer::E2e { n: 2, eta: 0.05, lambda: 0.0 },
        ] {
            let mut cfg = config(50);
            cfg.optimizer = opt.clone();
            let (obj, _) = cfg.objective(None).unwrap();
            let t = run_trace(&cfg, &obj, 0.0).unwrap();
            assert_eq!(t.rows.len(), 50, "{}", opt.label());
            assert!(t.final_loss() < t.initial_loss, "{}", opt.label());
        }
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("gd depth2 p4"), "gd_depth2_p4");
        assert_eq!(slug(""), "trace");
    }
}

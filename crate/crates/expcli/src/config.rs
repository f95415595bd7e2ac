use std::fs;
use std::path::{Path, PathBuf};

use overparam::model::{init_balanced, init_gaussian, init_identity, LinearNetwork};
use overparam::objective::{Dataset, LpObjective};
use serde::{Deserialize, Serialize};

use crate::data::{data_root, load_ethanol, synth_gaussian, synth_illcond};
use crate::error::{ExpError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    /// `path` is a batch file or directory; relative paths resolve against
    /// the data root.
    UciEthanol { path: Option<PathBuf> },
    SynthGaussian { d: usize, m: usize, seed: u64 },
    SynthIllcond { y1: f64, y2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Gaussian { std: f64 },
    Identity { std: f64, offset: f64 },
    Balanced { std: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub depth: usize,
    /// `depth − 1` hidden widths.
    #[serde(default)]
    pub hidden_widths: Vec<usize>,
    pub init: Init,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Gd {
        eta: f64,
        #[serde(default)]
        lambda: f64,
    },
    /// End-to-end rule of depth `n` on the collapsed initialization.
    E2e {
        n: usize,
        eta: f64,
        #[serde(default)]
        lambda: f64,
    },
    Adagrad { eta: f64 },
    Adadelta { eta: f64 },
    Adam { eta: f64 },
}

impl Optimizer {
    pub fn eta(&self) -> f64 {
        match *self {
            Optimizer::Gd { eta, .. }
            | Optimizer::E2e { eta, .. }
            | Optimizer::Adagrad { eta }
            | Optimizer::Adadelta { eta }
            | Optimizer::Adam { eta } => eta,
        }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Optimizer::Gd { eta: e, .. }
            | Optimizer::E2e { eta: e, .. }
            | Optimizer::Adagrad { eta: e }
            | Optimizer::Adadelta { eta: e }
            | Optimizer::Adam { eta: e } => *e = eta,
        }
        out
    }

    pub fn label(&self) -> String {
        match self {
            Optimizer::Gd { .. } => "gd".into(),
            Optimizer::E2e { n, .. } => format!("e2e-n{n}"),
            Optimizer::Adagrad { .. } => "adagrad".into(),
            Optimizer::Adadelta { .. } => "adadelta".into(),
            Optimizer::Adam { .. } => "adam".into(),
        }
    }
}

fn default_delta() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub problem: Problem,
    pub p: u32,
    pub model: ModelConfig,
    pub optimizer: Optimizer,
    pub iters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Convergence when `loss − loss_star ≤ delta · (loss₀ − loss_star)`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Stop as soon as the threshold is reached.
    #[serde(default)]
    pub stop_at_threshold: bool,
    /// Fill `elapsed_ms`; off by default so traces are byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.depth == 0 {
            return Err(ExpError::Config("model depth must be at least 1".into()));
        }
        if m.hidden_widths.len() + 1 != m.depth {
            return Err(ExpError::Config(format!(
                "depth {} needs {} hidden widths, got {}",
                m.depth,
                m.depth - 1,
                m.hidden_widths.len()
            )));
        }
        if m.hidden_widths.contains(&0) {
            return Err(ExpError::Config("hidden widths must be positive".into()));
        }
        if self.p < 2 || !self.p.is_multiple_of(2) {
            return Err(ExpError::Config(format!("p must be even and at least 2, got {}", self.p)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ExpError::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        let eta = self.optimizer.eta();
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(ExpError::Config(format!("learning rate must be positive, got {eta}")));
        }
        if let Optimizer::E2e { n, .. } = self.optimizer {
            if n == 0 {
                return Err(ExpError::Config("end-to-end depth must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{} depth{} p{}", self.optimizer.label(), self.model.depth, self.p))
    }

    pub fn load_dataset(&self, data_dir: Option<&Path>) -> Result<(Dataset, Vec<String>)> {
        match &self.problem {
            Problem::SynthGaussian { d, m, seed } => Ok((synth_gaussian(*d, *m, *seed)?, Vec::new())),
            Problem::SynthIllcond { y1, y2 } => Ok((synth_illcond(*y1, *y2)?, Vec::new())),
            Problem::UciEthanol { path } => {
                let root = data_root(data_dir);
                let resolved = match (path, root) {
                    (Some(p), Some(r)) if p.is_relative() => r.join(p),
                    (Some(p), _) => p.clone(),
                    (None, Some(r)) => r,
                    (None, None) => {
                        return Err(ExpError::Config(
                            "no Ethanol data: set the data root or give a path".into(),
                        ))
                    }
                };
                let loaded = load_ethanol(&resolved)?;
                Ok((loaded.dataset, loaded.warnings))
            }
        }
    }

    pub fn objective(&self, data_dir: Option<&Path>) -> Result<(LpObjective, Vec<String>)> {
        let (ds, warnings) = self.load_dataset(data_dir)?;
        Ok((LpObjective::new(ds, self.p)?, warnings))
    }

    pub fn widths(&self, obj: &LpObjective) -> Vec<usize> {
        let (k, d) = obj.weight_shape();
        let mut w = vec![d];
        w.extend(&self.model.hidden_widths);
        w.push(k);
        w
    }

    pub fn init_network(&self, obj: &LpObjective) -> Result<LinearNetwork> {
        let widths = self.widths(obj);
        let net = match self.model.init {
            Init::Gaussian { std } => init_gaussian(&widths, std, self.seed)?,
            Init::Identity { std, offset } => init_identity(&widths, std, offset, self.seed)?,
            Init::Balanced { std } => init_balanced(&widths, std, self.seed)?,
        };
        Ok(net)
    }
}

//! Datasets: the Ethanol subset of the gas-sensor drift batches and two
//! synthetic problems.
//!
//! Batch lines look like `G;C 1:v1 2:v2 … n:vn` where `G` is the gas id and
//! `C` the concentration.

use std::fs;
use std::path::{Path, PathBuf};

use overparam::matcore::Matrix;
use overparam::objective::Dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ExpError, Result};

pub const ETHANOL_GAS_ID: u32 = 1;
pub const ETHANOL_FEATURES: usize = 128;
pub const ETHANOL_ROWS: usize = 2565;
pub const DATA_ENV: &str = "OVERPARAM_DATA";

/// Standard deviation of the planted weights in [`synth_gaussian`].
pub const SYNTH_TARGET_STD: f64 = 0.25;
pub const SYNTH_NOISE_STD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub gas: u32,
    pub concentration: f64,
    pub features: Vec<f64>,
}

fn parse_err(source_name: &str, line: usize, message: impl Into<String>) -> ExpError {
    ExpError::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

pub fn parse_batch(text: &str, source_name: &str, n_features: usize) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().unwrap_or_default();
        let (gas, conc) = label
            .split_once(';')
            .ok_or_else(|| parse_err(source_name, lineno, format!("label `{label}` lacks `;`")))?;
        let gas: u32 = gas
            .parse()
            .map_err(|_| parse_err(source_name, lineno, format!("bad gas id `{gas}`")))?;
        let concentration: f64 = conc
            .parse()
            .map_err(|_| parse_err(source_name, lineno, format!("bad concentration `{conc}`")))?;

        let mut features = Vec::with_capacity(n_features);
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(source_name, lineno, format!("token `{tok}` is not index:value")))?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(source_name, lineno, format!("bad index `{i}`")))?;
            if i != features.len() + 1 {
                return Err(parse_err(
                    source_name,
                    lineno,
                    format!("index {i} where {} was expected", features.len() + 1),
                ));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(source_name, lineno, format!("bad value `{v}`")))?;
            if !v.is_finite() {
                return Err(parse_err(source_name, lineno, format!("non-finite value at index {i}")));
            }
            features.push(v);
        }
        if features.len() != n_features {
            return Err(parse_err(
                source_name,
                lineno,
                format!("{} features, expected {n_features}", features.len()),
            ));
        }
        records.push(Record {
            gas,
            concentration,
            features,
        });
    }
    if records.is_empty() {
        return Err(parse_err(source_name, 0, "no records"));
    }
    Ok(records)
}

/// Writes `dataset` in batch format, every row labelled with `gas`.
pub fn write_batch(dataset: &Dataset, gas: u32) -> String {
    let mut out = String::new();
    for i in 0..dataset.len() {
        out.push_str(&format!("{gas};{}", dataset.y()[(i, 0)]));
        for (j, v) in dataset.x().row(i).iter().enumerate() {
            out.push_str(&format!(" {}:{}", j + 1, v));
        }
        out.push('\n');
    }
    out
}

pub fn records_to_dataset(records: &[Record], gas: u32) -> Result<Dataset> {
    let kept: Vec<&Record> = records.iter().filter(|r| r.gas == gas).collect();
    if kept.is_empty() {
        return Err(ExpError::Config(format!("no rows with gas id {gas}")));
    }
    let d = kept[0].features.len();
    let x = Matrix::from_fn(kept.len(), d, |i, j| kept[i].features[j]);
    let y: Vec<f64> = kept.iter().map(|r| r.concentration).collect();
    Ok(Dataset::scalar(x, &y)?)
}

/// Zero mean, unit variance per column. Constant columns are only centered.
pub fn standardize(x: &Matrix) -> Matrix {
    let (m, d) = x.shape();
    let mut out = x.clone();
    for j in 0..d {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..m {
            out[(i, j)] = (x[(i, j)] - mean) / sd;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct EthanolData {
    pub dataset: Dataset,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// `batchN.dat` files under `dir`, in numeric order.
pub fn batch_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| ExpError::io(dir, e))?;
    let mut files: Vec<(u32, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| ExpError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(n) = name.strip_prefix("batch").and_then(|s| s.strip_suffix(".dat")) {
            if let Ok(n) = n.parse() {
                files.push((n, path));
            }
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

/// Loads a batch file, or every `batchN.dat` in a directory, keeps the
/// Ethanol rows and standardizes the features. Targets stay raw.
pub fn load_ethanol(path: &Path) -> Result<EthanolData> {
    let files = if path.is_dir() {
        batch_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(ExpError::Config(format!("no batch files under {}", path.display())));
    }
    let mut records = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| ExpError::io(f, e))?;
        records.extend(parse_batch(&text, &f.display().to_string(), ETHANOL_FEATURES)?);
    }
    let raw = records_to_dataset(&records, ETHANOL_GAS_ID)?;
    let mut warnings = Vec::new();
    if raw.len() != ETHANOL_ROWS {
        warnings.push(format!(
            "{} Ethanol rows, expected {ETHANOL_ROWS} (dataset version drift?)",
            raw.len()
        ));
    }
    let dataset = Dataset::new(standardize(raw.x()), raw.y().clone())?;
    Ok(EthanolData {
        dataset,
        files,
        warnings,
    })
}

/// `--data` if given, else the directory named by `OVERPARAM_DATA`.
pub fn data_root(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
}

/// `x ~ N(0, I)`, `y = x·w* + noise`, with `w* ~ N(0, SYNTH_TARGET_STD²·I)` and
/// noise `N(0, SYNTH_NOISE_STD²)`.
pub fn synth_gaussian(d: usize, m: usize, seed: u64) -> Result<Dataset> {
    if d == 0 || m == 0 {
        return Err(ExpError::Config("synthetic problem needs d, m > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let x = Matrix::from_fn(m, d, |_, _| unit.sample(&mut rng));
    let w: Vec<f64> = (0..d).map(|_| SYNTH_TARGET_STD * unit.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..m)
        .map(|i| {
            let clean: f64 = x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum();
            clean + SYNTH_NOISE_STD * unit.sample(&mut rng)
        })
        .collect();
    Ok(Dataset::scalar(x, &y)?)
}

/// `{([1, 0], y₁), ([0, 1], y₂)}`.
pub fn synth_illcond(y1: f64, y2: f64) -> Result<Dataset> {
    Ok(Dataset::scalar(Matrix::identity(2), &[y1, y2])?)
}

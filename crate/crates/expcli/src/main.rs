use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use overparam::verify::conservativity_report;
use overparam_exp::config::ExperimentConfig;
use overparam_exp::error::ExpError;
use overparam_exp::grid::{grid_search, parse_rates, DEFAULT_RATES};
use overparam_exp::plot::emit_plot;
use overparam_exp::runner::{run_experiment, slug, write_outputs, Metadata};
use overparam_exp::suite::{probe_gradient, verify_suite, SuiteOptions};
use overparam_exp::data::data_root;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "overparam", version, about = "Deep linear network experiments and checks")]
struct Cli {
    /// Dataset root directory (overrides OVERPARAM_DATA).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace CSV and JSON sidecar.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's output_dir, else ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learning-rate grid search; writes the best trace.
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated learning rates.
        #[arg(long)]
        rates: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite and print a JSON report.
    Verify {
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run only these checks.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
    /// Loop-integral report for L(w) = <w, u> + |w|²/2 on the curve Γ_{r,R}.
    Curve {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: f64,
        #[arg(long = "R")]
        big_r: f64,
        #[arg(long)]
        dim: usize,
        /// Segments per curve piece.
        #[arg(long, default_value_t = 4096)]
        m: usize,
    },
    /// Plot trace CSVs as loss − loss* on a log axis.
    Plot {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

fn exit_code(e: &ExpError) -> u8 {
    match e {
        ExpError::Config(_) | ExpError::Json(_) | ExpError::Parse { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn out_dir(explicit: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    explicit
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run(cli: Cli) -> Result<u8, ExpError> {
    let data = data_root(cli.data.as_deref());
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dir = out_dir(out, &cfg);
            let res = run_experiment(&cfg, data.as_deref(), &dir)?;
            for w in &res.metadata.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", res.csv_path.display());
            Ok(if res.trace.diverged { EXIT_FAILURE } else { 0 })
        }
        Command::Grid { config, rates, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let rates = match rates {
                Some(text) => parse_rates(&text)?,
                None => DEFAULT_RATES.to_vec(),
            };
            let (result, warnings) = grid_search(&cfg, &rates, data.as_deref())?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", result.table());
            let Some(best) = result.best_trace() else {
                eprintln!("no learning rate reached the threshold");
                return Ok(EXIT_FAILURE);
            };
            let mut best_cfg = cfg.clone();
            best_cfg.optimizer = cfg.optimizer.with_eta(best.eta);
            let meta = Metadata::new(&best_cfg, best, warnings);
            let dir = out_dir(out, &cfg);
            let path = write_outputs(&dir, &slug(&format!("{}_best", best.label)), best, &meta)?;
            println!("best rate {:e}: {}", best.eta, path.display());
            Ok(0)
        }
        Command::Verify { report, only } => {
            let opts = SuiteOptions {
                only,
                ..SuiteOptions::default()
            };
            let rep = verify_suite(&opts);
            let json = serde_json::to_string_pretty(&rep)?;
            println!("{json}");
            if let Some(path) = report {
                std::fs::write(&path, json + "\n").map_err(|e| ExpError::io(&path, e))?;
            }
            for c in rep.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL {}: measured {:e}, tolerance {:e}", c.name, c.measured, c.tolerance);
            }
            Ok(if rep.passed { 0 } else { EXIT_FAILURE })
        }
        Command::Curve { n, r, big_r, dim, m } => {
            if dim < 2 {
                return Err(ExpError::Config("--dim must be at least 2".into()));
            }
            let rep = conservativity_report(probe_gradient(dim), dim, n, r, big_r, m)
                .map_err(|e| ExpError::Config(e.to_string()))?;
            let json = serde_json::json!({
                "depth": rep.depth,
                "r": rep.r,
                "R": rep.big_r,
                "segments_per_piece": rep.segments_per_piece,
                "loop_integral": rep.loop_integral,
                "refinement": rep.refinement,
                "lemma3_constant_part": rep.lemma3_constant_part,
                "residual_bound": rep.residual_bound,
                "lower_bound": rep.lower_bound,
                "raw_gradient_loop_integral": rep.raw_gradient_loop_integral,
                "verdict": rep.verdict.as_str(),
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(0)
        }
        Command::Plot { out, traces } => {
            emit_plot(&traces, &out)?;
            println!("{}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

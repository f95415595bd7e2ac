use std::fs;

use overparam::matcore::{svd_full, Matrix};
use overparam::objective::reference_optimum;
use overparam_exp::config::{ExperimentConfig, Optimizer};
use overparam_exp::grid::{grid_search, grid_search_objective, DEFAULT_RATES};
use overparam_exp::plot::{emit_plot, render_svg, Series, LOG_FLOOR};
use overparam_exp::runner::{read_trace_csv, run_experiment, run_trace, sidecar_path, Metadata};
use overparam_exp::suite::{verify_suite, SuiteOptions};
use proptest::prelude::*;

fn config(problem: &str, p: u32, depth: usize, optimizer: &str, iters: usize) -> ExperimentConfig {
    let hidden = vec![2; depth - 1];
    ExperimentConfig::from_json(&format!(
        r#"{{"problem": {problem}, "p": {p},
            "model": {{"depth": {depth}, "hidden_widths": {hidden:?}, "init": {{"kind": "balanced", "std": 0.1}}}},
            "optimizer": {optimizer}, "iters": {iters}, "seed": 7}}"#
    ))
    .unwrap()
}

const SYNTH: &str = r#"{"kind": "synth_gaussian", "d": 6, "m": 40, "seed": 3}"#;
const ILLCOND: &str = r#"{"kind": "synth_illcond", "y1": 10.0, "y2": 1.0}"#;

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = config(SYNTH, 4, 3, r#"{"kind": "gd", "eta": 0.05}"#, 200);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(&cfg, None, a.path()).unwrap();
    let rb = run_experiment(&cfg, None, b.path()).unwrap();
    assert_eq!(fs::read(&ra.csv_path).unwrap(), fs::read(&rb.csv_path).unwrap());
    assert_eq!(
        fs::read(sidecar_path(&ra.csv_path)).unwrap(),
        fs::read(sidecar_path(&rb.csv_path)).unwrap()
    );
}

#[test]
fn zero_iterations_write_header_and_metadata() {
    let cfg = config(SYNTH, 2, 1, r#"{"kind": "gd", "eta": 0.05}"#, 0);
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, None, dir.path()).unwrap();
    assert_eq!(
        fs::read_to_string(&out.csv_path).unwrap(),
        "iter,loss,loss_minus_opt,grad_norm,we_fro_norm,elapsed_ms\n"
    );
    let meta: Metadata = serde_json::from_str(&fs::read_to_string(sidecar_path(&out.csv_path)).unwrap()).unwrap();
    assert_eq!(meta.config, cfg);
    assert_eq!(meta.seed, 7);
    assert_eq!(meta.tool_version, env!("CARGO_PKG_VERSION"));
    assert_eq!(meta.iterations_run, 0);
    let (obj, _) = cfg.objective(None).unwrap();
    assert_eq!(meta.loss_star, reference_optimum(&obj).unwrap().loss);
}

#[test]
fn convex_depth_one_trace_is_monotone() {
    // ℓ₂ depth 1 below the 1/λ_max(XᵀX/m) stability limit.
    let probe = config(SYNTH, 2, 1, r#"{"kind": "gd", "eta": 0.01}"#, 1);
    let (obj, _) = probe.objective(None).unwrap();
    let x = obj.dataset().x();
    let top = svd_full(x).unwrap().s[0];
    let eta = 1.0 / (top * top / x.rows() as f64);
    let cfg = config(SYNTH, 2, 1, &format!(r#"{{"kind": "gd", "eta": {eta}}}"#), 300);
    let dir = tempfile::tempdir().unwrap();
    let rows = read_trace_csv(&run_experiment(&cfg, None, dir.path()).unwrap().csv_path).unwrap();
    assert_eq!(rows.len(), 300);
    for pair in rows.windows(2) {
        // Up to round-off in summing the loss over m = 40 instances.
        assert!(pair[1].loss_minus_opt <= pair[0].loss_minus_opt + 64.0 * f64::EPSILON * pair[0].loss);
    }
    assert!(rows.iter().all(|r| r.elapsed_ms == 0.0));
    assert!(rows.last().unwrap().loss_minus_opt < 1e-10);
}

#[test]
fn every_optimizer_descends() {
    for opt in [
        r#"{"kind": "gd", "eta": 0.05}"#,
        r#"{"kind": "e2e", "n": 3, "eta": 0.05}"#,
        r#"{"kind": "adagrad", "eta": 0.05}"#,
        r#"{"kind": "adadelta", "eta": 1.0}"#,
        r#"{"kind": "adam", "eta": 0.01}"#,
    ] {
        let cfg = config(SYNTH, 4, 2, opt, 300);
        let (obj, _) = cfg.objective(None).unwrap();
        let t = run_trace(&cfg, &obj, 0.0).unwrap();
        assert!(!t.diverged, "{opt}");
        assert!(t.final_loss() < 0.5 * t.initial_loss, "{opt}: {} -> {}", t.initial_loss, t.final_loss());
    }
}

#[test]
fn end_to_end_optimizer_tracks_the_deep_net() {
    let deep = config(SYNTH, 2, 3, r#"{"kind": "gd", "eta": 0.02}"#, 400);
    let mut e2e = deep.clone();
    e2e.optimizer = Optimizer::E2e { n: 3, eta: 0.02, lambda: 0.0 };
    let (obj, _) = deep.objective(None).unwrap();
    let a = run_trace(&deep, &obj, 0.0).unwrap();
    let b = run_trace(&e2e, &obj, 0.0).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.loss - y.loss).abs() <= 0.05 * x.loss.max(y.loss));
    }
}

#[test]
fn illcond_depth_one_grid() {
    let cfg = config(ILLCOND, 4, 1, r#"{"kind": "gd", "eta": 0.01}"#, 5000);
    let (result, _) = grid_search(&cfg, &DEFAULT_RATES, None).unwrap();
    assert_eq!(DEFAULT_RATES.len(), 10);
    let best = result.best_rate().unwrap();
    assert!(best < 2.0 / 100.0, "best {best}");
    for t in &result.traces {
        if t.eta >= 5e-2 {
            assert!(t.diverged, "rate {} should diverge", t.eta);
        }
    }
    assert!(result.table().contains("diverged"));
}

#[test]
fn single_rate_grid() {
    let cfg = config(SYNTH, 2, 1, r#"{"kind": "gd", "eta": 0.01}"#, 2000);
    let (ok, _) = grid_search(&cfg, &[0.1], None).unwrap();
    assert_eq!(ok.best_rate(), Some(0.1));
    let (bad, _) = grid_search(&cfg, &[1e-5], None).unwrap();
    assert_eq!(bad.best, None);
    assert!(bad.table().contains("threshold not reached"));
    assert!(grid_search(&cfg, &[], None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn grid_choice_ignores_rate_order(order in Just((0..DEFAULT_RATES.len()).collect::<Vec<_>>()).prop_shuffle()) {
        let cfg = config(SYNTH, 4, 2, r#"{"kind": "gd", "eta": 0.01}"#, 400);
        let (obj, _) = cfg.objective(None).unwrap();
        let star = reference_optimum(&obj).unwrap().loss;
        let shuffled: Vec<f64> = order.iter().map(|&i| DEFAULT_RATES[i]).collect();
        let a = grid_search_objective(&cfg, &obj, star, &DEFAULT_RATES).unwrap();
        let b = grid_search_objective(&cfg, &obj, star, &shuffled).unwrap();
        prop_assert_eq!(a.best_rate(), b.best_rate());
        prop_assert!(a.best_rate().is_some());
    }
}

#[test]
fn ties_go_to_the_smaller_rate() {
    // Already at the threshold before the first step: every rate ties at 0.
    let mut cfg = config(ILLCOND, 2, 1, r#"{"kind": "gd", "eta": 0.01}"#, 10);
    cfg.delta = 0.999_999;
    let (obj, _) = cfg.objective(None).unwrap();
    let star = reference_optimum(&obj).unwrap().loss;
    let r = grid_search_objective(&cfg, &obj, star, &[0.3, 0.1, 0.2]).unwrap();
    assert!(r.traces.iter().all(|t| t.converged_at == Some(1)), "{:?}", r.traces.iter().map(|t| t.converged_at).collect::<Vec<_>>());
    assert_eq!(r.best_rate(), Some(0.1));
}

#[test]
fn plots_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(SYNTH, 2, 2, r#"{"kind": "gd", "eta": 0.05}"#, 100);
    cfg.name = Some("deep <gd>".into());
    let first = run_experiment(&cfg, None, dir.path()).unwrap().csv_path;
    cfg.name = Some("end-to-end".into());
    cfg.optimizer = Optimizer::E2e { n: 2, eta: 0.05, lambda: 0.0 };
    let second = run_experiment(&cfg, None, dir.path()).unwrap().csv_path;

    let one = dir.path().join("one.svg");
    emit_plot(&[&first], &one).unwrap();
    let text = fs::read_to_string(&one).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 1);

    let two = dir.path().join("two.svg");
    emit_plot(&[&first, &second], &two).unwrap();
    let text = fs::read_to_string(&two).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
    let labels: Vec<&str> = doc.descendants().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()).collect();
    assert!(labels.contains(&"deep <gd>") && labels.contains(&"end-to-end"));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "iter,loss,loss_minus_opt,grad_norm,we_fro_norm,elapsed_ms\n").unwrap();
    assert!(emit_plot(&[&empty], &dir.path().join("x.svg")).is_err());
    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "not,a,trace\n1,2\n").unwrap();
    assert!(emit_plot(&[&garbage], &dir.path().join("y.svg")).is_err());
}

#[test]
fn plot_floor_clips_non_positive_values() {
    use overparam_exp::runner::TraceRow;
    let row = |iter, v| TraceRow { iter, loss: v, loss_minus_opt: v, grad_norm: 0.0, we_fro_norm: 0.0, elapsed_ms: 0.0 };
    let s = Series::from_rows("x", &[row(1, 1.0), row(2, 0.0), row(3, -1.0)]);
    assert_eq!(s.points[1].1, LOG_FLOOR);
    assert_eq!(s.points[2].1, LOG_FLOOR);
    assert!(render_svg(&[s]).unwrap().contains("1e-16"));
}

/// Preconditioner with the left/right exponents shifted by one.
fn off_by_one_precond(w: &Matrix, depth: usize) -> overparam::Result<Matrix> {
    let (k, d) = w.shape();
    let f = svd_full(w)?;
    let sigma = |r: usize| f.s.get(r).copied().unwrap_or(0.0);
    let n = depth as f64;
    let mut p = Matrix::zeros(k * d, k * d);
    for r in 0..k {
        for rp in 0..d {
            let lambda: f64 = (1..=depth)
                .map(|j| sigma(r).powf(2.0 * (depth + 1 - j) as f64 / n) * sigma(rp).powf(2.0 * j as f64 / n))
                .sum();
            let (u, v) = (f.u.column(r), f.v.column(rp));
            let e: Vec<f64> = v.iter().flat_map(|&b| u.iter().map(move |&a| a * b)).collect();
            for a in 0..k * d {
                for b in 0..k * d {
                    p[(a, b)] += lambda * e[a] * e[b];
                }
            }
        }
    }
    Ok(p)
}

#[test]
fn corrupted_preconditioner_fails_equivalence() {
    let only = Some(vec!["rule_equivalence".to_string(), "worked_example_direction".to_string()]);
    let good = verify_suite(&SuiteOptions { only: only.clone(), ..SuiteOptions::default() });
    assert!(good.passed);
    assert_eq!(good.checks.len(), 2);
    let bad = verify_suite(&SuiteOptions { precond: off_by_one_precond, only, ..SuiteOptions::default() });
    assert!(!bad.passed);
    assert!(bad.checks.iter().all(|c| !c.passed), "{:?}", bad.checks);
}

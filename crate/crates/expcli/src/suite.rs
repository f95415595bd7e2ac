//! The verification suite behind `overparam verify`: every numerical
//! invariant of the update rules and the loop-integral machinery, at fixed
//! seeds, aggregated into one JSON report.

use std::time::Instant;

use overparam::matcore::{mat_vec, symmetric_eigen, unvec, vec, Matrix};
use overparam::model::{init_balanced, LinearNetwork};
use overparam::objective::{grad1, Dataset, LpObjective};
use overparam::optim::{
    e2e_direction_general, e2e_direction_single, e2e_step_general, e2e_step_single, precond_eigenvalue,
    precond_matrix, EndToEndState, GdConfig,
};
use overparam::verify::{
    appb_experiment, build_curve, discrete_balancedness_drift, emulation_report, flow_balancedness_drift,
    emulation_report_from, flow_equivalence_gap, jacobian_asymmetry, lemma2_bound, lemma3_reference, line_integral, relative_gap,
    shrink_until_positive, transform_field, companion_radius, conservativity_report, warmup_residual, CurveSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::synth_gaussian;

/// Builds the `kd × kd` preconditioner from `(W_e, N)`.
pub type PrecondFn = fn(&Matrix, usize) -> overparam::Result<Matrix>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub measured: f64,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tool_version: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub precond: PrecondFn,
    /// Run only the named checks; all when `None`.
    pub only: Option<Vec<String>>,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            precond: precond_matrix,
            only: None,
            seed: 20_180_206,
        }
    }
}

/// Gradient of `L(w) = ⟨w, u⟩ + ½‖w‖²` with `u_i = 1/(i+1)`.
pub fn probe_gradient(dim: usize) -> impl Fn(&Matrix) -> Matrix {
    let u = Matrix::from_fn(1, dim, |_, j| 1.0 / (j + 1) as f64);
    move |w: &Matrix| {
        let mut g = u.clone();
        g.axpy(1.0, w);
        g
    }
}

fn gaussian_matrix(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

/// Haar-like random orthogonal matrix from Gram–Schmidt on Gaussian columns.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut q = gaussian_matrix(n, n, 1.0, rng);
    for j in 0..n {
        let mut col = q.column(j);
        for _ in 0..2 {
            for i in 0..j {
                let prev = q.column(i);
                let dot: f64 = prev.iter().zip(&col).map(|(a, b)| a * b).sum();
                col.iter_mut().zip(&prev).for_each(|(c, p)| *c -= dot * p);
            }
        }
        let norm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
        col.iter_mut().for_each(|c| *c /= norm);
        q.set_column(j, &col);
    }
    q
}

/// `W_j → Q_j W_j Q_{j−1}ᵀ` with random orthogonal `Q` on every hidden
/// layer: same end-to-end matrix, same balancedness, different arithmetic.
pub fn rotate_hidden(net: &LinearNetwork, seed: u64) -> overparam::Result<LinearNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = net.widths();
    let depth = net.depth();
    let qs: Vec<Matrix> = (1..depth).map(|j| random_orthogonal(widths[j], &mut rng)).collect();
    let weights = net
        .weights()
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let left = if j + 1 < depth { qs[j].matmul(w) } else { w.clone() };
            if j > 0 {
                left.matmul_t(&qs[j - 1])
            } else {
                left
            }
        })
        .collect();
    LinearNetwork::from_weights(weights)
}

fn scalar_objective(d: usize, m: usize, p: u32, seed: u64) -> overparam::Result<LpObjective> {
    let ds = synth_gaussian(d, m, seed).map_err(|e| overparam::Error::InvalidArgument(e.to_string()))?;
    LpObjective::new(ds, p)
}

struct Runner<'a> {
    opts: &'a SuiteOptions,
    checks: Vec<Check>,
}

impl Runner<'_> {
    fn wanted(&self, name: &str) -> bool {
        self.opts.only.as_ref().is_none_or(|o| o.iter().any(|n| n == name))
    }

    fn run(
        &mut self,
        name: &str,
        comparison: Comparison,
        tolerance: f64,
        f: impl FnOnce() -> overparam::Result<(f64, String)>,
    ) {
        if !self.wanted(name) {
            return;
        }
        let start = Instant::now();
        let (measured, detail, passed) = match f() {
            Ok((m, d)) => {
                let ok = match comparison {
                    Comparison::AtMost => m <= tolerance,
                    Comparison::AtLeast => m >= tolerance,
                };
                (m, d, ok)
            }
            Err(e) => (f64::NAN, format!("error: {e}"), false),
        };
        self.checks.push(Check {
            name: name.to_string(),
            comparison,
            tolerance,
            measured,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

pub fn verify_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = Runner {
        opts,
        checks: Vec::new(),
    };
    let seed = opts.seed;
    let precond = opts.precond;

    r.run("rule_equivalence", Comparison::AtMost, 1e-10, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let k = rng.random_range(1..=4);
            let d = rng.random_range(1..=6);
            let depth = [1, 2, 3, 5][rng.random_range(0..4)];
            let lambda = [0.0, 0.1][rng.random_range(0..2)];
            let w = gaussian_matrix(k, d, 1.0, &mut rng);
            let g = gaussian_matrix(k, d, 1.0, &mut rng);
            let state = EndToEndState::new(w.clone(), depth, GdConfig::new(0.01, lambda)?)?;
            let general = e2e_step_general(&state, &g)?.w_e;
            let p = precond(&w, depth)?;
            let mut via_vec = w.scale(1.0 - 0.01 * lambda * depth as f64);
            via_vec.axpy(-0.01, &unvec(&mat_vec(&p, &vec(&g)), k, d));
            worst = worst.max(general.max_abs_diff(&via_vec));
            if k == 1 {
                worst = worst.max(general.max_abs_diff(&e2e_step_single(&state, &g)?.w_e));
            }
        }
        Ok((worst, "max abs entry difference over 200 random (W_e, grad, N, λ)".into()))
    });

    r.run("worked_example_direction", Comparison::AtMost, 1e-12, || {
        let w = Matrix::row_vector(&[3.0, 4.0]);
        let g = Matrix::row_vector(&[1.0, 0.0]);
        let expected = Matrix::row_vector(&[6.8, 2.4]);
        let via_vec = unvec(&mat_vec(&precond(&w, 2)?, &vec(&g)), 1, 2);
        let dev = [e2e_direction_general(&w, &g, 2)?, via_vec, e2e_direction_single(&w, &g, 2)?]
            .iter()
            .map(|d| d.max_abs_diff(&expected))
            .fold(0.0, f64::max);
        Ok((dev, "W_e=[3,4], N=2, grad=[1,0] against [6.8, 2.4] on all three routes".into()))
    });

    r.run("worked_example_eigenvalues", Comparison::AtMost, 1e-12, || {
        let eig = symmetric_eigen(&precond(&Matrix::row_vector(&[3.0, 4.0]), 2)?)?;
        let dev = (eig.values[0] - 5.0).abs().max((eig.values[1] - 10.0).abs());
        Ok((dev, format!("eigenvalues {:?} against {{5, 10}}", eig.values)))
    });

    r.run("precond_psd", Comparison::AtLeast, -1e-10, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let mut lowest = f64::INFINITY;
        for _ in 0..50 {
            let k = rng.random_range(1..=4);
            let d = rng.random_range(1..=6);
            let depth = [1, 2, 3, 5][rng.random_range(0..4)];
            let mut w = gaussian_matrix(k, d, 1.0, &mut rng);
            if rng.random_bool(0.3) {
                // Rank-deficient end-to-end matrices exercise the zero spectrum.
                let col = w.column(0);
                w = Matrix::from_fn(k, d, |i, j| col[i] * (j as f64 + 1.0));
            }
            lowest = lowest.min(symmetric_eigen(&precond(&w, depth)?)?.values[0]);
        }
        Ok((lowest, "smallest eigenvalue over 50 random preconditioners".into()))
    });

    r.run("precond_monotone", Comparison::AtLeast, 0.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let mut worst = f64::INFINITY;
        for _ in 0..500 {
            let depth = rng.random_range(2..=6);
            let s1: f64 = rng.random_range(0.0..3.0);
            let s2: f64 = rng.random_range(0.0..3.0);
            let h: f64 = rng.random_range(1e-3..0.5);
            let base = precond_eigenvalue(s1, s2, depth);
            worst = worst
                .min(precond_eigenvalue(s1 + h, s2, depth) - base)
                .min(precond_eigenvalue(s1, s2 + h, depth) - base);
        }
        Ok((worst, "smallest eigenvalue change under a positive singular-value perturbation".into()))
    });

    let flow_obj = || scalar_objective(4, 16, 2, seed + 3);
    let flow_net = || init_balanced(&[4, 4, 4, 1], 0.7, seed + 4);
    let flow_eta = 0.1;

    r.run("flow_balancedness", Comparison::AtMost, 1e-8, || {
        let cfg = GdConfig::new(flow_eta, 0.0)?;
        let dt = 1e-3 / flow_eta;
        let drift = flow_balancedness_drift(&flow_net()?, &flow_obj()?, &cfg, dt, 10_000)?;
        Ok((drift, "max residual along RK4 flow, N=3, horizon 10/η, dt = 1e-3/η".into()))
    });

    r.run("flow_balancedness_dt_order", Comparison::AtLeast, 8.0, || {
        let cfg = GdConfig::new(flow_eta, 0.0)?;
        let (net, obj) = (flow_net()?, flow_obj()?);
        let coarse = flow_balancedness_drift(&net, &obj, &cfg, 0.5 / flow_eta, 20)?;
        let fine = flow_balancedness_drift(&net, &obj, &cfg, 0.25 / flow_eta, 40)?;
        Ok((coarse / fine, format!("residual {coarse:.3e} at dt = 0.5/η, {fine:.3e} at dt = 0.25/η")))
    });

    r.run("discrete_balancedness_linear", Comparison::AtMost, 2.0, || {
        let (net, obj) = (flow_net()?, flow_obj()?);
        let full = discrete_balancedness_drift(&net, &obj, &GdConfig::new(flow_eta, 0.0)?, 100)?;
        let half = discrete_balancedness_drift(&net, &obj, &GdConfig::new(flow_eta / 2.0, 0.0)?, 200)?;
        let ratio = full / half;
        Ok((
            (ratio / 2.0).max(2.0 / ratio),
            format!("residual {full:.3e} at η, {half:.3e} at η/2 (ratio {ratio:.3}); measured is the factor off 2"),
        ))
    });

    r.run("flow_equivalence", Comparison::AtMost, 1e-8, || {
        let cfg = GdConfig::new(flow_eta, 0.0)?;
        let net = flow_net()?;
        let gap = flow_equivalence_gap(&net, &flow_obj()?, &cfg, 1e-2 / flow_eta, 1000)?;
        Ok((gap, "max ‖W_N⋯W_1 − W_e‖ between deep and end-to-end flows, N=3".into()))
    });

    r.run("width_independence", Comparison::AtMost, 0.05, || {
        let obj = scalar_objective(16, 64, 2, seed + 5)?;
        let narrow = emulation_report(&[16, 1, 1], &obj, 1e-2, 2000, seed, 0.1)?;
        let wide = rotate_hidden(&init_balanced(&[16, 100, 1], 0.1, seed)?, seed + 12)?;
        let wide = emulation_report_from(&wide, &obj, 1e-2, 2000)?;
        let gap = narrow
            .deep_losses
            .iter()
            .zip(&wide.deep_losses)
            .map(|(a, b)| relative_gap(*a, *b))
            .fold(0.0, f64::max);
        Ok((gap, "max relative loss gap, depth 2, hidden width 1 vs 100 (rotated hidden basis), same collapsed init".into()))
    });

    r.run("emulation_gap", Comparison::AtMost, 0.05, || {
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for p in [2, 4] {
            let obj = scalar_objective(32, 256, p, seed + 6)?;
            for depth in [2, 3] {
                let mut widths = vec![32];
                widths.extend(std::iter::repeat_n(1, depth - 1));
                widths.push(1);
                let rep = emulation_report(&widths, &obj, 1e-3, 5000, seed, 1e-3)?;
                worst = worst.max(rep.max_relative_gap);
                parts.push(format!("p={p} N={depth}: {:.3e}", rep.max_relative_gap));
            }
        }
        Ok((worst, parts.join(", ")))
    });

    r.run("emulation_gap_shrinks", Comparison::AtMost, 1.0, || {
        let obj = scalar_objective(32, 256, 2, seed + 6)?;
        let full = emulation_report(&[32, 1, 1], &obj, 1e-3, 2500, seed, 1e-3)?.max_relative_gap;
        let half = emulation_report(&[32, 1, 1], &obj, 5e-4, 5000, seed, 1e-3)?.max_relative_gap;
        Ok((half / full, format!("gap {full:.3e} at η, {half:.3e} at η/2 over the same horizon")))
    });

    r.run("closed_loop_gradient", Comparison::AtMost, 1e-8, || {
        let mut worst: f64 = 0.0;
        for (p, s) in [(2, 7), (4, 8)] {
            let obj = scalar_objective(3, 8, p, seed + s)?;
            let grad = |w: &Matrix| grad1(w, &obj).expect("shapes match");
            let curve = build_curve(&CurveSpec::new(vec![0.6, -0.8, 0.0], 0.3, 0.9, 1 << 14)?)?;
            let loop_value = line_integral(grad, &curve, 1 << 14)?.value;
            let scale = grad(&Matrix::row_vector(&[0.9, 0.0, 0.0])).frobenius_norm();
            worst = worst.max(loop_value.abs() / (1.0 + scale));
        }
        Ok((worst, "|∮ ∇L¹| / (1 + field scale) for ℓ₂ and ℓ₄ at M = 2^14".into()))
    });

    let constant_loop = |n: usize, m: usize| -> overparam::Result<f64> {
        let e = vec![1.0, 0.0, 0.0];
        let phi = Matrix::row_vector(&e);
        let curve = build_curve(&CurveSpec::new(e, 0.5, 1.0, m)?)?;
        Ok(line_integral(|w| transform_field(w, &phi, n), &curve, m)?.value)
    };

    r.run("closed_form_quadrature", Comparison::AtMost, 1e-5, || {
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for n in [2, 3, 5] {
            let reference = lemma3_reference(n, 0.5, 1.0);
            let value = constant_loop(n, 1 << 16)?;
            // The closed form vanishes at N = 2; compare absolutely there.
            let err = (value - reference).abs() / reference.abs().max(1.0);
            worst = worst.max(err);
            parts.push(format!("N={n}: {value:.9} vs {reference:.9}"));
        }
        Ok((worst, parts.join(", ")))
    });

    r.run("closed_form_convergence_order", Comparison::AtLeast, 4.0, || {
        let mut worst = f64::INFINITY;
        for n in [3, 5] {
            let reference = lemma3_reference(n, 0.5, 1.0);
            let coarse = (constant_loop(n, 1 << 6)? - reference).abs();
            let fine = (constant_loop(n, 1 << 8)? - reference).abs();
            worst = worst.min(coarse / fine);
        }
        Ok((worst, "error(M) / error(4M) at M = 2^6, N ∈ {3, 5}".into()))
    });

    r.run("residual_bound", Comparison::AtMost, 1.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 9);
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let d = rng.random_range(2..=4);
            let n = [2, 3, 5][i % 3];
            let a = gaussian_matrix(d, d, 1.0, &mut rng);
            let b = gaussian_matrix(1, d, 1.0, &mut rng);
            let c: f64 = rng.random_range(-1.0..1.0);
            let phi = move |w: &Matrix| {
                let mut v = w.matmul_t(&a);
                v.axpy(1.0, &b);
                let cube = w.map(|x| c * x * x * x);
                v.axpy(1.0, &cube);
                v
            };
            let raw = gaussian_matrix(1, d, 1.0, &mut rng);
            let e: Vec<f64> = raw.scale(1.0 / raw.frobenius_norm()).as_slice().to_vec();
            let big_r: f64 = rng.random_range(0.2..2.0);
            let curve = build_curve(&CurveSpec::new(e, big_r * 0.4, big_r, 1 << 10)?)?;
            let value = line_integral(|w| transform_field(w, &phi(w), n), &curve, 1 << 10)?.value;
            worst = worst.max(value.abs() / lemma2_bound(&phi, &curve, n));
        }
        Ok((worst, "max |∮F| / bound over 20 random polynomial fields".into()))
    });

    let conservativity = |n: usize| shrink_until_positive(probe_gradient(3), 3, n, 0.1, 1 << 12, 12);

    let deep_report = conservativity(3);
    let deep = || deep_report.as_ref().map_err(|e| overparam::Error::InvalidArgument(e.to_string()));

    r.run("non_conservative", Comparison::AtLeast, 1.0, || {
        let rep = deep()?;
        let ratio = rep.loop_integral.abs() / (10.0 * rep.raw_gradient_loop_integral.abs()).max(1e-8);
        Ok((
            ratio,
            format!(
                "N=3, R={:.4e}: |∮F| = {:.4e}, raw {:.2e}, verdict {}",
                rep.big_r,
                rep.loop_integral.abs(),
                rep.raw_gradient_loop_integral,
                rep.verdict.as_str()
            ),
        ))
    });

    r.run("lower_bound_positive", Comparison::AtLeast, f64::MIN_POSITIVE, || {
        let rep = deep()?;
        Ok((
            rep.lower_bound,
            format!("c·Lemma-3 part {:.4e} minus residual bound {:.4e}", rep.lemma3_constant_part, rep.residual_bound),
        ))
    });

    r.run("loop_exceeds_lower_bound", Comparison::AtLeast, 0.0, || {
        let rep = deep()?;
        Ok((rep.loop_integral.abs() - rep.lower_bound, "|∮F| minus the lower bound".into()))
    });

    r.run("conservative_control", Comparison::AtMost, 1e-8, || {
        let big_r = deep()?.big_r;
        let rep = conservativity_report(probe_gradient(3), 3, 1, companion_radius(1, big_r), big_r, 1 << 12)?;
        Ok((rep.loop_integral.abs(), format!("N=1 on the N=3 curve size, R={big_r:.4e}")))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
    let points: Vec<Matrix> = (0..5).map(|_| gaussian_matrix(1, 3, 0.7, &mut rng)).collect();

    r.run("jacobian_asymmetry_deep", Comparison::AtLeast, 1e-2, || {
        let v = jacobian_asymmetry(probe_gradient(3), 3, &points, 1e-5);
        Ok((v, "max ‖J − Jᵀ‖ of F at 5 off-origin points, N=3".into()))
    });

    r.run("jacobian_symmetry_shallow", Comparison::AtMost, 1e-4, || {
        let v = jacobian_asymmetry(probe_gradient(3), 1, &points, 1e-5);
        Ok((v, "max ‖J − Jᵀ‖ of F at 5 off-origin points, N=1".into()))
    });

    r.run("warmup_quadratic", Comparison::AtMost, 1.0 / 3.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 11);
        let mut worst: f64 = 0.0;
        for trial in 0..20 {
            let p = if trial % 2 == 0 { 2 } else { 4 };
            let d = rng.random_range(1..=5);
            let m = rng.random_range(2..=10);
            let x = gaussian_matrix(m, d, 1.0, &mut rng);
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let obj = LpObjective::new(Dataset::scalar(x, &y)?, p)?;
            let w1 = gaussian_matrix(1, d, 0.5, &mut rng);
            let w2: f64 = rng.random_range(0.3..1.5);
            let eta = 1e-2;
            let full = warmup_residual(&w1, w2, &obj, eta)?;
            let half = warmup_residual(&w1, w2, &obj, eta / 2.0)?;
            if full > 0.0 {
                worst = worst.max(half / full);
            }
        }
        Ok((worst, "max residual(η/2) / residual(η) over 20 random ℓ₂/ℓ₄ problems".into()))
    });

    if r.wanted("two_coordinate") {
        let start = Instant::now();
        let outcome = appb_experiment(100.0, 1.0, 0.1, 1e-3);
        let seconds = start.elapsed().as_secs_f64();
        let (first, ratio, detail) = match outcome {
            Ok(rep) => (
                rep.first_step_relative_error,
                rep.acceleration_ratio,
                format!(
                    "overparameterized {:?} iterations, plain {} (capped: {})",
                    rep.op_iterations, rep.gd_iterations, rep.gd_capped
                ),
            ),
            Err(e) => (f64::NAN, f64::NAN, format!("error: {e}")),
        };
        r.checks.push(Check {
            name: "two_coordinate_first_step".into(),
            comparison: Comparison::AtMost,
            tolerance: 0.1,
            measured: first,
            passed: first <= 0.1,
            detail: "|w₁ − y₁| / y₁ after one overparameterized step".into(),
            seconds,
        });
        r.checks.push(Check {
            name: "two_coordinate_acceleration".into(),
            comparison: Comparison::AtLeast,
            tolerance: 10.0,
            measured: ratio,
            passed: ratio >= 10.0,
            detail,
            seconds: 0.0,
        });
    }

    SuiteReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        passed: r.checks.iter().all(|c| c.passed),
        checks: r.checks,
    }
}

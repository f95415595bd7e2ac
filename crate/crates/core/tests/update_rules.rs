mod support;

use overparam::matcore::{kron, mat_vec, symmetric_eigen, unvec, vec, Matrix};
use overparam::model::{balancedness_residual, end_to_end, init_balanced, init_gaussian, LinearNetwork};
use overparam::objective::{grad1, Dataset, LpObjective};
use overparam::optim::{
    e2e_direction_general, e2e_step_general, e2e_step_single, e2e_step_vec, gd_step_deep, precond_eigenvalue,
    precond_matrix, EndToEndState, GdConfig,
};
use proptest::prelude::*;
use support::{from_na, matrix, na_psd_power, to_na};

fn depth_strategy() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![1usize, 2, 3, 5])
}

/// `Σ_j (WᵀW)^{(N−j)/N} ⊗ (WWᵀ)^{(j−1)/N}` with nalgebra powers.
fn kron_preconditioner(w: &Matrix, depth: usize) -> Matrix {
    let n = depth as f64;
    let left = w.matmul_t(w);
    let right = w.t_matmul(w);
    let size = w.rows() * w.cols();
    let mut p = Matrix::zeros(size, size);
    for j in 1..=depth {
        let term = kron(
            &na_psd_power(&right, (depth - j) as f64 / n),
            &na_psd_power(&left, (j - 1) as f64 / n),
        );
        p.axpy(1.0, &term);
    }
    p
}

fn scalar_objective(m: usize, d: usize, p: u32, seed: u64) -> LpObjective {
    let net = init_gaussian(&[d, m], 1.0, seed).unwrap();
    let x = net.weights()[0].clone();
    let y: Vec<f64> = (0..m).map(|i| ((i * 7 + 3) % 5) as f64 / 4.0 - 0.5).collect();
    LpObjective::new(Dataset::scalar(x, &y).unwrap(), p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn three_routes_agree(
        (w, g) in (1usize..=4, 1usize..=6).prop_flat_map(|(k, d)| (matrix(k, d, 2.0), matrix(k, d, 2.0))),
        depth in depth_strategy(),
        lambda in prop::sample::select(vec![0.0, 0.1]),
    ) {
        let s = EndToEndState::new(w.clone(), depth, GdConfig::new(0.05, lambda).unwrap()).unwrap();
        let general = e2e_step_general(&s, &g).unwrap().w_e;
        let vectorized = e2e_step_vec(&s, &g).unwrap().w_e;
        prop_assert!(general.max_abs_diff(&vectorized) <= 1e-10);
        if w.rows() == 1 {
            prop_assert!(general.max_abs_diff(&e2e_step_single(&s, &g).unwrap().w_e) <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn preconditioner_matches_kronecker_sum(
        w in (1usize..=3, 1usize..=4).prop_flat_map(|(k, d)| matrix(k, d, 2.0)),
        depth in depth_strategy(),
    ) {
        let ours = precond_matrix(&w, depth).unwrap();
        let oracle = kron_preconditioner(&w, depth);
        prop_assert!(ours.max_abs_diff(&oracle) <= 1e-9 * (1.0 + oracle.max_abs()));
    }

    #[test]
    fn preconditioner_is_psd(
        w in (1usize..=4, 1usize..=6).prop_flat_map(|(k, d)| matrix(k, d, 2.0)),
        depth in depth_strategy(),
        rank_one in any::<bool>(),
    ) {
        let w = if rank_one {
            let c = w.column(0);
            Matrix::from_fn(w.rows(), w.cols(), |i, j| c[i] * (1.0 + j as f64))
        } else {
            w
        };
        let p = precond_matrix(&w, depth).unwrap();
        prop_assert!(p.asymmetry() == 0.0);
        prop_assert!(symmetric_eigen(&p).unwrap().values[0] >= -1e-10);
        let theirs = nalgebra::SymmetricEigen::new(to_na(&p)).eigenvalues.min();
        prop_assert!(theirs >= -1e-10);
    }

    #[test]
    fn eigenvalue_is_monotone(
        s1 in 0.0f64..4.0, s2 in 0.0f64..4.0, h in 1e-6f64..1.0, depth in 2usize..8,
    ) {
        let base = precond_eigenvalue(s1, s2, depth);
        prop_assert!(precond_eigenvalue(s1 + h, s2, depth) >= base);
        prop_assert!(precond_eigenvalue(s1, s2 + h, depth) >= base);
    }

    #[test]
    fn eigenvalue_is_symmetric_in_its_arguments(s1 in 0.0f64..4.0, s2 in 0.0f64..4.0, depth in 1usize..8) {
        let a = precond_eigenvalue(s1, s2, depth);
        let b = precond_eigenvalue(s2, s1, depth);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn preconditioner_eigenpairs(
        w in (1usize..=3, 1usize..=4).prop_flat_map(|(k, d)| matrix(k, d, 2.0)),
        depth in 2usize..=5,
    ) {
        // P vec(u_r v_r'ᵀ) = λ(σ_r, σ_r') vec(u_r v_r'ᵀ) on the thin bases.
        let svd = to_na(&w).svd(true, true);
        let (u, v) = (from_na(&svd.u.unwrap()), from_na(&svd.v_t.unwrap().transpose()));
        let p = precond_matrix(&w, depth).unwrap();
        for r in 0..u.cols() {
            for rp in 0..v.cols() {
                let e = Matrix::from_fn(w.rows(), w.cols(), |i, j| u[(i, r)] * v[(j, rp)]);
                let lambda = precond_eigenvalue(svd.singular_values[r], svd.singular_values[rp], depth);
                let pe = unvec(&mat_vec(&p, &vec(&e)), w.rows(), w.cols());
                prop_assert!(pe.max_abs_diff(&e.scale(lambda)) <= 1e-9 * (1.0 + lambda));
            }
        }
    }
}

#[test]
fn worked_example_preconditioner() {
    // W=[3,4], N=2: P = (WᵀW)^{1/2} + 5·I₂ = WᵀW/5 + 5·I₂.
    let w = Matrix::row_vector(&[3.0, 4.0]);
    let expected = Matrix::from_rows(&[&[9.0 / 5.0 + 5.0, 12.0 / 5.0], &[12.0 / 5.0, 16.0 / 5.0 + 5.0]]);
    assert!(precond_matrix(&w, 2).unwrap().max_abs_diff(&expected) < 1e-13);
    let values = symmetric_eigen(&expected).unwrap().values;
    assert!((values[0] - 5.0).abs() < 1e-13 && (values[1] - 10.0).abs() < 1e-13);
}

fn one_step_gap(net: &LinearNetwork, obj: &LpObjective, eta: f64) -> f64 {
    let cfg = GdConfig::new(eta, 0.0).unwrap();
    let deep = end_to_end(&gd_step_deep(net, obj, &cfg).unwrap());
    let s = EndToEndState::new(end_to_end(net), net.depth(), cfg).unwrap();
    let e2e = e2e_step_general(&s, &grad1(&s.w_e, obj).unwrap()).unwrap().w_e;
    (&deep - &e2e).frobenius_norm()
}

#[test]
fn balanced_deep_step_matches_rule_to_second_order() {
    for (depth, p) in [(2, 2), (3, 2), (3, 4), (4, 4)] {
        let obj = scalar_objective(12, 4, p, 5);
        let mut widths = vec![4; depth];
        widths.push(1);
        let net = init_balanced(&widths, 0.8, 9).unwrap();
        assert!(balancedness_residual(&net) < 1e-12);
        let coarse = one_step_gap(&net, &obj, 1e-2);
        let fine = one_step_gap(&net, &obj, 5e-3);
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "depth {depth} p {p}: ratio {ratio}");
    }
}

#[test]
fn multi_output_balanced_step_matches_rule() {
    let x = init_gaussian(&[3, 10], 1.0, 1).unwrap().weights()[0].clone();
    let y = init_gaussian(&[2, 10], 1.0, 2).unwrap().weights()[0].clone();
    let obj = LpObjective::new(Dataset::new(x, y).unwrap(), 2).unwrap();
    let net = init_balanced(&[3, 4, 5, 2], 0.9, 3).unwrap();
    let ratio = one_step_gap(&net, &obj, 1e-2) / one_step_gap(&net, &obj, 5e-3);
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

/// `W_j → Q_j W_j Q_{j−1}ᵀ` with orthogonal `Q` from nalgebra's QR.
fn rotate_hidden(net: &LinearNetwork, seed: u64) -> LinearNetwork {
    let widths = net.widths().to_vec();
    let depth = net.depth();
    let qs: Vec<Matrix> = (1..depth)
        .map(|j| {
            let g = init_gaussian(&[widths[j], widths[j]], 1.0, seed + j as u64).unwrap().weights()[0].clone();
            from_na(&to_na(&g).qr().q())
        })
        .collect();
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
    LinearNetwork::from_weights(weights).unwrap()
}

#[test]
fn hidden_width_does_not_matter() {
    let obj = scalar_objective(16, 5, 4, 11);
    let cfg = GdConfig::new(5e-2, 0.0).unwrap();
    let mut narrow = init_balanced(&[5, 1, 1, 1], 0.6, 4).unwrap();
    let mut wide = rotate_hidden(&init_balanced(&[5, 40, 30, 1], 0.6, 4).unwrap(), 17);
    assert!(end_to_end(&narrow).max_abs_diff(&end_to_end(&wide)) < 1e-12);
    for _ in 0..200 {
        narrow = gd_step_deep(&narrow, &obj, &cfg).unwrap();
        wide = gd_step_deep(&wide, &obj, &cfg).unwrap();
    }
    let (a, b) = (end_to_end(&narrow), end_to_end(&wide));
    assert!(a.max_abs_diff(&b) < 1e-10 * (1.0 + a.max_abs()), "{a:?} vs {b:?}");
}

#[test]
fn weight_decay_enters_as_depth_times_lambda() {
    let w = Matrix::row_vector(&[0.3, -0.2, 0.5]);
    let g = Matrix::zeros(1, 3);
    for depth in [1, 2, 3] {
        let s = EndToEndState::new(w.clone(), depth, GdConfig::new(0.1, 0.2).unwrap()).unwrap();
        let next = e2e_step_general(&s, &g).unwrap().w_e;
        assert!(next.max_abs_diff(&w.scale(1.0 - 0.1 * 0.2 * depth as f64)) < 1e-15);
    }
}

#[test]
fn direction_is_descent() {
    let obj = scalar_objective(10, 4, 4, 2);
    let w = Matrix::row_vector(&[0.2, -0.4, 0.1, 0.7]);
    let g = grad1(&w, &obj).unwrap();
    for depth in [1, 2, 3, 5] {
        assert!(e2e_direction_general(&w, &g, depth).unwrap().inner(&g) > 0.0);
    }
}

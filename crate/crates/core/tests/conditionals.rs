mod common;

use bpls_core::model::{Hyperparameters, ModelVariant, ParamState, VariantKind};
use bpls_core::sampler::{
    c_row_conditional, delta_conditional, flip_log_ratio, lambda2_conditional, residual_sums, scores_conditional,
    uniqueness_conditionals, w_row_conditional,
};
use bpls_core::Matrix;
use common::*;

const TOL: f64 = 1e-10;

fn check_state(state: &ParamState, data: &bpls_core::data::StandardizedDataset) {
    let (mean, cov) = scores_conditional(state, data).unwrap();
    let (m0, c0) = scores_oracle(state, data);
    assert!(max_abs_diff(mean.as_slice(), m0.as_slice()) < TOL);
    assert!(max_abs_diff(cov.as_slice(), c0.as_slice()) < TOL);
    for p in 0..state.w.rows() {
        let (m, c) = w_row_conditional(state, data, p).unwrap();
        let (m0, c0) = w_row_oracle(state, data, p);
        assert!(max_abs_diff(&m, &m0) < TOL, "W row {p}");
        assert!(max_abs_diff(c.as_slice(), c0.as_slice()) < TOL, "W row {p}");
    }
    for r in 0..state.c.rows() {
        let (m, c) = c_row_conditional(state, data, r).unwrap();
        let (m0, c0) = c_row_oracle(state, data, r);
        assert!(max_abs_diff(&m, &m0) < TOL, "C row {r}");
        assert!(max_abs_diff(c.as_slice(), c0.as_slice()) < TOL, "C row {r}");
    }
}

#[test]
fn gaussian_blocks_match_dense_oracle() {
    for seed in 0..25 {
        for kind in [VariantKind::Bpls, VariantKind::SsBpls, VariantKind::LBpls] {
            let (state, data) = random_problem(20, 4, 2, 2, kind, seed);
            check_state(&state, &data);
        }
    }
}

#[test]
fn switched_off_column_follows_prior_in_c() {
    let (mut state, data) = random_problem(20, 4, 2, 2, VariantKind::SsBpls, 7);
    state.b = vec![true, false];
    check_state(&state, &data);
    let (m, c) = c_row_conditional(&state, &data, 0).unwrap();
    assert_eq!(m[1], 0.0);
    let prior_var = 1.0 / (state.tau()[1] * state.phi_dot[(0, 1)]);
    assert!((c[(1, 1)] - prior_var).abs() < 1e-12 * prior_var);
}

#[test]
fn uniqueness_parameters_by_hand() {
    let (state, data) = random_problem(20, 4, 2, 2, VariantKind::Bpls, 3);
    let hp = Hyperparameters::default();
    let rss = residual_sums(&state, &data);
    for p in 0..4 {
        let e: f64 = (0..20)
            .map(|n| {
                let fit = state.w[(p, 0)] * state.z[(n, 0)] + state.w[(p, 1)] * state.z[(n, 1)];
                (data.x[(n, p)] - fit).powi(2)
            })
            .sum();
        assert!((rss.x[p] - e).abs() < 1e-10 * e.max(1.0));
    }
    let (sx, sy) = uniqueness_conditionals(&rss, 20, &hp, &ModelVariant::new(VariantKind::Bpls));
    assert_eq!(sx.len(), 4);
    assert_eq!(sx[2], (2.5 + 10.0, 0.1 + 0.5 * rss.x[2]));
    assert_eq!(sy[1], (2.5 + 10.0, 1.5 + 0.5 * rss.y[1]));

    let iso = ModelVariant { isotropic_sigma: true, isotropic_psi: true, ..ModelVariant::new(VariantKind::Bpls) };
    let (sx, sy) = uniqueness_conditionals(&rss, 20, &hp, &iso);
    assert_eq!(sx.len(), 1);
    assert!((sx[0].0 - (2.5 + 40.0)).abs() < 1e-12);
    assert!((sx[0].1 - (0.1 + 0.5 * rss.x.iter().sum::<f64>())).abs() < 1e-12);
    assert!((sy[0].0 - (2.5 + 20.0)).abs() < 1e-12);
}

#[test]
fn delta_parameters_by_hand_at_two_columns() {
    let (mut state, _) = random_problem(20, 4, 2, 2, VariantKind::Bpls, 11);
    state.set_delta(vec![1.0, 3.0]);
    let hp = Hyperparameters::default();
    let col = |q: usize| -> f64 {
        (0..4).map(|p| state.phi[(p, q)] * state.w[(p, q)].powi(2)).sum::<f64>()
            + (0..2).map(|r| state.phi_dot[(r, q)] * state.c[(r, q)].powi(2)).sum::<f64>()
    };
    // δ₂ only enters τ₂ = δ₁δ₂; with δ₂ left out, τ₂ reduces to δ₁ = 1.
    let (a, b) = delta_conditional(&state, &hp, 1);
    assert!((a - (2.2 + 6.0 / 2.0)).abs() < 1e-12);
    assert!((b - (1.0 + 0.5 * col(1))).abs() < 1e-12);

    let no_r = Hyperparameters { delta_shape_includes_r: false, ..hp };
    let (a, _) = delta_conditional(&state, &no_r, 1);
    assert!((a - (2.2 + 4.0 / 2.0)).abs() < 1e-12);
}

#[test]
fn delta_rate_uses_leave_one_out_products() {
    let (mut state, _) = random_problem(20, 4, 2, 4, VariantKind::Bpls, 12);
    state.set_delta(vec![1.0, 2.0, 0.5, 4.0]);
    let hp = Hyperparameters::default();
    let d = state.delta().to_vec();
    let col = |q: usize| -> f64 {
        (0..4).map(|p| state.phi[(p, q)] * state.w[(p, q)].powi(2)).sum::<f64>()
            + (0..2).map(|r| state.phi_dot[(r, q)] * state.c[(r, q)].powi(2)).sum::<f64>()
    };
    for k in 1..4 {
        let mut tail = 0.0;
        for q in k..4 {
            let prod: f64 = (0..=q).filter(|&l| l != k).map(|l| d[l]).product();
            tail += prod * col(q);
        }
        let (a, b) = delta_conditional(&state, &hp, k);
        assert!((a - (2.2 + (6 * (4 - k)) as f64 / 2.0)).abs() < 1e-12);
        assert!((b - (1.0 + 0.5 * tail)).abs() < 1e-10 * b);
    }
}

#[test]
fn flip_ratio_matches_full_likelihood() {
    for seed in 0..10 {
        let (mut state, data) = random_problem(20, 4, 3, 3, VariantKind::SsBpls, 100 + seed);
        state.b = vec![true, false, true];
        state.p0 = 0.3;
        for q in 0..3 {
            let before = log_lik_y(&state, &data);
            let mut flipped = state.clone();
            flipped.b[q] = !flipped.b[q];
            let after = log_lik_y(&flipped, &data);
            let prior = if flipped.b[q] { (0.3f64 / 0.7).ln() } else { (0.7f64 / 0.3).ln() };
            let expect = after - before + prior;
            let got = flip_log_ratio(&state, &data, q);
            assert!((got - expect).abs() < 1e-9 * expect.abs().max(1.0), "q {q}: {got} vs {expect}");
        }
    }
}

#[test]
fn lambda_parameters_by_hand() {
    let (mut state, _) = random_problem(20, 4, 2, 3, VariantKind::LBpls, 5);
    state.phi_dot = Matrix::from_fn(2, 3, |i, j| 1.0 + i as f64 + 0.5 * j as f64);
    let hp = Hyperparameters::default();
    let inv: f64 = state.phi_dot.as_slice().iter().map(|v| 1.0 / v).sum();
    let (a, b) = lambda2_conditional(&state, &hp);
    assert_eq!(a, 1.0 + 6.0);
    assert!((b - (1.0 + 0.5 * inv)).abs() < 1e-14);
}

/// Empirical mean and covariance of repeated draws against the oracle,
/// measured in units of the oracle's standard deviations.
fn assert_draws_match(draws: &[Vec<f64>], mean: &[f64], cov: &Matrix) {
    let m = draws.len() as f64;
    let q = mean.len();
    for i in 0..q {
        let sd = cov[(i, i)].sqrt();
        let avg = draws.iter().map(|d| d[i]).sum::<f64>() / m;
        assert!((avg - mean[i]).abs() < 5.0 * sd / m.sqrt(), "mean {i}");
        for j in 0..q {
            let c = draws.iter().map(|d| (d[i] - mean[i]) * (d[j] - mean[j])).sum::<f64>() / m;
            let scale = (cov[(i, i)] * cov[(j, j)]).sqrt();
            assert!((c - cov[(i, j)]).abs() < 6.0 * scale * (2.0 / m).sqrt(), "cov {i},{j}");
        }
    }
}

#[test]
fn row_samplers_draw_from_their_conditionals() {
    use bpls_core::sampler::{update_loadings_c, update_loadings_w, update_scores};
    use bpls_core::RngStream;
    let (state, data) = random_problem(20, 4, 2, 2, VariantKind::Bpls, 21);
    let mut rng = RngStream::new(99);
    let reps = 20_000;

    let (m0, c0) = w_row_oracle(&state, &data, 2);
    let mut s = state.clone();
    let draws: Vec<Vec<f64>> = (0..reps)
        .map(|_| {
            update_loadings_w(&mut s, &data, &mut rng).unwrap();
            s.w.row(2).to_vec()
        })
        .collect();
    assert_draws_match(&draws, &m0, &c0);

    let (m0, c0) = c_row_oracle(&state, &data, 1);
    let mut s = state.clone();
    let draws: Vec<Vec<f64>> = (0..reps)
        .map(|_| {
            update_loadings_c(&mut s, &data, &mut rng).unwrap();
            s.c.row(1).to_vec()
        })
        .collect();
    assert_draws_match(&draws, &m0, &c0);

    let (m0, c0) = scores_oracle(&state, &data);
    let mut s = state.clone();
    let draws: Vec<Vec<f64>> = (0..reps)
        .map(|_| {
            update_scores(&mut s, &data, &mut rng).unwrap();
            s.z.row(5).to_vec()
        })
        .collect();
    assert_draws_match(&draws, m0.row(5), &c0);
}

#[test]
fn flip_moves_satisfy_detailed_balance() {
    for seed in 0..10 {
        let (mut state, data) = random_problem(20, 4, 2, 3, VariantKind::SsBpls, 200 + seed);
        state.b = vec![seed % 2 == 0, true, false];
        for q in 0..3 {
            let forward = flip_log_ratio(&state, &data, q);
            let mut flipped = state.clone();
            flipped.b[q] = !flipped.b[q];
            let reverse = flip_log_ratio(&flipped, &data, q);
            assert!((forward + reverse).abs() < 1e-10 * forward.abs().max(1.0), "q {q}");
        }
    }
}

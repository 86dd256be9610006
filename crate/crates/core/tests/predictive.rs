mod common;

use bpls_core::data::StandardizedDataset;
use bpls_core::model::{ChainConfig, Hyperparameters, ModelVariant, VariantKind};
use bpls_core::predict::{
    intervals_from_trace, prediction_intervals, predictive_moments_given_params, rao_blackwell_from_trace,
    rao_blackwell_predict, state_summary,
};
use bpls_core::sampler::run_gibbs;
use bpls_core::{Matrix, RngStream};
use common::predictive::{draw_response, joint_gaussian_moments, latent_mc_moments};
use common::{max_abs_diff, random_problem};

#[test]
fn formula_matches_joint_gaussian_conditioning() {
    for seed in 0..20 {
        for kind in [VariantKind::Bpls, VariantKind::SsBpls] {
            let (mut state, data) = random_problem(20, 5, 3, 3, kind, seed);
            if kind == VariantKind::SsBpls {
                state.b = vec![true, false, true];
            }
            let x = data.x.row(0);
            let (m, c) = predictive_moments_given_params(&state, x).unwrap();
            let (m0, c0) = joint_gaussian_moments(&state, x);
            assert!(max_abs_diff(&m, &m0) < 1e-10, "seed {seed}");
            assert!(max_abs_diff(c.as_slice(), c0.as_slice()) < 1e-10, "seed {seed}");
        }
    }
}

#[test]
fn formula_matches_latent_integration() {
    let draws = 1_000_000;
    let mut rng = RngStream::new(404);
    for seed in [1, 2] {
        let (state, data) = random_problem(20, 4, 2, 2, VariantKind::Bpls, seed);
        let x = data.x.row(3);
        let (m, c) = predictive_moments_given_params(&state, x).unwrap();
        let (m_mc, c_mc) = latent_mc_moments(&state, x, draws, &mut rng);
        let n = draws as f64;
        for i in 0..2 {
            assert!((m[i] - m_mc[i]).abs() < 4.0 * (c[(i, i)] / n).sqrt(), "mean {i}");
            for j in 0..2 {
                let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)] * c[(i, j)]) / n).sqrt();
                assert!((c[(i, j)] - c_mc[(i, j)]).abs() < 4.0 * se, "cov {i},{j}");
            }
        }
    }
}

#[test]
fn summaries_are_rotation_invariant() {
    let (state, _) = random_problem(20, 6, 3, 2, VariantKind::Bpls, 8);
    let th = 0.7_f64;
    let rot = Matrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => th.cos(),
        (0, 1) => -th.sin(),
        _ => th.sin(),
    });
    let mut rotated = state.clone();
    rotated.w = state.w.matmul(&rot);
    rotated.c = state.c.matmul(&rot);
    let a = state_summary(&state).unwrap();
    let b = state_summary(&rotated).unwrap();
    assert!(max_abs_diff(a.projection.as_slice(), b.projection.as_slice()) < 1e-12);
    assert!(max_abs_diff(a.covariance.as_slice(), b.covariance.as_slice()) < 1e-12);
}

fn small_chain() -> (StandardizedDataset, Matrix, bpls_core::sampler::ChainOutput) {
    let (_, data) = random_problem(40, 6, 2, 3, VariantKind::Bpls, 31);
    let (_, test) = random_problem(5, 6, 2, 3, VariantKind::Bpls, 32);
    let hp = Hyperparameters { q_star_override: Some(3), ..Default::default() };
    let cfg = ChainConfig {
        burn_in: 200,
        keep: 4000,
        warm_up_for_truncation: 0,
        store_full_states: true,
        ..Default::default()
    };
    let x_test = test.x.clone();
    let chain =
        run_gibbs(&data, &hp, &ModelVariant::new(VariantKind::Bpls), &cfg, Some(&x_test), &mut RngStream::new(5))
            .unwrap();
    (data, x_test, chain)
}

#[test]
fn rao_blackwell_agrees_with_naive_draws() {
    let (_, x_test, chain) = small_chain();
    let rb = rao_blackwell_predict(&chain.summaries, &x_test).unwrap();
    let mut rng = RngStream::new(77);
    let m = chain.full_states.len() as f64;
    let r = chain.summaries.r();
    // Average within-state covariance: the variance of the naive mean's
    // deviation from the Rao-Blackwell mean, given the chain, times M.
    let mut within = vec![0.0; r];
    for k in 0..chain.summaries.len() {
        for i in 0..r {
            within[i] += chain.summaries.covariance(k)[i * r + i] / m;
        }
    }
    for n in 0..x_test.rows() {
        let mut naive = vec![0.0; r];
        for s in &chain.full_states {
            for (a, v) in naive.iter_mut().zip(draw_response(s, x_test.row(n), &mut rng)) {
                *a += v / m;
            }
        }
        for i in 0..r {
            let z = (naive[i] - rb.mean[(n, i)]) / (within[i] / m).sqrt();
            assert!(z.abs() < 4.0, "row {n} trait {i}: z = {z}");
        }
    }
}

#[test]
fn traced_means_reproduce_summary_predictions() {
    let (_, x_test, chain) = small_chain();
    let trace = chain.test_trace.as_ref().unwrap();
    let a = rao_blackwell_predict(&chain.summaries, &x_test).unwrap();
    let b = rao_blackwell_from_trace(&chain.summaries, trace).unwrap();
    assert!(max_abs_diff(a.mean.as_slice(), b.mean.as_slice()) < 1e-12);
    for (ca, cb) in a.covariance.iter().zip(&b.covariance) {
        assert!(max_abs_diff(ca.as_slice(), cb.as_slice()) < 1e-12);
    }
    let (lo_a, hi_a) = prediction_intervals(&chain.summaries, &x_test, 0.95, &mut RngStream::new(3)).unwrap();
    let (lo_b, hi_b) = intervals_from_trace(&chain.summaries, trace, 0.95, &mut RngStream::new(3)).unwrap();
    assert!(max_abs_diff(lo_a.as_slice(), lo_b.as_slice()) < 1e-12);
    assert!(max_abs_diff(hi_a.as_slice(), hi_b.as_slice()) < 1e-12);
}

#[test]
fn trace_length_mismatch_is_rejected() {
    let (_, _, chain) = small_chain();
    let trace = chain.test_trace.as_ref().unwrap();
    assert!(rao_blackwell_from_trace(&chain.summaries, &trace[1..]).is_err());
}

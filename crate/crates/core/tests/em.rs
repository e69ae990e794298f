use hkf::em::{e_step, em_estimate_noise, initial_noise_model, m_step, EmOptions};
use hkf::intra::initial_belief_from_beats;
use hkf::linalg::is_psd;
use hkf::{
    GaussianBelief, HeartbeatTensor, IntraNoiseModel, TaylorBasisConfig, TaylorPrior, WindowConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Beats drawn from the intra model itself with constant `q` and `r`.
fn model_beats(n: usize, len: usize, q: &[f64], r: &[f64], seed: u64) -> HeartbeatTensor {
    let m = q.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beats = (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut beat = DMatrix::zeros(m, len);
            for t in 0..len {
                for c in 0..m {
                    if t > 0 {
                        x[c] += 0.05 * (t as f64 * 0.3).sin()
                            + q[c].sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                    beat[(c, t)] = x[c] + r[c].sqrt() * rng.sample::<f64, _>(StandardNormal);
                }
            }
            beat
        })
        .collect();
    HeartbeatTensor::from_beats(beats).unwrap()
}

fn true_prior(len: usize, m: usize) -> TaylorPrior {
    let basis = TaylorBasisConfig::new(1, 1.0).unwrap();
    let theta = (0..len)
        .map(|t| {
            let inc = if t + 1 < len { 0.05 * ((t + 1) as f64 * 0.3).sin() } else { 0.0 };
            DMatrix::from_element(1, m, inc)
        })
        .collect();
    TaylorPrior::from_theta(theta, basis).unwrap()
}

fn belief_for(beats: &HeartbeatTensor) -> GaussianBelief {
    let init = initial_noise_model(beats).unwrap();
    initial_belief_from_beats(beats.beats(), init.r()).unwrap()
}

#[test]
fn recovers_generating_covariances() {
    let (q, r) = ([0.01, 0.04], [0.25, 0.09]);
    let beats = model_beats(300, 40, &q, &r, 1);
    let prior = true_prior(40, 2);
    let opts = EmOptions {
        iters: 200,
        rel_tol: 1e-10,
        literal_q_update: false,
    };
    let window = WindowConfig::uniform(3, 3);
    let out = em_estimate_noise(
        &beats,
        &prior,
        &window,
        &initial_noise_model(&beats).unwrap(),
        &belief_for(&beats),
        &opts,
    )
    .unwrap();
    for c in 0..2 {
        let r_hat = out.noise.r()[(c, c)];
        assert!((r_hat - r[c]).abs() < 0.1 * r[c], "R[{c}] = {r_hat}");
        let q_mean = out.noise.q()[1..].iter().map(|m| m[(c, c)]).sum::<f64>() / 39.0;
        assert!((q_mean - q[c]).abs() < 0.25 * q[c], "mean Q[{c}] = {q_mean}");
    }
    assert!(out.noise.r()[(0, 1)].abs() < 0.02);
}

#[test]
fn identity_evolution_without_process_noise() {
    for sigma in [0.1, 0.3, 1.0] {
        let beats = model_beats(100, 50, &[0.0, 0.0], &[sigma * sigma; 2], 7);
        let prior = true_prior(50, 2);
        let opts = EmOptions {
            iters: 10,
            rel_tol: 0.0,
            literal_q_update: false,
        };
        let out = em_estimate_noise(
            &beats,
            &prior,
            &WindowConfig::uniform(2, 2),
            &initial_noise_model(&beats).unwrap(),
            &belief_for(&beats),
            &opts,
        )
        .unwrap();
        let truth = DMatrix::identity(2, 2) * sigma * sigma;
        let rel = (out.noise.r() - &truth).norm() / truth.norm();
        assert!(rel < 0.15, "sigma {sigma}: {rel}");
    }
}

#[test]
fn converged_parameters_are_a_fixed_point() {
    let beats = model_beats(60, 10, &[1.0], &[0.5], 2);
    let prior = true_prior(10, 1);
    let belief = belief_for(&beats);
    let window = WindowConfig::default();
    let mut noise = initial_noise_model(&beats).unwrap();
    let change = |a: &IntraNoiseModel, b: &IntraNoiseModel| {
        let mut worst = (a.r() - b.r()).norm() / b.r().norm();
        for (qa, qb) in a.q().iter().zip(b.q()).skip(1) {
            worst = worst.max((qa - qb).norm() / qb.norm());
        }
        worst
    };
    let mut last = f64::INFINITY;
    for _ in 0..20000 {
        let (stats, _) = e_step(&beats, &prior, &noise, &belief).unwrap();
        let next = m_step(&stats, &prior, &window, false).unwrap();
        last = change(&next, &noise);
        noise = next;
        if last < 1e-12 {
            break;
        }
    }
    assert!(last < 1e-12, "still moving by {last}");
    let (stats, _) = e_step(&beats, &prior, &noise, &belief).unwrap();
    let again = m_step(&stats, &prior, &window, false).unwrap();
    assert!(change(&again, &noise) < 1e-9);
}

#[test]
fn estimates_are_psd() {
    let beats = model_beats(30, 25, &[0.02, 0.0], &[0.1, 0.3], 3);
    let prior = true_prior(25, 2);
    let out = em_estimate_noise(
        &beats,
        &prior,
        &WindowConfig::uniform(2, 2),
        &initial_noise_model(&beats).unwrap(),
        &belief_for(&beats),
        &EmOptions::default(),
    )
    .unwrap();
    assert!(is_psd(out.noise.r(), 1e-8));
    assert!(out.noise.q().iter().all(|q| is_psd(q, 1e-8)));
}

#[test]
fn stops_early_once_likelihood_settles() {
    let beats = model_beats(50, 15, &[0.02], &[0.1], 4);
    let prior = true_prior(15, 1);
    let opts = EmOptions {
        iters: 500,
        rel_tol: 1e-6,
        literal_q_update: false,
    };
    let out = em_estimate_noise(
        &beats,
        &prior,
        &WindowConfig::default(),
        &initial_noise_model(&beats).unwrap(),
        &belief_for(&beats),
        &opts,
    )
    .unwrap();
    assert!(out.log_likelihood.len() < 500);
    let n = out.log_likelihood.len();
    let last = out.log_likelihood[n - 1];
    let prev = out.log_likelihood[n - 2];
    assert!(((last - prev) / prev.abs()).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn likelihood_never_decreases(
        seed in any::<u64>(),
        m in 1usize..=2,
        len in 5usize..12,
        n in 4usize..10,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beats = (0..n)
            .map(|_| DMatrix::from_fn(m, len, |_, t| (t as f64 * 0.5).sin() + 0.3 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let beats = HeartbeatTensor::from_beats(beats).unwrap();
        let basis = TaylorBasisConfig::new(1, 1.0).unwrap();
        let window = WindowConfig::default();
        let prior = hkf::fit_taylor_prior(&beats, &window, &basis).unwrap();
        let init_noise = IntraNoiseModel::constant(
            len,
            DMatrix::identity(m, m) * 0.1,
            DMatrix::identity(m, m) * 0.1,
        )
        .unwrap();
        let belief = GaussianBelief::new(DVector::zeros(m), DMatrix::identity(m, m)).unwrap();
        let opts = EmOptions { iters: 10, rel_tol: 0.0, literal_q_update: false };
        let out = em_estimate_noise(&beats, &prior, &window, &init_noise, &belief, &opts).unwrap();
        for w in out.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }
}

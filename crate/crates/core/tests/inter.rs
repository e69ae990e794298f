use hkf::inter::clamped_process_estimate;
use hkf::linalg::is_psd;
use hkf::{
    estimate_inter_q, init_inter_state, inter_update_beat, InterBank, InterNoiseEstimator,
    InterObservation, QMode,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn noisy_obs(rng: &mut ChaCha8Rng, template: &DMatrix<f64>, r: f64) -> InterObservation {
    let means = template.map(|v| v + r.sqrt() * rng.sample::<f64, _>(StandardNormal));
    InterObservation {
        means,
        covs: vec![DMatrix::identity(template.nrows(), template.nrows()) * r; template.ncols()],
    }
}

#[test]
fn full_clamp_zeroes_the_negative_eigen_direction() {
    let angle: f64 = 0.3;
    let u = DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
    let raw = &u * DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -0.5])) * u.transpose();
    // rrᵀ − Σ − R with r = 0, R = 0 and Σ = −raw reproduces `raw`.
    let got = clamped_process_estimate(&DVector::zeros(2), &(-&raw), &DMatrix::zeros(2, 2), QMode::Full);
    let expected = &u * DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0])) * u.transpose();
    assert!((got - expected).norm() < 1e-12);
}

#[test]
fn diagonal_clamp_drops_off_diagonals() {
    let r = DVector::from_vec(vec![2.0, 0.5]);
    let got = clamped_process_estimate(&r, &DMatrix::identity(2, 2), &DMatrix::zeros(2, 2), QMode::Diagonal);
    assert_eq!(got, DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0])));
}

/// Scalar bank reimplemented by hand for T = 3 over five beats.
#[test]
fn scalar_bank_matches_hand_recursion() {
    let alpha = 0.7;
    let beats = [
        [1.0, 2.0, -1.0],
        [1.5, 1.0, -0.5],
        [0.2, 3.5, -1.2],
        [1.1, 2.2, 0.4],
        [0.9, 1.7, -0.9],
    ];
    let r = [0.3, 0.1, 0.6];
    let obs: Vec<InterObservation> = beats
        .iter()
        .map(|b| InterObservation {
            means: DMatrix::from_row_slice(1, 3, b),
            covs: r.iter().map(|&v| scalar(v)).collect(),
        })
        .collect();
    let mut bank = InterBank::new(&obs[0], InterNoiseEstimator::new(alpha, QMode::Full).unwrap());
    let mut mean = beats[0];
    let mut var = r;
    let mut qbar: Option<[f64; 3]> = None;
    for (i, o) in obs.iter().enumerate().skip(1) {
        let mut fresh = [0.0; 3];
        for t in 0..3 {
            let resid = beats[i][t] - mean[t];
            fresh[t] = (resid * resid - var[t] - r[t]).max(0.0);
        }
        let q = match qbar {
            None => fresh,
            Some(prev) => [0, 1, 2].map(|t| alpha * prev[t] + (1.0 - alpha) * fresh[t]),
        };
        qbar = Some(q);
        for t in 0..3 {
            let pred = var[t] + q[t];
            let gain = pred / (pred + r[t]);
            mean[t] += gain * (beats[i][t] - mean[t]);
            var[t] = (1.0 - gain) * pred;
        }
        bank = bank.step(o).unwrap();
        for t in 0..3 {
            assert!((bank.state.means[(0, t)] - mean[t]).abs() < 1e-12, "beat {i} t {t}");
            assert!((bank.state.covs[t][(0, 0)] - var[t]).abs() < 1e-12);
        }
    }
    assert_eq!(bank.state.beat_index, 5);
}

#[test]
fn first_beat_initializes_from_observation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let obs = noisy_obs(&mut rng, &DMatrix::from_element(2, 4, 1.0), 0.2);
    let state = init_inter_state(&obs);
    assert_eq!(state.means, obs.means);
    assert_eq!(state.covs, obs.covs);
    assert_eq!(state.beat_index, 1);
}

#[test]
fn indices_evolve_independently() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let template = DMatrix::from_fn(2, 6, |c, t| (t as f64 + c as f64).sin());
    let obs: Vec<InterObservation> = (0..30).map(|_| noisy_obs(&mut rng, &template, 0.1)).collect();
    let perm = [3, 0, 5, 1, 4, 2];
    let permute = |o: &InterObservation| InterObservation {
        means: DMatrix::from_fn(2, 6, |c, t| o.means[(c, perm[t])]),
        covs: perm.iter().map(|&p| o.covs[p].clone()).collect(),
    };
    let est = InterNoiseEstimator::new(0.9, QMode::Full).unwrap();
    let mut a = InterBank::new(&obs[0], est.clone());
    let mut b = InterBank::new(&permute(&obs[0]), est);
    for o in &obs[1..] {
        a = a.step(o).unwrap();
        b = b.step(&permute(o)).unwrap();
    }
    for (t, &p) in perm.iter().enumerate() {
        assert_eq!(b.state.means.column(t), a.state.means.column(p));
        assert_eq!(b.state.covs[t], a.state.covs[p]);
    }
}

#[test]
fn estimate_without_smoothing_is_the_raw_clamp() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let template = DMatrix::zeros(2, 5);
    let first = noisy_obs(&mut rng, &template, 0.5);
    let second = noisy_obs(&mut rng, &template, 0.5);
    let state = init_inter_state(&first);
    let raw = estimate_inter_q(&second, &state, QMode::Full).unwrap();
    let mut est = InterNoiseEstimator::new(0.5, QMode::Full).unwrap();
    assert_eq!(est.estimate(&second, &state).unwrap(), raw.as_slice());
}

#[test]
fn zero_process_noise_averages_the_beats() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let template = DMatrix::from_fn(1, 40, |_, t| (t as f64 * 0.2).sin());
    let r = 0.25;
    let zero = vec![scalar(0.0); 40];
    let first = noisy_obs(&mut rng, &template, r);
    let mut sum = first.means.clone();
    let mut state = init_inter_state(&first);
    let mut errors = vec![(&state.means - &template).norm_squared() / 40.0];
    for tau in 2..=200 {
        let obs = noisy_obs(&mut rng, &template, r);
        sum += &obs.means;
        state = inter_update_beat(&state, &obs, &zero).unwrap();
        // Identity evolution without process noise is the running mean.
        assert!((&state.means - &sum / tau as f64).norm() < 1e-10);
        assert!((state.covs[0][(0, 0)] - r / tau as f64).abs() < 1e-12);
        errors.push((&state.means - &template).norm_squared() / 40.0);
    }
    let block = |i: usize| errors[i * 40..(i + 1) * 40].iter().sum::<f64>() / 40.0;
    for i in 0..4 {
        assert!(block(i) > block(i + 1), "block {i}: {} vs {}", block(i), block(i + 1));
    }
    assert!(block(4) < r / 100.0);
}

#[test]
fn adaptive_bank_improves_on_a_stationary_template() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let template = DMatrix::from_fn(1, 40, |_, t| (t as f64 * 0.2).sin());
    let r = 0.25;
    let mut bank: Option<InterBank> = None;
    let mut errors = Vec::new();
    let mut raw = Vec::new();
    for _ in 0..200 {
        let obs = noisy_obs(&mut rng, &template, r);
        raw.push((&obs.means - &template).norm_squared() / 40.0);
        let next = match &bank {
            None => InterBank::new(&obs, InterNoiseEstimator::new(0.9, QMode::Full).unwrap()),
            Some(b) => b.step(&obs).unwrap(),
        };
        errors.push((&next.state.means - &template).norm_squared() / 40.0);
        bank = Some(next);
    }
    let block = |e: &[f64], i: usize| e[i * 40..(i + 1) * 40].iter().sum::<f64>() / 40.0;
    for i in 1..5 {
        assert!(block(&errors, i) < 0.5 * block(&raw, i), "block {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scalar_update_is_a_convex_combination(
        prev in -5.0f64..5.0,
        y in -5.0f64..5.0,
        p in 0.0f64..3.0,
        q in 0.0f64..3.0,
        r in 1e-3f64..3.0,
    ) {
        let state = hkf::InterState { means: scalar(prev), covs: vec![scalar(p)], beat_index: 0 };
        let obs = InterObservation { means: scalar(y), covs: vec![scalar(r)] };
        let next = inter_update_beat(&state, &obs, &[scalar(q)]).unwrap();
        let gain = if (y - prev).abs() > 1e-12 { (next.means[(0, 0)] - prev) / (y - prev) } else { 0.5 };
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&gain));
        prop_assert!(next.covs[0][(0, 0)] <= p + q + 1e-12);
        prop_assert!(next.covs[0][(0, 0)] <= r + 1e-12);
    }

    #[test]
    fn clamp_is_always_psd(seed in any::<u64>(), m in 1usize..=4, diag in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psd = |scale: f64| {
            let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            &a * a.transpose() * scale
        };
        let prev = psd(1.0);
        let ext = psd(0.5);
        let r = DVector::from_fn(m, |i, _| (i as f64 + 1.0) * (seed % 7) as f64 * 0.3);
        let mode = if diag { QMode::Diagonal } else { QMode::Full };
        prop_assert!(is_psd(&clamped_process_estimate(&r, &prev, &ext, mode), 1e-8));
    }
}

mod common;

use common::{joint_condition, oracle_errors, random_instance, random_psd};
use hkf::linalg::is_psd;
use hkf::{kf_forward_beat, rts_backward_beat, smooth_beat, GaussianBelief, IntraNoiseModel};
use hkf::{TaylorBasisConfig, TaylorPrior};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn scalar_two_sample_smoother_by_hand() {
    // x0 ~ N(0, 1), x1 = x0 + e with var 1, unit observation noise, y = (1, 2).
    // Joint prior cov [[1, 1], [1, 2]]; adding R gives [[2, 1], [1, 3]] with
    // inverse [[3, -1], [-1, 2]] / 5.
    let prior = TaylorPrior::zeros(2, 1, TaylorBasisConfig::new(1, 1.0).unwrap());
    let one = DMatrix::from_element(1, 1, 1.0);
    let noise = IntraNoiseModel::constant(2, one.clone(), one.clone()).unwrap();
    let init = GaussianBelief::new(DVector::zeros(1), one).unwrap();
    let y = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
    let sm = smooth_beat(&y, &prior, &noise, &init).unwrap();
    assert!((sm.means[(0, 0)] - 0.8).abs() < 1e-12);
    assert!((sm.means[(0, 1)] - 1.4).abs() < 1e-12);
    assert!((sm.covs[0][(0, 0)] - 0.4).abs() < 1e-12);
    assert!((sm.covs[1][(0, 0)] - 0.6).abs() < 1e-12);
    assert!((sm.lag_one[1][(0, 0)] - 0.2).abs() < 1e-12);
}

#[test]
fn random_instances_match_joint_conditioning() {
    for seed in 0..40 {
        let m = 1 + (seed as usize % 2);
        let len = 2 + (seed as usize % 5);
        let (f, s) = oracle_errors(&random_instance(seed, m, len));
        assert!(f < 1e-8, "seed {seed}: filtered rel err {f}");
        assert!(s < 1e-8, "seed {seed}: smoothed rel err {s}");
    }
}

#[test]
fn log_likelihood_matches_joint_marginal() {
    for seed in 100..110 {
        let inst = random_instance(seed, 2, 5);
        let fwd = kf_forward_beat(&inst.y, &inst.prior, &inst.noise, &inst.init).unwrap();
        // Marginal of stacked y: mean μ, cov C + blockdiag(R).
        let empty = joint_condition(
            &inst.y,
            inst.prior.increments(),
            inst.noise.q(),
            inst.noise.r(),
            &inst.init,
            0,
        );
        let (m, len) = inst.y.shape();
        let mut s = empty.cov.clone();
        for t in 0..len {
            let mut blk = s.view_mut((t * m, t * m), (m, m));
            blk += inst.noise.r();
        }
        let resid = DVector::from_iterator(m * len, inst.y.iter().copied()) - &empty.mean;
        let logdet = s.clone().lu().determinant().ln();
        let quad = resid.dot(&s.lu().solve(&resid).unwrap());
        let n = (m * len) as f64;
        let expected = -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
        assert!(
            (fwd.log_likelihood - expected).abs() < 1e-9 * expected.abs().max(1.0),
            "{} vs {expected}",
            fwd.log_likelihood
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoother_agrees_with_oracle(seed in any::<u64>(), m in 1usize..=2, len in 2usize..=6) {
        let (f, s) = oracle_errors(&random_instance(seed, m, len));
        prop_assert!(f < 1e-8);
        prop_assert!(s < 1e-8);
    }

    #[test]
    fn smoothing_never_inflates_uncertainty(seed in any::<u64>(), m in 1usize..=3, len in 2usize..=8) {
        let inst = random_instance(seed, m, len);
        let fwd = kf_forward_beat(&inst.y, &inst.prior, &inst.noise, &inst.init).unwrap();
        let sm = rts_backward_beat(&fwd).unwrap();
        for t in 0..len {
            prop_assert!(is_psd(&sm.covs[t], 1e-10));
            prop_assert!(is_psd(&fwd.filtered[t].cov, 1e-10));
            prop_assert!(is_psd(&fwd.predicted[t].cov, 1e-10));
            let gap = &fwd.filtered[t].cov - &sm.covs[t];
            prop_assert!(is_psd(&gap, 1e-9));
        }
        prop_assert_eq!(sm.covs.len(), len);
        prop_assert_eq!(sm.means.shape(), (m, len));
    }
}

#[test]
fn huge_observation_noise_returns_the_prior_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = random_instance(3, 2, 6);
    let r = DMatrix::identity(2, 2) * 1e14;
    let noise = IntraNoiseModel::new(inst.noise.q().to_vec(), r).unwrap();
    let init = GaussianBelief::new(inst.init.mean.clone(), random_psd(&mut rng, 2, 0.1)).unwrap();
    let sm = smooth_beat(&inst.y, &inst.prior, &noise, &init).unwrap();
    let mut level = init.mean.clone();
    for t in 0..6 {
        if t > 0 {
            level += inst.prior.increments().column(t - 1);
        }
        assert!((sm.means.column(t) - &level).norm() < 1e-8);
    }
}

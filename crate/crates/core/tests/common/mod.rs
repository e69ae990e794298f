#![allow(dead_code)]

use hkf::{GaussianBelief, IntraNoiseModel, TaylorBasisConfig, TaylorPrior};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Posterior of the stacked state `(x_0, …, x_{T-1})` computed by building the
/// full joint Gaussian and conditioning on a prefix of observations with a
/// dense LU solve. No recursion is shared with the filter.
pub struct JointPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub m: usize,
}

impl JointPosterior {
    pub fn mean_at(&self, t: usize) -> DVector<f64> {
        self.mean.rows(t * self.m, self.m).into_owned()
    }

    pub fn cov_at(&self, s: usize, t: usize) -> DMatrix<f64> {
        self.cov.view((s * self.m, t * self.m), (self.m, self.m)).into_owned()
    }
}

pub fn joint_condition(
    y: &DMatrix<f64>,
    increments: &DMatrix<f64>,
    q: &[DMatrix<f64>],
    r: &DMatrix<f64>,
    init: &GaussianBelief,
    observed: usize,
) -> JointPosterior {
    let (m, len) = y.shape();
    let n = m * len;
    let mut mu = DVector::zeros(n);
    let mut level = init.mean.clone();
    // cumulative process covariance up to t
    let mut cum = vec![init.cov.clone()];
    for t in 0..len {
        if t > 0 {
            level += increments.column(t - 1);
            let next = &cum[t - 1] + &q[t];
            cum.push(next);
        }
        mu.rows_mut(t * m, m).copy_from(&level);
    }
    let mut c = DMatrix::zeros(n, n);
    for s in 0..len {
        for t in 0..len {
            let block = &cum[s.min(t)];
            c.view_mut((s * m, t * m), (m, m)).copy_from(block);
        }
    }
    let k = observed * m;
    if k == 0 {
        return JointPosterior { mean: mu, cov: c, m };
    }
    let mut s_oo = c.view((0, 0), (k, k)).into_owned();
    for t in 0..observed {
        let mut blk = s_oo.view_mut((t * m, t * m), (m, m));
        blk += r;
    }
    let c_xo = c.columns(0, k).into_owned();
    let mut resid = DVector::zeros(k);
    for t in 0..observed {
        resid
            .rows_mut(t * m, m)
            .copy_from(&(y.column(t) - mu.rows(t * m, m)));
    }
    let lu = s_oo.lu();
    let w = lu.solve(&resid).expect("joint observation covariance invertible");
    let v = lu.solve(&c_xo.transpose()).expect("joint observation covariance invertible");
    JointPosterior {
        mean: &mu + &c_xo * w,
        cov: &c - &c_xo * v,
        m,
    }
}

pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn random_psd(rng: &mut ChaCha8Rng, m: usize, ridge: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() * 0.5 + DMatrix::identity(m, m) * ridge
}

/// A random small smoothing problem.
pub struct Instance {
    pub y: DMatrix<f64>,
    pub prior: TaylorPrior,
    pub noise: IntraNoiseModel,
    pub init: GaussianBelief,
}

pub fn random_instance(seed: u64, m: usize, len: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = TaylorBasisConfig::new(2, 1.0).unwrap();
    let theta = (0..len)
        .map(|_| DMatrix::from_fn(2, m, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let prior = TaylorPrior::from_theta(theta, basis).unwrap();
    let q = (0..len).map(|_| random_psd(&mut rng, m, 0.05)).collect();
    let r = random_psd(&mut rng, m, 0.1);
    let noise = IntraNoiseModel::new(q, r).unwrap();
    let init = GaussianBelief::new(
        DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)),
        random_psd(&mut rng, m, 0.2),
    )
    .unwrap();
    let y = DMatrix::from_fn(m, len, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
    Instance {
        y,
        prior,
        noise,
        init,
    }
}

/// Worst relative error of filtered and smoothed moments against the joint
/// oracle for one instance: `(filtered, smoothed)`.
pub fn oracle_errors(inst: &Instance) -> (f64, f64) {
    let (_, len) = inst.y.shape();
    let fwd = hkf::kf_forward_beat(&inst.y, &inst.prior, &inst.noise, &inst.init).unwrap();
    let sm = hkf::rts_backward_beat(&fwd).unwrap();
    let mut filt_err: f64 = 0.0;
    for t in 0..len {
        let post = joint_condition(
            &inst.y,
            inst.prior.increments(),
            inst.noise.q(),
            inst.noise.r(),
            &inst.init,
            t + 1,
        );
        filt_err = filt_err
            .max(rel_err_vec(&fwd.filtered[t].mean, &post.mean_at(t)))
            .max(rel_err_mat(&fwd.filtered[t].cov, &post.cov_at(t, t)));
    }
    let full = joint_condition(
        &inst.y,
        inst.prior.increments(),
        inst.noise.q(),
        inst.noise.r(),
        &inst.init,
        len,
    );
    let mut sm_err: f64 = 0.0;
    for t in 0..len {
        sm_err = sm_err
            .max(rel_err_vec(&sm.means.column(t).into_owned(), &full.mean_at(t)))
            .max(rel_err_mat(&sm.covs[t], &full.cov_at(t, t)));
        if t > 0 {
            sm_err = sm_err.max(rel_err_mat(&sm.lag_one[t], &full.cov_at(t, t - 1)));
        }
    }
    (filt_err, sm_err)
}

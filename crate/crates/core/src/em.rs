//! Expectation–maximization for the intra-beat noise covariances.
//!
//! The E-step smooths every warm-up beat and averages the posterior second
//! moments across beats. The M-step forms the per-index process covariance
//! from the expected squared transition residual, averages it over a short
//! window of neighbouring indices, and forms one observation covariance
//! averaged over the whole beat.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::beat::HeartbeatTensor;
use crate::error::{HkfError, Result};
use crate::intra::{smooth_beat, GaussianBelief, IntraNoiseModel, SmoothedBeat};
use crate::linalg::{clamp_eigenvalues, EIGEN_FLOOR};
use crate::taylor::{TaylorPrior, WindowConfig};

/// Posterior moments averaged over beats, one entry per intra index.
#[derive(Debug, Clone)]
pub struct EmStatistics {
    /// `E[x_t x_tᵀ]`.
    pub xii: Vec<DMatrix<f64>>,
    /// `E[x_t] y_tᵀ`.
    pub xy: Vec<DMatrix<f64>>,
    /// `y_t y_tᵀ`.
    pub yii: Vec<DMatrix<f64>>,
    /// `E[x_t x_{t-1}ᵀ]`; entry 0 is zero.
    pub xx: Vec<DMatrix<f64>>,
    /// `E[x_t]`.
    pub mean: Vec<DVector<f64>>,
}

impl EmStatistics {
    fn zeros(m: usize, len: usize) -> Self {
        Self {
            xii: vec![DMatrix::zeros(m, m); len],
            xy: vec![DMatrix::zeros(m, m); len],
            yii: vec![DMatrix::zeros(m, m); len],
            xx: vec![DMatrix::zeros(m, m); len],
            mean: vec![DVector::zeros(m); len],
        }
    }

    fn accumulate(&mut self, y: &DMatrix<f64>, sm: &SmoothedBeat) {
        for t in 0..y.ncols() {
            let x = sm.means.column(t);
            let yt = y.column(t);
            self.xii[t] += x * x.transpose() + &sm.covs[t];
            self.xy[t] += x * yt.transpose();
            self.yii[t] += yt * yt.transpose();
            self.mean[t] += x;
            if t > 0 {
                self.xx[t] += x * sm.means.column(t - 1).transpose() + &sm.lag_one[t];
            }
        }
    }

    fn scale(&mut self, f: f64) {
        let mats = self
            .xii
            .iter_mut()
            .chain(self.xy.iter_mut())
            .chain(self.yii.iter_mut())
            .chain(self.xx.iter_mut());
        for a in mats {
            *a *= f;
        }
        for v in &mut self.mean {
            *v *= f;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Maximum number of EM iterations.
    pub iters: usize,
    /// Stop once the relative log-likelihood change drops below this.
    pub rel_tol: f64,
    /// Use the textbook-literal process-noise update that ignores the prior
    /// increment. Off by default; with it on, likelihood need not increase.
    pub literal_q_update: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            iters: 10,
            rel_tol: 1e-6,
            literal_q_update: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub noise: IntraNoiseModel,
    /// Log-likelihood of the parameters entering each iteration.
    pub log_likelihood: Vec<f64>,
}

/// Smooths every beat under the current model and averages the moments.
/// Returns the statistics and the total log-likelihood over beats.
pub fn e_step(
    beats: &HeartbeatTensor,
    prior: &TaylorPrior,
    noise: &IntraNoiseModel,
    init: &GaussianBelief,
) -> Result<(EmStatistics, f64)> {
    let smoothed = beats
        .beats()
        .par_iter()
        .map(|y| smooth_beat(y, prior, noise, init))
        .collect::<Result<Vec<_>>>()?;
    let mut stats = EmStatistics::zeros(beats.channels(), beats.grid_len());
    let mut ll = 0.0;
    for (y, sm) in beats.beats().iter().zip(&smoothed) {
        stats.accumulate(y, sm);
        ll += sm.log_likelihood;
    }
    stats.scale(1.0 / beats.len() as f64);
    Ok((stats, ll))
}

/// Covariance updates given averaged moments.
pub fn m_step(
    stats: &EmStatistics,
    prior: &TaylorPrior,
    window: &WindowConfig,
    literal_q_update: bool,
) -> Result<IntraNoiseModel> {
    let len = stats.xii.len();
    let m = stats.mean.first().map(|v| v.len()).unwrap_or(0);

    let mut r = DMatrix::zeros(m, m);
    for t in 0..len {
        r += &stats.yii[t] - &stats.xy[t] - stats.xy[t].transpose() + &stats.xii[t];
    }
    let r = clamp_eigenvalues(&(r / len as f64), EIGEN_FLOOR);

    if len < 2 {
        return IntraNoiseModel::new(vec![DMatrix::from_element(m, m, 0.0); len], r);
    }

    // Raw per-index estimates for transitions into t = 1..T-1.
    let raw: Vec<DMatrix<f64>> = (1..len)
        .map(|t| {
            let cross = &stats.xx[t] + stats.xx[t].transpose();
            let mut q = &stats.xii[t] - cross + &stats.xii[t - 1];
            if !literal_q_update {
                let c = prior.increments().column(t - 1);
                let d = &stats.mean[t] - &stats.mean[t - 1];
                q += c * c.transpose() - &d * c.transpose() - c * d.transpose();
            }
            q
        })
        .collect();

    let left = window.left() as isize;
    let right = window.right() as isize;
    let mut q = Vec::with_capacity(len);
    for t in 1..len as isize {
        let lo = (t - left).max(1) as usize;
        let hi = (t + right).min(len as isize - 1) as usize;
        let mut acc = DMatrix::zeros(m, m);
        for s in lo..=hi {
            acc += &raw[s - 1];
        }
        q.push(clamp_eigenvalues(&(acc / (hi - lo + 1) as f64), EIGEN_FLOOR));
    }
    q.insert(0, q[0].clone());
    IntraNoiseModel::new(q, r)
}

/// Scale-aware starting point: a tenth of the per-channel variance of the
/// sample increments for `Q` and of the samples themselves for `R`.
pub fn initial_noise_model(beats: &HeartbeatTensor) -> Result<IntraNoiseModel> {
    let m = beats.channels();
    let len = beats.grid_len();
    let mut obs = vec![Vec::new(); m];
    let mut inc = vec![Vec::new(); m];
    for b in beats.beats() {
        for c in 0..m {
            let row = b.row(c);
            obs[c].extend(row.iter().copied());
            inc[c].extend(row.iter().zip(row.iter().skip(1)).map(|(a, b)| b - a));
        }
    }
    let diag = |series: &[Vec<f64>]| {
        DVector::from_iterator(m, series.iter().map(|s| (0.1 * variance(s)).max(EIGEN_FLOOR)))
    };
    let q = DMatrix::from_diagonal(&diag(&inc));
    let r = DMatrix::from_diagonal(&diag(&obs));
    IntraNoiseModel::constant(len, q, r)
}

pub(crate) fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Runs EM from `init_noise` for at most `opts.iters` iterations.
pub fn em_estimate_noise(
    beats: &HeartbeatTensor,
    prior: &TaylorPrior,
    window: &WindowConfig,
    init_noise: &IntraNoiseModel,
    init_belief: &GaussianBelief,
    opts: &EmOptions,
) -> Result<EmOutcome> {
    if opts.iters == 0 {
        return Err(HkfError::InvalidParameter("EM needs at least one iteration".into()));
    }
    let mut noise = init_noise.clone();
    let mut trace = Vec::with_capacity(opts.iters);
    for iteration in 0..opts.iters {
        let (stats, ll) = e_step(beats, prior, &noise, init_belief)?;
        if !ll.is_finite() {
            return Err(HkfError::EmDiverged { iteration });
        }
        let converged = trace
            .last()
            .map(|&prev: &f64| ((ll - prev) / prev.abs().max(1e-300)).abs() < opts.rel_tol)
            .unwrap_or(false);
        trace.push(ll);
        if converged {
            break;
        }
        noise = m_step(&stats, prior, window, opts.literal_q_update)?;
    }
    Ok(EmOutcome {
        noise,
        log_likelihood: trace,
    })
}

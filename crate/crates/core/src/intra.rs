//! Per-beat Kalman filter and Rauch–Tung–Striebel smoother over the
//! intra-beat state-space model
//!
//! ```text
//! x_0     ~ N(μ₀, P₀)
//! x_t     = x_{t-1} + c_{t-1} + e_t,   e_t ~ N(0, Q_t)
//! y_t     = x_t + v_t,                 v_t ~ N(0, R)
//! ```
//!
//! where `c_t` are the increments of a [`TaylorPrior`]. The evolution is
//! affine with identity Jacobian, so the linear filter is exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{HkfError, Result};
use crate::linalg::{is_psd, symmetrize, EIGEN_FLOOR};
use crate::taylor::TaylorPrior;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Mean and covariance of a Gaussian state estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(HkfError::Dimension(format!(
                "belief covariance {}x{} for mean of length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        if !is_psd(&cov, 1e-10) {
            return Err(HkfError::InvalidParameter("belief covariance is not PSD".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Process covariances per intra index and one beat-invariant observation
/// covariance.
///
/// `q[t]` drives the transition into sample `t`; `q[0]` is never used by the
/// filter because sample 0 is drawn from the initial belief.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraNoiseModel {
    q: Vec<DMatrix<f64>>,
    r: DMatrix<f64>,
}

impl IntraNoiseModel {
    pub fn new(q: Vec<DMatrix<f64>>, r: DMatrix<f64>) -> Result<Self> {
        let m = r.nrows();
        if !r.is_square() || m == 0 {
            return Err(HkfError::Dimension("R must be square and non-empty".into()));
        }
        if q.is_empty() {
            return Err(HkfError::Dimension("Q list is empty".into()));
        }
        if let Some(t) = q.iter().position(|qt| qt.shape() != (m, m)) {
            return Err(HkfError::Dimension(format!("Q[{t}] is not {m}x{m}")));
        }
        if let Some(t) = q.iter().position(|qt| !is_psd(qt, 1e-10)) {
            return Err(HkfError::InvalidParameter(format!("Q[{t}] is not PSD")));
        }
        if !is_psd(&r, 1e-10) {
            return Err(HkfError::InvalidParameter("R is not PSD".into()));
        }
        Ok(Self { q, r })
    }

    /// Same `Q` at every index.
    pub fn constant(grid_len: usize, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![q; grid_len], r)
    }

    pub fn q(&self) -> &[DMatrix<f64>] {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn grid_len(&self) -> usize {
        self.q.len()
    }

    pub fn channels(&self) -> usize {
        self.r.nrows()
    }
}

/// Output of the forward pass over one beat.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `x̂_{t|t-1}`, `Σ_{t|t-1}`; entry 0 is the initial belief.
    pub predicted: Vec<GaussianBelief>,
    /// `x̂_{t|t}`, `Σ_{t|t}`.
    pub filtered: Vec<GaussianBelief>,
    /// `y_t − x̂_{t|t-1}`.
    pub innovations: Vec<DVector<f64>>,
    pub innovation_covs: Vec<DMatrix<f64>>,
    /// Gaussian log-likelihood of the beat in innovations form.
    pub log_likelihood: f64,
}

/// Posterior moments of one beat given all of its samples.
#[derive(Debug, Clone)]
pub struct SmoothedBeat {
    /// `m × T`; column `t` is `x̂_{t|T}`.
    pub means: DMatrix<f64>,
    /// `Σ_{t|T}`.
    pub covs: Vec<DMatrix<f64>>,
    /// `Cov(x_t, x_{t-1} | y_{0..T})`; entry 0 is zero.
    pub lag_one: Vec<DMatrix<f64>>,
    /// Smoother gains `S_t = Σ_{t|t} Σ_{t+1|t}⁻¹`, `T − 1` entries.
    pub gains: Vec<DMatrix<f64>>,
    /// Forward-pass log-likelihood carried along for EM.
    pub log_likelihood: f64,
}

impl SmoothedBeat {
    pub fn grid_len(&self) -> usize {
        self.means.ncols()
    }
}

fn check_dims(
    y: &DMatrix<f64>,
    prior: &TaylorPrior,
    noise: &IntraNoiseModel,
    init: &GaussianBelief,
) -> Result<()> {
    let (m, t) = y.shape();
    if t == 0 {
        return Err(HkfError::Dimension("empty beat".into()));
    }
    if prior.channels() != m || noise.channels() != m || init.dim() != m {
        return Err(HkfError::Dimension(format!(
            "channel mismatch: beat {m}, prior {}, noise {}, init {}",
            prior.channels(),
            noise.channels(),
            init.dim()
        )));
    }
    if prior.grid_len() != t || noise.grid_len() != t {
        return Err(HkfError::Dimension(format!(
            "grid mismatch: beat {t}, prior {}, noise {}",
            prior.grid_len(),
            noise.grid_len()
        )));
    }
    Ok(())
}

/// Forward Kalman filter over one beat with Joseph-form covariance update.
pub fn kf_forward_beat(
    y: &DMatrix<f64>,
    prior: &TaylorPrior,
    noise: &IntraNoiseModel,
    init: &GaussianBelief,
) -> Result<ForwardPass> {
    check_dims(y, prior, noise, init)?;
    let (m, len) = y.shape();
    let eye = DMatrix::<f64>::identity(m, m);
    let r = noise.r();

    let mut predicted = Vec::with_capacity(len);
    let mut filtered: Vec<GaussianBelief> = Vec::with_capacity(len);
    let mut innovations = Vec::with_capacity(len);
    let mut innovation_covs = Vec::with_capacity(len);
    let mut log_likelihood = 0.0;

    for t in 0..len {
        let pred = match filtered.last() {
            None => init.clone(),
            Some(prev) => GaussianBelief {
                mean: prior.evolution_apply(&prev.mean, t - 1)?,
                cov: &prev.cov + &noise.q()[t],
            },
        };
        let innovation = y.column(t) - &pred.mean;
        let s = symmetrize(&(&pred.cov + r));
        let chol = s.clone().cholesky().ok_or(HkfError::SingularInnovation { t })?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let quad = innovation.dot(&chol.solve(&innovation));
        log_likelihood -= 0.5 * (m as f64 * LN_2PI + log_det + quad);

        // K = Σ_pred S⁻¹, computed as (S⁻¹ Σ_pred)ᵀ.
        let gain = chol.solve(&pred.cov).transpose();
        let mean = &pred.mean + &gain * &innovation;
        let a = &eye - &gain;
        let cov = symmetrize(&(&a * &pred.cov * a.transpose() + &gain * r * gain.transpose()));

        filtered.push(GaussianBelief { mean, cov });
        predicted.push(pred);
        innovations.push(innovation);
        innovation_covs.push(s);
    }
    if !log_likelihood.is_finite() {
        return Err(HkfError::SingularInnovation { t: len - 1 });
    }
    Ok(ForwardPass {
        predicted,
        filtered,
        innovations,
        innovation_covs,
        log_likelihood,
    })
}

/// Backward RTS pass. The prior and noise model are the ones used forward;
/// with identity evolution Jacobian the backward recursion needs only the
/// stored predicted and filtered moments.
pub fn rts_backward_beat(forward: &ForwardPass) -> Result<SmoothedBeat> {
    let len = forward.filtered.len();
    if len == 0 {
        return Err(HkfError::Dimension("empty forward pass".into()));
    }
    let m = forward.filtered[0].dim();
    let mut means = DMatrix::zeros(m, len);
    let mut covs = vec![DMatrix::zeros(m, m); len];
    let mut lag_one = vec![DMatrix::zeros(m, m); len];
    let mut gains = vec![DMatrix::zeros(m, m); len.saturating_sub(1)];

    let last = &forward.filtered[len - 1];
    means.set_column(len - 1, &last.mean);
    covs[len - 1] = last.cov.clone();

    for t in (0..len - 1).rev() {
        let filt = &forward.filtered[t];
        let next_pred = &forward.predicted[t + 1];
        let chol = symmetrize(&next_pred.cov)
            .cholesky()
            .ok_or(HkfError::SingularPrediction { t: t + 1 })?;
        let gain = chol.solve(&filt.cov).transpose();
        let dm = means.column(t + 1) - &next_pred.mean;
        let mean = &filt.mean + &gain * dm;
        let dcov = &covs[t + 1] - &next_pred.cov;
        let cov = symmetrize(&(&filt.cov + &gain * dcov * gain.transpose()));
        lag_one[t + 1] = &covs[t + 1] * gain.transpose();
        means.set_column(t, &mean);
        covs[t] = cov;
        gains[t] = gain;
    }
    Ok(SmoothedBeat {
        means,
        covs,
        lag_one,
        gains,
        log_likelihood: forward.log_likelihood,
    })
}

/// Forward filter followed by the backward pass.
pub fn smooth_beat(
    y: &DMatrix<f64>,
    prior: &TaylorPrior,
    noise: &IntraNoiseModel,
    init: &GaussianBelief,
) -> Result<SmoothedBeat> {
    let forward = kf_forward_beat(y, prior, noise, init)?;
    rts_backward_beat(&forward)
}

/// Initial belief shared by all beats: the across-beat mean of the first
/// sample, with the across-beat variance of that sample plus `r_floor` on
/// the diagonal.
pub fn initial_belief_from_beats(
    beats: &[DMatrix<f64>],
    r_floor: &DMatrix<f64>,
) -> Result<GaussianBelief> {
    let first = beats
        .first()
        .ok_or_else(|| HkfError::InsufficientBeats("no beats for initial belief".into()))?;
    let m = first.nrows();
    let n = beats.len() as f64;
    let mean = beats.iter().fold(DVector::zeros(m), |acc, b| acc + b.column(0)) / n;
    let var = beats.iter().fold(DVector::zeros(m), |acc, b| {
        let d = b.column(0) - &mean;
        acc + d.component_mul(&d)
    }) / n;
    let mut cov = DMatrix::from_diagonal(&var) + DMatrix::from_diagonal(&r_floor.diagonal());
    for i in 0..m {
        cov[(i, i)] = cov[(i, i)].max(EIGEN_FLOOR);
    }
    GaussianBelief::new(mean, cov)
}

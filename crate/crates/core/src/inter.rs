//! Inter-beat filter bank: one Kalman filter per intra index, linking the
//! same grid position across consecutive beats with identity evolution.
//!
//! The process covariance of each filter is re-estimated every beat from the
//! innovation, clamped onto the PSD cone and exponentially smoothed.

use nalgebra::{DMatrix, DVector};

use crate::error::{HkfError, Result};
use crate::intra::SmoothedBeat;
use crate::linalg::{clamp_diagonal, clamp_eigenvalues, symmetrize};

/// A beat presented to the filter bank: per-index means and their error
/// covariances.
#[derive(Debug, Clone)]
pub struct InterObservation {
    /// `m × T`.
    pub means: DMatrix<f64>,
    pub covs: Vec<DMatrix<f64>>,
}

impl InterObservation {
    /// Raw samples with one observation covariance shared by every index.
    pub fn raw(beat: &DMatrix<f64>, r: &DMatrix<f64>) -> Self {
        Self {
            means: beat.clone(),
            covs: vec![r.clone(); beat.ncols()],
        }
    }

    pub fn grid_len(&self) -> usize {
        self.means.ncols()
    }
}

impl From<&SmoothedBeat> for InterObservation {
    fn from(sm: &SmoothedBeat) -> Self {
        Self {
            means: sm.means.clone(),
            covs: sm.covs.clone(),
        }
    }
}

/// Posterior of every per-index filter after beat `beat_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterState {
    /// `m × T`.
    pub means: DMatrix<f64>,
    pub covs: Vec<DMatrix<f64>>,
    /// One-based index of the last fused beat.
    pub beat_index: usize,
}

impl InterState {
    pub fn grid_len(&self) -> usize {
        self.means.ncols()
    }
}

/// Starts the bank from the first observed beat.
pub fn init_inter_state(first: &InterObservation) -> InterState {
    InterState {
        means: first.means.clone(),
        covs: first.covs.clone(),
        beat_index: 1,
    }
}

/// How `max{·, 0}` is applied to the matrix-valued process estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QMode {
    /// Spectral projection onto the PSD cone.
    #[default]
    Full,
    /// Off-diagonals dropped, diagonal clamped elementwise.
    Diagonal,
}

impl std::str::FromStr for QMode {
    type Err = HkfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(QMode::Full),
            "diagonal" | "diag" => Ok(QMode::Diagonal),
            other => Err(HkfError::Config(format!("unknown q mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for QMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QMode::Full => "full",
            QMode::Diagonal => "diagonal",
        })
    }
}

/// Single-index process estimate `max{ rrᵀ − Σ_prev − R_ext, 0 }`.
pub fn clamped_process_estimate(
    residual: &DVector<f64>,
    prev_cov: &DMatrix<f64>,
    r_ext: &DMatrix<f64>,
    mode: QMode,
) -> DMatrix<f64> {
    let raw = residual * residual.transpose() - prev_cov - r_ext;
    match mode {
        QMode::Full => clamp_eigenvalues(&raw, 0.0),
        QMode::Diagonal => clamp_diagonal(&raw, 0.0),
    }
}

/// Adaptive process-noise estimator with exponential smoothing over beats.
#[derive(Debug, Clone, PartialEq)]
pub struct InterNoiseEstimator {
    alpha: f64,
    mode: QMode,
    /// Optional moving average of the smoothed estimate across intra indices,
    /// as `(left, right)` extents.
    across_index: Option<(usize, usize)>,
    q_smoothed: Option<Vec<DMatrix<f64>>>,
}

impl InterNoiseEstimator {
    pub fn new(alpha: f64, mode: QMode) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(HkfError::InvalidParameter(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            mode,
            across_index: None,
            q_smoothed: None,
        })
    }

    pub fn with_across_index_smoothing(mut self, left: usize, right: usize) -> Self {
        self.across_index = Some((left, right));
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> QMode {
        self.mode
    }

    /// Current smoothed estimates, absent until the first update.
    pub fn q_smoothed(&self) -> Option<&[DMatrix<f64>]> {
        self.q_smoothed.as_deref()
    }

    /// Folds the estimate for beat `τ` into the running average and returns
    /// the smoothed per-index covariances. The first estimate is taken as is.
    pub fn estimate(
        &mut self,
        obs: &InterObservation,
        state: &InterState,
    ) -> Result<&[DMatrix<f64>]> {
        check_shapes(obs, state)?;
        let fresh: Vec<DMatrix<f64>> = (0..obs.grid_len())
            .map(|t| {
                let residual = obs.means.column(t) - state.means.column(t);
                clamped_process_estimate(&residual, &state.covs[t], &obs.covs[t], self.mode)
            })
            .collect();
        let fresh = match self.across_index {
            Some((l, r)) => moving_average(&fresh, l, r),
            None => fresh,
        };
        let next = match self.q_smoothed.take() {
            None => fresh,
            Some(prev) => prev
                .iter()
                .zip(&fresh)
                .map(|(p, q)| p * self.alpha + q * (1.0 - self.alpha))
                .collect(),
        };
        Ok(self.q_smoothed.insert(next))
    }
}

fn moving_average(qs: &[DMatrix<f64>], left: usize, right: usize) -> Vec<DMatrix<f64>> {
    let len = qs.len();
    (0..len)
        .map(|t| {
            let lo = t.saturating_sub(left);
            let hi = (t + right).min(len - 1);
            let sum = qs[lo..=hi]
                .iter()
                .skip(1)
                .fold(qs[lo].clone(), |acc, q| acc + q);
            sum / (hi - lo + 1) as f64
        })
        .collect()
}

fn check_shapes(obs: &InterObservation, state: &InterState) -> Result<()> {
    if obs.means.shape() != state.means.shape()
        || obs.covs.len() != obs.grid_len()
        || state.covs.len() != state.grid_len()
    {
        return Err(HkfError::Dimension(format!(
            "observation {}x{} does not match inter state {}x{}",
            obs.means.nrows(),
            obs.means.ncols(),
            state.means.nrows(),
            state.means.ncols()
        )));
    }
    Ok(())
}

/// Raw per-index clamped estimates for beat `τ` without smoothing.
pub fn estimate_inter_q(
    obs: &InterObservation,
    state: &InterState,
    mode: QMode,
) -> Result<Vec<DMatrix<f64>>> {
    check_shapes(obs, state)?;
    Ok((0..obs.grid_len())
        .map(|t| {
            let residual = obs.means.column(t) - state.means.column(t);
            clamped_process_estimate(&residual, &state.covs[t], &obs.covs[t], mode)
        })
        .collect())
}

/// One predict/update step of every per-index filter.
pub fn inter_update_beat(
    state: &InterState,
    obs: &InterObservation,
    process: &[DMatrix<f64>],
) -> Result<InterState> {
    check_shapes(obs, state)?;
    if process.len() != state.grid_len() {
        return Err(HkfError::Dimension("process covariance count mismatch".into()));
    }
    let mut means = state.means.clone();
    let mut covs = Vec::with_capacity(state.grid_len());
    for t in 0..state.grid_len() {
        let pred = &state.covs[t] + &process[t];
        let s = symmetrize(&(&pred + &obs.covs[t]));
        let chol = s.clone().cholesky().ok_or(HkfError::SingularInnovation { t })?;
        let gain = chol.solve(&pred).transpose();
        let prev = state.means.column(t);
        means.set_column(t, &(prev + &gain * (obs.means.column(t) - prev)));
        covs.push(symmetrize(&(&pred - &gain * s * gain.transpose())));
    }
    Ok(InterState {
        means,
        covs,
        beat_index: state.beat_index + 1,
    })
}

/// Filter bank with its adaptive noise estimator.
#[derive(Debug, Clone)]
pub struct InterBank {
    pub state: InterState,
    pub estimator: InterNoiseEstimator,
}

impl InterBank {
    pub fn new(first: &InterObservation, estimator: InterNoiseEstimator) -> Self {
        Self {
            state: init_inter_state(first),
            estimator,
        }
    }

    /// Estimates the process noise for the new beat and fuses it.
    pub fn step(&self, obs: &InterObservation) -> Result<Self> {
        let mut estimator = self.estimator.clone();
        let q = estimator.estimate(obs, &self.state)?.to_vec();
        let state = inter_update_beat(&self.state, obs, &q)?;
        Ok(Self { state, estimator })
    }
}

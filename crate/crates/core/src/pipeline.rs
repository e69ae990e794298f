//! End-to-end denoising: unsupervised warm-up learning of the intra-beat
//! model, then per-beat smoothing and inter-beat fusion. Also hosts the two
//! ablation baselines (intra smoothing only, inter filtering only).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::beat::HeartbeatTensor;
use crate::em::{em_estimate_noise, initial_noise_model, variance, EmOptions};
use crate::error::{HkfError, Result};
use crate::inter::{InterBank, InterNoiseEstimator, InterObservation, QMode};
use crate::intra::{initial_belief_from_beats, smooth_beat, GaussianBelief, IntraNoiseModel};
use crate::linalg::EIGEN_FLOOR;
use crate::taylor::{fit_taylor_prior, TaylorBasisConfig, TaylorPrior, WindowConfig};

/// Knobs for learning and processing.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub basis: TaylorBasisConfig,
    pub window: WindowConfig,
    pub em_iters: usize,
    pub em_rel_tol: f64,
    pub literal_em: bool,
    /// Number of leading beats used for learning.
    pub warmup: usize,
    pub alpha: f64,
    pub q_mode: QMode,
    /// Moving-average the inter process estimate across intra indices.
    pub smooth_inter_q_across_index: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            basis: TaylorBasisConfig::new(2, 1.0).expect("valid basis"),
            window: WindowConfig::uniform(2, 2),
            em_iters: 20,
            em_rel_tol: 1e-6,
            literal_em: false,
            warmup: 50,
            alpha: 0.9,
            q_mode: QMode::Full,
            smooth_inter_q_across_index: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.em_iters == 0 {
            return Err(HkfError::InvalidParameter("em_iters must be at least 1".into()));
        }
        if self.warmup < 2 {
            return Err(HkfError::InvalidParameter(format!(
                "warm-up needs at least 2 beats, got {}",
                self.warmup
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(HkfError::InvalidParameter(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn em_options(&self) -> EmOptions {
        EmOptions {
            iters: self.em_iters,
            rel_tol: self.em_rel_tol,
            literal_q_update: self.literal_em,
        }
    }

    fn estimator(&self) -> Result<InterNoiseEstimator> {
        let est = InterNoiseEstimator::new(self.alpha, self.q_mode)?;
        Ok(if self.smooth_inter_q_across_index {
            est.with_across_index_smoothing(self.window.left(), self.window.right())
        } else {
            est
        })
    }
}

/// The learned patient-specific intra-beat model.
#[derive(Debug, Clone, PartialEq)]
pub struct HkfModel {
    pub prior: TaylorPrior,
    pub intra_noise: IntraNoiseModel,
    pub init_belief: GaussianBelief,
    pub window: WindowConfig,
    pub basis: TaylorBasisConfig,
    pub warmup_beats: usize,
    /// Log-likelihood trace of the EM run.
    pub em_trace: Vec<f64>,
}

impl HkfModel {
    pub fn grid_len(&self) -> usize {
        self.prior.grid_len()
    }

    pub fn channels(&self) -> usize {
        self.prior.channels()
    }

    /// Smooths one beat on its own.
    pub fn smooth(&self, beat: &DMatrix<f64>) -> Result<crate::intra::SmoothedBeat> {
        smooth_beat(beat, &self.prior, &self.intra_noise, &self.init_belief)
    }
}

/// Learns the prior and the intra noise covariances from the noisy warm-up
/// beats.
pub fn warmup_learn(beats: &HeartbeatTensor, config: &PipelineConfig) -> Result<HkfModel> {
    config.validate()?;
    if beats.len() < 2 {
        return Err(HkfError::InsufficientBeats(format!(
            "warm-up needs at least 2 beats, got {}",
            beats.len()
        )));
    }
    let prior = fit_taylor_prior(beats, &config.window, &config.basis)?;
    let init_noise = initial_noise_model(beats)?;
    let init_belief = initial_belief_from_beats(beats.beats(), init_noise.r())?;
    let em = em_estimate_noise(
        beats,
        &prior,
        &config.window,
        &init_noise,
        &init_belief,
        &config.em_options(),
    )?;
    Ok(HkfModel {
        prior,
        intra_noise: em.noise,
        init_belief,
        window: config.window.clone(),
        basis: config.basis,
        warmup_beats: beats.len(),
        em_trace: em.log_likelihood,
    })
}

/// Smooths beat `τ` and fuses it into the filter bank. With no bank yet the
/// smoothed beat is returned and starts the bank.
pub fn process_beat(
    model: &HkfModel,
    bank: Option<&InterBank>,
    beat: &DMatrix<f64>,
    config: &PipelineConfig,
) -> Result<(DMatrix<f64>, InterBank)> {
    let smoothed = model.smooth(beat)?;
    let obs = InterObservation::from(&smoothed);
    let next = match bank {
        None => InterBank::new(&obs, config.estimator()?),
        Some(bank) => bank.step(&obs)?,
    };
    Ok((next.state.means.clone(), next))
}

fn check_record(noisy: &HeartbeatTensor, config: &PipelineConfig) -> Result<()> {
    config.validate()?;
    if config.warmup >= noisy.len() {
        return Err(HkfError::InsufficientBeats(format!(
            "record has {} beats, warm-up needs more than {}",
            noisy.len(),
            config.warmup
        )));
    }
    Ok(())
}

/// Full hierarchical denoiser. Warm-up beats are learned from and then
/// processed like every other beat, so the output aligns with the input.
pub fn denoise_record(noisy: &HeartbeatTensor, config: &PipelineConfig) -> Result<HeartbeatTensor> {
    check_record(noisy, config)?;
    let model = warmup_learn(&noisy.head(config.warmup)?, config)?;
    denoise_with_model(noisy, &model, config)
}

/// Processing phase only, with an already learned model.
pub fn denoise_with_model(
    noisy: &HeartbeatTensor,
    model: &HkfModel,
    config: &PipelineConfig,
) -> Result<HeartbeatTensor> {
    if noisy.grid_len() != model.grid_len() || noisy.channels() != model.channels() {
        return Err(HkfError::Dimension(format!(
            "record is {}x{}, model is {}x{}",
            noisy.channels(),
            noisy.grid_len(),
            model.channels(),
            model.grid_len()
        )));
    }
    let mut bank: Option<InterBank> = None;
    let mut out = Vec::with_capacity(noisy.len());
    for beat in noisy.beats() {
        let (denoised, next) = process_beat(model, bank.as_ref(), beat, config)?;
        out.push(denoised);
        bank = Some(next);
    }
    noisy.map_beats(out)
}

/// Baseline: warm-up learning, then each beat smoothed independently.
pub fn ks_intra_denoise(noisy: &HeartbeatTensor, config: &PipelineConfig) -> Result<HeartbeatTensor> {
    check_record(noisy, config)?;
    let model = warmup_learn(&noisy.head(config.warmup)?, config)?;
    let out = noisy
        .beats()
        .par_iter()
        .map(|b| model.smooth(b).map(|s| s.means))
        .collect::<Result<Vec<_>>>()?;
    noisy.map_beats(out)
}

/// Per-channel white-noise variance estimate: half the variance of the
/// within-beat first differences.
pub fn first_difference_noise(beats: &HeartbeatTensor) -> DMatrix<f64> {
    let m = beats.channels();
    let diag = DVector::from_iterator(
        m,
        (0..m).map(|c| {
            let diffs: Vec<f64> = beats
                .beats()
                .iter()
                .flat_map(|b| {
                    let row = b.row(c);
                    (1..row.len()).map(move |t| row[t] - row[t - 1])
                })
                .collect();
            (0.5 * variance(&diffs)).max(EIGEN_FLOOR)
        }),
    );
    DMatrix::from_diagonal(&diag)
}

/// Baseline: the inter-beat filter bank run directly on the noisy beats.
/// The observation covariance comes from [`first_difference_noise`] over the
/// warm-up beats (all beats when the record is shorter than the warm-up).
pub fn kf_inter_denoise(noisy: &HeartbeatTensor, config: &PipelineConfig) -> Result<HeartbeatTensor> {
    config.validate()?;
    let r = first_difference_noise(&noisy.head(config.warmup)?);
    let mut bank: Option<InterBank> = None;
    let mut out = Vec::with_capacity(noisy.len());
    for beat in noisy.beats() {
        let obs = InterObservation::raw(beat, &r);
        let next = match &bank {
            None => InterBank::new(&obs, config.estimator()?),
            Some(b) => b.step(&obs)?,
        };
        out.push(next.state.means.clone());
        bank = Some(next);
    }
    noisy.map_beats(out)
}

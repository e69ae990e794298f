//! Hierarchical Kalman filtering for quasi-periodic multichannel signals.
//!
//! A recording is cut into beats on a common grid of `T` samples. Each beat
//! is smoothed with an RTS smoother whose evolution prior (a per-index Taylor
//! increment) and noise covariances are learned without supervision from a
//! short warm-up. The smoothed beats are then fused across beats by a bank of
//! `T` Kalman filters with adaptive process noise.
//!
//! ```no_run
//! use hkf::{add_gaussian_noise, denoise_record, generate_synthetic_ecg, mse_db};
//! use hkf::{NoiseSpec, PipelineConfig, SyntheticEcgSpec};
//!
//! let (clean, _) = generate_synthetic_ecg(&SyntheticEcgSpec::default())?;
//! let noisy = add_gaussian_noise(&clean, NoiseSpec { snr_db: 0.0, seed: 7 })?;
//! let denoised = denoise_record(&noisy, &PipelineConfig::default())?;
//! println!("{:.2} dB", mse_db(&denoised, &clean)?);
//! # Ok::<(), hkf::HkfError>(())
//! ```
//!
//! Runnable walkthroughs for each stage live under `examples/`.

pub mod beat;
pub mod bench;
pub mod em;
pub mod error;
pub mod inter;
pub mod intra;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod synth;
pub mod taylor;

pub use beat::{
    add_gaussian_noise, mse_db, reassemble_signal, segment_beats, BeatBoundaries,
    HeartbeatTensor, MultiChannelSignal, NoiseSpec,
};
pub use em::{em_estimate_noise, EmOptions, EmOutcome, EmStatistics};
pub use error::{HkfError, Result};
pub use inter::{
    estimate_inter_q, init_inter_state, inter_update_beat, InterBank, InterNoiseEstimator,
    InterObservation, InterState, QMode,
};
pub use intra::{
    kf_forward_beat, rts_backward_beat, smooth_beat, ForwardPass, GaussianBelief,
    IntraNoiseModel, SmoothedBeat,
};
pub use pipeline::{
    denoise_record, kf_inter_denoise, ks_intra_denoise, process_beat, warmup_learn, HkfModel,
    PipelineConfig,
};
pub use synth::{generate_synthetic_ecg, Kernel, SyntheticEcgSpec};
pub use taylor::{
    basis_row, fit_taylor_prior, TaylorBasisConfig, TaylorPrior, WindowConfig,
};

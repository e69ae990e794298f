//! Synthetic multichannel ECG built from Gaussian kernels on the beat phase.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::beat::{HeartbeatTensor, MultiChannelSignal};
use crate::error::{HkfError, Result};

/// One wave of the beat template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    /// Phase of the peak in `[0, 1)`.
    pub center: f64,
    /// Standard deviation in phase units.
    pub width: f64,
    pub amplitude: f64,
}

impl Kernel {
    pub const fn new(center: f64, width: f64, amplitude: f64) -> Self {
        Self {
            center,
            width,
            amplitude,
        }
    }

    pub fn eval(&self, phase: f64) -> f64 {
        let d = phase - self.center;
        self.amplitude * (-(d * d) / (2.0 * self.width * self.width)).exp()
    }
}

/// P, Q, R, S and T waves of a lead-II-like beat.
pub const PQRST: [Kernel; 5] = [
    Kernel::new(0.20, 0.025, 0.15),
    Kernel::new(0.37, 0.010, -0.12),
    Kernel::new(0.40, 0.012, 1.00),
    Kernel::new(0.43, 0.010, -0.25),
    Kernel::new(0.70, 0.050, 0.30),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEcgSpec {
    /// Kernels for each channel; the outer length is the channel count.
    pub kernels: Vec<Vec<Kernel>>,
    /// Relative standard deviation of the per-beat amplitude and width draws.
    pub beat_jitter: f64,
    pub num_beats: usize,
    pub grid_len: usize,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for SyntheticEcgSpec {
    /// Two channels, 200 beats of 300 samples.
    fn default() -> Self {
        let second: Vec<Kernel> = PQRST
            .iter()
            .zip([0.10, -0.20, 0.60, -0.40, 0.45])
            .map(|(k, a)| Kernel { amplitude: a, ..*k })
            .collect();
        Self {
            kernels: vec![PQRST.to_vec(), second],
            beat_jitter: 0.05,
            num_beats: 200,
            grid_len: 300,
            sample_rate_hz: 360.0,
            seed: 0,
        }
    }
}

impl SyntheticEcgSpec {
    pub fn channels(&self) -> usize {
        self.kernels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.num_beats == 0 || self.grid_len == 0 {
            return Err(HkfError::InvalidParameter(
                "synthetic spec needs at least one channel, beat and sample".into(),
            ));
        }
        if self.kernels.iter().flatten().any(|k| !(k.width > 0.0)) {
            return Err(HkfError::InvalidParameter("kernel widths must be positive".into()));
        }
        if !(self.beat_jitter >= 0.0 && self.beat_jitter.is_finite()) {
            return Err(HkfError::InvalidParameter("jitter must be nonnegative".into()));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(HkfError::InvalidParameter("sample rate must be positive".into()));
        }
        Ok(())
    }
}

/// Generates the clean beat tensor and the equivalent continuous signal
/// (beats back to back, onsets every `grid_len` samples).
pub fn generate_synthetic_ecg(spec: &SyntheticEcgSpec) -> Result<(HeartbeatTensor, MultiChannelSignal)> {
    spec.validate()?;
    let m = spec.channels();
    let len = spec.grid_len;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phases: Vec<f64> = (0..len).map(|t| t as f64 / len as f64).collect();
    let mut beats = Vec::with_capacity(spec.num_beats);
    for _ in 0..spec.num_beats {
        let mut beat = DMatrix::zeros(m, len);
        for (c, kernels) in spec.kernels.iter().enumerate() {
            for k in kernels {
                let za: f64 = StandardNormal.sample(&mut rng);
                let zw: f64 = StandardNormal.sample(&mut rng);
                let jittered = Kernel {
                    amplitude: k.amplitude * (1.0 + spec.beat_jitter * za),
                    width: k.width * (1.0 + spec.beat_jitter * zw).max(0.1),
                    center: k.center,
                };
                for (t, &p) in phases.iter().enumerate() {
                    beat[(c, t)] += jittered.eval(p);
                }
            }
        }
        beats.push(beat);
    }
    let names = (0..m).map(|c| format!("lead{}", c + 1)).collect::<Vec<_>>();
    let tensor = HeartbeatTensor::from_beats(beats)?.with_metadata(spec.sample_rate_hz, names.clone())?;
    let mut samples = DMatrix::zeros(m, len * spec.num_beats);
    for (i, b) in tensor.beats().iter().enumerate() {
        samples.columns_mut(i * len, len).copy_from(b);
    }
    let signal = MultiChannelSignal::new(samples, spec.sample_rate_hz, names)?;
    Ok((tensor, signal))
}

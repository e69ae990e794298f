//! Signal containers, beat segmentation onto a fixed intra-beat grid, noise
//! injection and the MSE metric.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HkfError, Result};

/// Lower clamp for [`mse_db`].
pub const MSE_FLOOR_DB: f64 = -120.0;

/// A raw multichannel recording, channels along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelSignal {
    samples: DMatrix<f64>,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
}

impl MultiChannelSignal {
    pub fn new(
        samples: DMatrix<f64>,
        sample_rate_hz: f64,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        let (m, len) = samples.shape();
        if m == 0 {
            return Err(HkfError::Dimension("signal needs at least one channel".into()));
        }
        if len < 2 {
            return Err(HkfError::Dimension(format!(
                "signal needs at least 2 samples, got {len}"
            )));
        }
        if channel_names.len() != m {
            return Err(HkfError::Dimension(format!(
                "{} channel names for {m} channels",
                channel_names.len()
            )));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(HkfError::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(HkfError::Dimension("signal contains non-finite samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            channel_names,
        })
    }

    /// Builds a signal with generated channel names `ch0, ch1, ...`.
    pub fn with_default_names(samples: DMatrix<f64>, sample_rate_hz: f64) -> Result<Self> {
        let names = default_channel_names(samples.nrows());
        Self::new(samples, sample_rate_hz, names)
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }
}

pub(crate) fn default_channel_names(m: usize) -> Vec<String> {
    (0..m).map(|c| format!("ch{c}")).collect()
}

/// Where each beat starts.
///
/// An onset equal to the signal length is accepted as a closing boundary so
/// that the final beat can run to the last sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BeatBoundaries {
    Explicit(Vec<usize>),
    /// Onsets at `0, P, 2P, ...` up to the signal length.
    Period(usize),
}

impl BeatBoundaries {
    /// Resolves and validates the onset list against a signal of `len` samples.
    pub fn onsets(&self, len: usize) -> Result<Vec<usize>> {
        let onsets = match self {
            BeatBoundaries::Explicit(v) => v.clone(),
            BeatBoundaries::Period(p) => {
                if *p < 2 {
                    return Err(HkfError::InvalidBoundaries(format!(
                        "period must be at least 2 samples, got {p}"
                    )));
                }
                (0..=len).step_by(*p).collect()
            }
        };
        for w in onsets.windows(2) {
            if w[1] <= w[0] {
                return Err(HkfError::InvalidBoundaries(format!(
                    "onsets must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
            if w[1] - w[0] < 2 {
                return Err(HkfError::InvalidBoundaries(format!(
                    "onsets {} and {} are closer than 2 samples",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = onsets.last() {
            if last > len {
                return Err(HkfError::InvalidBoundaries(format!(
                    "onset {last} beyond signal length {len}"
                )));
            }
        }
        Ok(onsets)
    }
}

/// `N` beats of `m × T` samples on a common intra-beat grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeartbeatTensor {
    beats: Vec<DMatrix<f64>>,
    original_lengths: Vec<usize>,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
}

impl HeartbeatTensor {
    /// Wraps beats that already live on the grid (original length = `T`).
    pub fn from_beats(beats: Vec<DMatrix<f64>>) -> Result<Self> {
        let t = beats.first().map(|b| b.ncols()).unwrap_or(0);
        let lengths = vec![t; beats.len()];
        Self::with_lengths(beats, lengths)
    }

    pub fn with_lengths(beats: Vec<DMatrix<f64>>, original_lengths: Vec<usize>) -> Result<Self> {
        let first = beats
            .first()
            .ok_or_else(|| HkfError::InsufficientBeats("tensor needs at least one beat".into()))?;
        let (m, t) = first.shape();
        if m == 0 || t == 0 {
            return Err(HkfError::Dimension("empty beat matrix".into()));
        }
        if let Some((i, b)) = beats.iter().enumerate().find(|(_, b)| b.shape() != (m, t)) {
            return Err(HkfError::Dimension(format!(
                "beat {i} is {}x{}, expected {m}x{t}",
                b.nrows(),
                b.ncols()
            )));
        }
        if beats.iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(HkfError::Dimension("tensor contains non-finite samples".into()));
        }
        if original_lengths.len() != beats.len() {
            return Err(HkfError::Dimension(format!(
                "{} original lengths for {} beats",
                original_lengths.len(),
                beats.len()
            )));
        }
        Ok(Self {
            beats,
            original_lengths,
            sample_rate_hz: 1.0,
            channel_names: default_channel_names(m),
        })
    }

    /// Attaches the recording metadata used by [`reassemble_signal`].
    pub fn with_metadata(mut self, sample_rate_hz: f64, channel_names: Vec<String>) -> Result<Self> {
        if channel_names.len() != self.channels() {
            return Err(HkfError::Dimension("channel name count mismatch".into()));
        }
        self.sample_rate_hz = sample_rate_hz;
        self.channel_names = channel_names;
        Ok(self)
    }

    /// Same metadata and original lengths, new beat contents.
    pub fn map_beats(&self, beats: Vec<DMatrix<f64>>) -> Result<Self> {
        let out = Self::with_lengths(beats, self.original_lengths.clone())?;
        if out.channels() != self.channels() {
            return Err(HkfError::Dimension("channel count changed".into()));
        }
        Ok(Self {
            sample_rate_hz: self.sample_rate_hz,
            channel_names: self.channel_names.clone(),
            ..out
        })
    }

    /// The first `n` beats.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        self.subset(0..n)
    }

    pub fn subset(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let out = Self::with_lengths(
            self.beats[range.clone()].to_vec(),
            self.original_lengths[range].to_vec(),
        )?;
        Ok(Self {
            sample_rate_hz: self.sample_rate_hz,
            channel_names: self.channel_names.clone(),
            ..out
        })
    }

    pub fn beats(&self) -> &[DMatrix<f64>] {
        &self.beats
    }

    pub fn beat(&self, i: usize) -> &DMatrix<f64> {
        &self.beats[i]
    }

    pub fn original_lengths(&self) -> &[usize] {
        &self.original_lengths
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// Number of beats `N`.
    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    /// Channel count `m`.
    pub fn channels(&self) -> usize {
        self.beats[0].nrows()
    }

    /// Intra-beat grid length `T`.
    pub fn grid_len(&self) -> usize {
        self.beats[0].ncols()
    }

    /// Empirical mean square of each channel over all beats.
    pub fn channel_power(&self) -> Vec<f64> {
        let m = self.channels();
        let count = (self.len() * self.grid_len()) as f64;
        (0..m)
            .map(|c| {
                self.beats
                    .iter()
                    .map(|b| b.row(c).iter().map(|v| v * v).sum::<f64>())
                    .sum::<f64>()
                    / count
            })
            .collect()
    }
}

/// Linear interpolation of `src` onto `n` uniformly spaced points spanning
/// the same first and last sample.
pub fn resample_linear(src: &[f64], n: usize) -> Vec<f64> {
    let len = src.len();
    if n == 0 || len == 0 {
        return Vec::new();
    }
    if len == n {
        return src.to_vec();
    }
    if n == 1 || len == 1 {
        return vec![src[0]; n];
    }
    let scale = (len - 1) as f64 / (n - 1) as f64;
    (0..n)
        .map(|j| {
            let pos = j as f64 * scale;
            let i = (pos.floor() as usize).min(len - 2);
            let frac = pos - i as f64;
            src[i] + (src[i + 1] - src[i]) * frac
        })
        .collect()
}

fn resample_rows(block: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let m = block.nrows();
    let mut out = DMatrix::zeros(m, n);
    for c in 0..m {
        let row: Vec<f64> = block.row(c).iter().copied().collect();
        for (j, v) in resample_linear(&row, n).into_iter().enumerate() {
            out[(c, j)] = v;
        }
    }
    out
}

/// Cuts the signal at each onset and resamples every complete inter-onset
/// interval to `grid_len` samples. Samples after the last onset are dropped.
pub fn segment_beats(
    signal: &MultiChannelSignal,
    bounds: &BeatBoundaries,
    grid_len: usize,
) -> Result<HeartbeatTensor> {
    if grid_len < 4 {
        return Err(HkfError::InvalidParameter(format!(
            "beat grid length must be at least 4, got {grid_len}"
        )));
    }
    let onsets = bounds.onsets(signal.len())?;
    if onsets.len() < 2 {
        return Err(HkfError::InsufficientBeats(format!(
            "need at least 2 onsets, got {}",
            onsets.len()
        )));
    }
    let samples = signal.samples();
    let mut beats = Vec::with_capacity(onsets.len() - 1);
    let mut lengths = Vec::with_capacity(onsets.len() - 1);
    for w in onsets.windows(2) {
        let len = w[1] - w[0];
        let block = samples.columns(w[0], len).into_owned();
        beats.push(resample_rows(&block, grid_len));
        lengths.push(len);
    }
    HeartbeatTensor::with_lengths(beats, lengths)?
        .with_metadata(signal.sample_rate_hz(), signal.channel_names().to_vec())
}

/// Inverse of [`segment_beats`]: each beat is resampled back to its original
/// length and the beats are concatenated.
pub fn reassemble_signal(tensor: &HeartbeatTensor) -> Result<MultiChannelSignal> {
    let total: usize = tensor.original_lengths().iter().sum();
    let m = tensor.channels();
    let mut out = DMatrix::zeros(m, total);
    let mut offset = 0;
    for (beat, &len) in tensor.beats().iter().zip(tensor.original_lengths()) {
        if len == 0 {
            return Err(HkfError::Dimension("zero original beat length".into()));
        }
        let block = resample_rows(beat, len);
        out.columns_mut(offset, len).copy_from(&block);
        offset += len;
    }
    MultiChannelSignal::new(out, tensor.sample_rate_hz(), tensor.channel_names().to_vec())
}

/// Additive white Gaussian noise at a target per-channel SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

/// Adds i.i.d. Gaussian noise whose variance is the channel's mean square
/// times `10^(-snr_db/10)`. Draws are ordered beat, then sample, then channel.
pub fn add_gaussian_noise(tensor: &HeartbeatTensor, spec: NoiseSpec) -> Result<HeartbeatTensor> {
    if !spec.snr_db.is_finite() {
        return Err(HkfError::InvalidParameter("snr_db must be finite".into()));
    }
    let power = tensor.channel_power();
    if let Some(channel) = power.iter().position(|&p| p <= 0.0) {
        return Err(HkfError::DegenerateChannel { channel });
    }
    let std: Vec<f64> = power
        .iter()
        .map(|p| (p * 10f64.powf(-spec.snr_db / 10.0)).sqrt())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let beats = tensor
        .beats()
        .iter()
        .map(|b| {
            let mut noisy = b.clone();
            for t in 0..b.ncols() {
                for (c, s) in std.iter().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    noisy[(c, t)] += s * z;
                }
            }
            noisy
        })
        .collect();
    tensor.map_beats(beats)
}

/// `10·log10` of the mean squared difference, floored at [`MSE_FLOOR_DB`].
pub fn mse_db(estimate: &HeartbeatTensor, truth: &HeartbeatTensor) -> Result<f64> {
    if estimate.len() != truth.len()
        || estimate.channels() != truth.channels()
        || estimate.grid_len() != truth.grid_len()
    {
        return Err(HkfError::Dimension(format!(
            "estimate is {}x{}x{}, truth is {}x{}x{}",
            estimate.len(),
            estimate.channels(),
            estimate.grid_len(),
            truth.len(),
            truth.channels(),
            truth.grid_len()
        )));
    }
    let count = (truth.len() * truth.channels() * truth.grid_len()) as f64;
    let sse: f64 = estimate
        .beats()
        .iter()
        .zip(truth.beats())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(power_db(sse / count))
}

pub(crate) fn power_db(mse: f64) -> f64 {
    if mse > 0.0 {
        (10.0 * mse.log10()).max(MSE_FLOOR_DB)
    } else {
        MSE_FLOOR_DB
    }
}

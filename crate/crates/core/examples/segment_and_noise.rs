//! Cuts a continuous recording into beats, corrupts it at a chosen SNR and
//! stitches it back together.
//!
//! ```bash
//! cargo run -p hkf --example segment_and_noise -- 5
//! ```

use hkf::{
    add_gaussian_noise, generate_synthetic_ecg, mse_db, reassemble_signal, segment_beats,
    BeatBoundaries, NoiseSpec, SyntheticEcgSpec,
};

fn main() -> hkf::Result<()> {
    let snr_db: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let spec = SyntheticEcgSpec {
        num_beats: 40,
        ..SyntheticEcgSpec::default()
    };
    let (_, signal) = generate_synthetic_ecg(&spec)?;

    // Irregular beat lengths, as a detector would report them.
    let mut onsets = vec![0];
    while let Some(&last) = onsets.last() {
        let next = last + 280 + (onsets.len() * 37) % 45;
        if next > signal.len() {
            break;
        }
        onsets.push(next);
    }
    let beats = segment_beats(&signal, &BeatBoundaries::Explicit(onsets), 256)?;
    println!(
        "{} beats of {} channels on a {}-sample grid (original lengths {}..{})",
        beats.len(),
        beats.channels(),
        beats.grid_len(),
        beats.original_lengths().iter().min().unwrap(),
        beats.original_lengths().iter().max().unwrap()
    );

    let noisy = add_gaussian_noise(&beats, NoiseSpec { snr_db, seed: 11 })?;
    let power = beats.channel_power();
    let signal_db = 10.0 * (power.iter().sum::<f64>() / power.len() as f64).log10();
    let noise_db = mse_db(&noisy, &beats)?;
    println!(
        "requested SNR {snr_db:.1} dB: signal {signal_db:.2} dB, noise {noise_db:.2} dB, measured SNR {:.2} dB",
        signal_db - noise_db
    );

    let back = reassemble_signal(&noisy)?;
    println!("reassembled {} samples at {} Hz", back.len(), back.sample_rate_hz());
    Ok(())
}

//! Runs the inter-beat filter bank on its own over smoothed beats and prints
//! how the adaptive process noise and the error evolve across beats.
//!
//! ```bash
//! cargo run --release -p hkf --example inter_filter
//! ```

use hkf::{
    add_gaussian_noise, generate_synthetic_ecg, warmup_learn, InterBank, InterNoiseEstimator,
    InterObservation, NoiseSpec, PipelineConfig, QMode, SyntheticEcgSpec,
};

fn main() -> hkf::Result<()> {
    let (clean, _) = generate_synthetic_ecg(&SyntheticEcgSpec::default())?;
    let noisy = add_gaussian_noise(&clean, NoiseSpec { snr_db: 0.0, seed: 5 })?;
    let config = PipelineConfig::default();
    let model = warmup_learn(&noisy.head(config.warmup)?, &config)?;

    for (mode, alpha) in [(QMode::Full, 0.9), (QMode::Full, 0.5), (QMode::Diagonal, 0.9)] {
        let mut bank: Option<InterBank> = None;
        let mut block = (0.0, 0.0);
        println!("q_mode={mode} alpha={alpha}");
        for (i, (y, x)) in noisy.beats().iter().zip(clean.beats()).enumerate() {
            let smoothed = model.smooth(y)?;
            let obs = InterObservation::from(&smoothed);
            let next = match &bank {
                None => InterBank::new(&obs, InterNoiseEstimator::new(alpha, mode)?),
                Some(b) => b.step(&obs)?,
            };
            block.0 += (&smoothed.means - x).norm_squared();
            block.1 += (&next.state.means - x).norm_squared();
            if (i + 1) % 50 == 0 {
                let mean_q = next
                    .estimator
                    .q_smoothed()
                    .map(|q| q.iter().map(|m| m.trace()).sum::<f64>() / q.len() as f64)
                    .unwrap_or(0.0);
                let n = (50 * x.len()) as f64;
                println!(
                    "  beats {:>3}-{:>3}: smoothed {:>7.2} dB, fused {:>7.2} dB, mean tr Q̄ {mean_q:.2e}",
                    i - 48,
                    i + 1,
                    10.0 * (block.0 / n).log10(),
                    10.0 * (block.1 / n).log10()
                );
                block = (0.0, 0.0);
            }
            bank = Some(next);
        }
    }
    Ok(())
}

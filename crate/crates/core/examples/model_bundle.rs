//! Learns a model once, saves it as a bundle directory, reloads it and
//! denoises a later stretch of the same recording without relearning.
//!
//! ```bash
//! cargo run --release -p hkf --example model_bundle -- /tmp/hkf-model
//! ```

use hkf::io::{load_model_bundle, save_model_bundle};
use hkf::pipeline::denoise_with_model;
use hkf::{
    add_gaussian_noise, generate_synthetic_ecg, mse_db, warmup_learn, NoiseSpec, PipelineConfig,
    SyntheticEcgSpec,
};

fn main() -> hkf::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hkf-model"));
    let (clean, _) = generate_synthetic_ecg(&SyntheticEcgSpec::default())?;
    let noisy = add_gaussian_noise(&clean, NoiseSpec { snr_db: 0.0, seed: 6 })?;
    let config = PipelineConfig::default();

    let model = warmup_learn(&noisy.head(config.warmup)?, &config)?;
    save_model_bundle(&dir, &model)?;
    println!("saved model to {} (EM ran {} iterations)", dir.display(), model.em_trace.len());

    let loaded = load_model_bundle(&dir)?;
    let later = noisy.subset(100..200)?;
    let truth = clean.subset(100..200)?;
    let out = denoise_with_model(&later, &loaded, &config)?;
    println!(
        "beats 100..200: noisy {:.2} dB, denoised with reloaded model {:.2} dB",
        mse_db(&later, &truth)?,
        mse_db(&out, &truth)?
    );
    Ok(())
}

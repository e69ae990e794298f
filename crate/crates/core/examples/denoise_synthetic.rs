//! Denoises a synthetic two-lead recording at 0 dB SNR and compares the
//! hierarchical filter with its two ablations.
//!
//! ```bash
//! cargo run --release -p hkf --example denoise_synthetic
//! ```

use std::time::Instant;

use hkf::{
    add_gaussian_noise, denoise_record, generate_synthetic_ecg, kf_inter_denoise,
    ks_intra_denoise, mse_db, NoiseSpec, PipelineConfig, SyntheticEcgSpec,
};

fn main() -> hkf::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = SyntheticEcgSpec {
        seed,
        ..SyntheticEcgSpec::default()
    };
    let (clean, _) = generate_synthetic_ecg(&spec)?;
    let noisy = add_gaussian_noise(&clean, NoiseSpec { snr_db: 0.0, seed })?;
    let config = PipelineConfig::default();

    println!("{:<10} {:>10} {:>10}", "method", "MSE [dB]", "time [ms]");
    println!("{:<10} {:>10.2} {:>10}", "noisy", mse_db(&noisy, &clean)?, "-");
    type Method = fn(&hkf::HeartbeatTensor, &PipelineConfig) -> hkf::Result<hkf::HeartbeatTensor>;
    let methods: [(&str, Method); 3] = [
        ("kf-inter", kf_inter_denoise),
        ("ks-intra", ks_intra_denoise),
        ("hkf", denoise_record),
    ];
    for (name, run) in methods {
        let start = Instant::now();
        let out = run(&noisy, &config)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        println!("{name:<10} {:>10.2} {ms:>10.1}", mse_db(&out, &clean)?);
    }
    Ok(())
}

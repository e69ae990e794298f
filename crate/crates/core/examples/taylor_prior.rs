//! Fits the per-index Taylor increment prior on noisy warm-up beats and
//! compares it with the clean template's sample differences.
//!
//! ```bash
//! cargo run -p hkf --example taylor_prior
//! ```

use hkf::{
    add_gaussian_noise, fit_taylor_prior, generate_synthetic_ecg, NoiseSpec, SyntheticEcgSpec,
    TaylorBasisConfig, WindowConfig,
};

fn main() -> hkf::Result<()> {
    let spec = SyntheticEcgSpec {
        num_beats: 50,
        beat_jitter: 0.0,
        ..SyntheticEcgSpec::default()
    };
    let (clean, _) = generate_synthetic_ecg(&spec)?;
    let noisy = add_gaussian_noise(&clean, NoiseSpec { snr_db: 0.0, seed: 2 })?;
    let template = clean.beat(0);
    let truth = template.columns(1, spec.grid_len - 1) - template.columns(0, spec.grid_len - 1);

    println!("{:>6} {:>6} {:>12} {:>12}", "order", "window", "rmse clean", "rmse noisy");
    for order in 1..=3 {
        for half in [0, 2, 4] {
            let basis = TaylorBasisConfig::new(order, 1.0)?;
            let window = WindowConfig::uniform(half, half);
            let rmse = |beats| -> hkf::Result<f64> {
                let prior = fit_taylor_prior(beats, &window, &basis)?;
                let fitted = prior.increments().columns(0, spec.grid_len - 1);
                Ok(((fitted - &truth).norm_squared() / truth.len() as f64).sqrt())
            };
            println!(
                "{order:>6} {:>6} {:>12.2e} {:>12.2e}",
                format!("±{half}"),
                rmse(&clean)?,
                rmse(&noisy)?
            );
        }
    }
    Ok(())
}

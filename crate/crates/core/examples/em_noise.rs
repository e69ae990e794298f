//! Learns the intra-beat noise covariances by EM and checks the observation
//! noise estimate against the injected level.
//!
//! ```bash
//! cargo run --release -p hkf --example em_noise
//! ```

use hkf::em::{em_estimate_noise, initial_noise_model, EmOptions};
use hkf::intra::initial_belief_from_beats;
use hkf::{
    fit_taylor_prior, generate_synthetic_ecg, HeartbeatTensor, SyntheticEcgSpec,
    TaylorBasisConfig, WindowConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> hkf::Result<()> {
    let (clean, _) = generate_synthetic_ecg(&SyntheticEcgSpec {
        num_beats: 100,
        ..SyntheticEcgSpec::default()
    })?;
    let window = WindowConfig::uniform(2, 2);
    let basis = TaylorBasisConfig::new(2, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    for sigma in [0.1, 0.3, 1.0] {
        let beats = clean
            .beats()
            .iter()
            .map(|b| b.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let noisy = HeartbeatTensor::from_beats(beats)?;
        let prior = fit_taylor_prior(&noisy, &window, &basis)?;
        let init = initial_noise_model(&noisy)?;
        let belief = initial_belief_from_beats(noisy.beats(), init.r())?;
        let opts = EmOptions {
            iters: 20,
            ..EmOptions::default()
        };
        let out = em_estimate_noise(&noisy, &prior, &window, &init, &belief, &opts)?;
        let r = out.noise.r();
        let trace = &out.log_likelihood;
        println!(
            "sigma² = {:.3}: R diag = [{:.4}, {:.4}], {} iterations, LL {:.1} -> {:.1}",
            sigma * sigma,
            r[(0, 0)],
            r[(1, 1)],
            trace.len(),
            trace[0],
            trace[trace.len() - 1]
        );
    }
    Ok(())
}

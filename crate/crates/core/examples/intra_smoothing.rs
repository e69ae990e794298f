//! Smooths single beats with a hand-built intra model and shows how the
//! posterior tightens from the forward filter to the RTS smoother.
//!
//! ```bash
//! cargo run -p hkf --example intra_smoothing
//! ```

use hkf::{
    add_gaussian_noise, fit_taylor_prior, generate_synthetic_ecg, kf_forward_beat,
    rts_backward_beat, GaussianBelief, IntraNoiseModel, NoiseSpec, SyntheticEcgSpec,
    TaylorBasisConfig, WindowConfig,
};
use nalgebra::{DMatrix, DVector};

fn main() -> hkf::Result<()> {
    let (clean, _) = generate_synthetic_ecg(&SyntheticEcgSpec {
        num_beats: 60,
        ..SyntheticEcgSpec::default()
    })?;
    let noisy = add_gaussian_noise(&clean, NoiseSpec { snr_db: 0.0, seed: 4 })?;
    let basis = TaylorBasisConfig::new(2, 1.0)?;
    let prior = fit_taylor_prior(&noisy, &WindowConfig::uniform(2, 2), &basis)?;

    let power = clean.channel_power();
    let r = DMatrix::from_diagonal(&DVector::from_vec(power.clone()));
    let m = clean.channels();
    let len = clean.grid_len();
    let init = GaussianBelief::new(DVector::zeros(m), &r * 4.0)?;

    println!("{:>10} {:>12} {:>12} {:>12}", "q / r", "noisy", "filtered", "smoothed");
    for ratio in [1e-4, 1e-3, 1e-2, 1e-1] {
        let noise = IntraNoiseModel::constant(len, &r * ratio, r.clone())?;
        let mut err = [0.0; 3];
        for (y, x) in noisy.beats().iter().zip(clean.beats()) {
            let fwd = kf_forward_beat(y, &prior, &noise, &init)?;
            let sm = rts_backward_beat(&fwd)?;
            let filtered = DMatrix::from_fn(m, len, |c, t| fwd.filtered[t].mean[c]);
            err[0] += (y - x).norm_squared();
            err[1] += (filtered - x).norm_squared();
            err[2] += (&sm.means - x).norm_squared();
        }
        let n = (noisy.len() * m * len) as f64;
        let db = err.map(|e| 10.0 * (e / n).log10());
        println!("{ratio:>10.0e} {:>12.2} {:>12.2} {:>12.2}", db[0], db[1], db[2]);
    }

    let noise = IntraNoiseModel::constant(len, &r * 1e-3, r.clone())?;
    let fwd = kf_forward_beat(noisy.beat(0), &prior, &noise, &init)?;
    let sm = rts_backward_beat(&fwd)?;
    let t = len / 2;
    println!(
        "lead1 variance at t={t}: filtered {:.4}, smoothed {:.4}",
        fwd.filtered[t].cov[(0, 0)],
        sm.covs[t][(0, 0)]
    );
    Ok(())
}

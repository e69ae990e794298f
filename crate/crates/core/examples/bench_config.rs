//! Runs a benchmark config file and prints the plot-ready CSV report.
//!
//! ```bash
//! cargo run --release -p hkf --example bench_config -- crates/core/examples/configs/synthetic_bench.cfg
//! ```

use hkf::bench::run_experiment;

fn main() -> hkf::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/synthetic_bench.cfg").to_string()
    });
    let report = run_experiment(&path)?;
    print!("{}", report.to_csv());
    Ok(())
}

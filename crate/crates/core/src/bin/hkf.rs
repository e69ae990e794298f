use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hkf::bench::{load_synthetic_spec, parse_window, run_experiment};
use hkf::io::{load_model_bundle, read_onsets, read_signal_csv, save_model_bundle, write_onsets, write_signal_csv};
use hkf::pipeline::denoise_with_model;
use hkf::{
    generate_synthetic_ecg, reassemble_signal, segment_beats, warmup_learn, BeatBoundaries,
    HkfError, PipelineConfig, QMode, TaylorBasisConfig,
};

#[derive(Parser)]
#[command(name = "hkf", version, about = "Hierarchical Kalman filtering for quasi-periodic signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a recording given beat onsets or a fixed period.
    Denoise(DenoiseArgs),
    /// Run a method comparison described by a config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Write a synthetic clean recording.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the beat onsets, one per line.
        #[arg(long)]
        onsets_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, conflicts_with = "period", required_unless_present = "period")]
    onsets: Option<PathBuf>,
    #[arg(long)]
    period: Option<usize>,
    #[arg(long = "beat-len")]
    beat_len: usize,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value = "2,2")]
    window: String,
    #[arg(long = "em-iters", default_value_t = 20)]
    em_iters: usize,
    #[arg(long, default_value_t = 50)]
    warmup: usize,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "q-mode", default_value = "full")]
    q_mode: String,
    #[arg(long = "sample-rate", default_value_t = 360.0)]
    sample_rate: f64,
    #[arg(long)]
    output: PathBuf,
    /// Persist the learned model bundle to this directory.
    #[arg(long = "save-model")]
    save_model: Option<PathBuf>,
    /// Skip learning and use a previously saved model bundle.
    #[arg(long = "model", conflicts_with = "save_model")]
    model: Option<PathBuf>,
}

fn denoise(args: DenoiseArgs) -> hkf::Result<()> {
    let config = PipelineConfig {
        basis: TaylorBasisConfig::new(args.order, 1.0)?,
        window: parse_window(&args.window)?,
        em_iters: args.em_iters,
        warmup: args.warmup,
        alpha: args.alpha,
        q_mode: args.q_mode.parse::<QMode>()?,
        seed: args.seed,
        ..PipelineConfig::default()
    };
    config.validate()?;
    let signal = read_signal_csv(&args.input, args.sample_rate)?;
    let bounds = match (&args.onsets, args.period) {
        (Some(path), _) => BeatBoundaries::Explicit(read_onsets(path)?),
        (None, Some(p)) => BeatBoundaries::Period(p),
        (None, None) => unreachable!("clap requires one of --onsets/--period"),
    };
    let noisy = segment_beats(&signal, &bounds, args.beat_len)?;
    let model = match &args.model {
        Some(dir) => load_model_bundle(dir)?,
        None => {
            if config.warmup >= noisy.len() {
                return Err(HkfError::InsufficientBeats(format!(
                    "record has {} beats, warm-up needs more than {}",
                    noisy.len(),
                    config.warmup
                )));
            }
            warmup_learn(&noisy.head(config.warmup)?, &config)?
        }
    };
    if let Some(dir) = &args.save_model {
        save_model_bundle(dir, &model)?;
    }
    let denoised = denoise_with_model(&noisy, &model, &config)?;
    write_signal_csv(&args.output, &reassemble_signal(&denoised)?)
}

fn run(cli: Cli) -> hkf::Result<()> {
    match cli.command {
        Command::Denoise(args) => denoise(args),
        Command::Bench { config, report } => {
            let rep = run_experiment(&config)?;
            rep.write_csv(&report)?;
            for row in &rep.rows {
                eprintln!("{:<10} {:>9.3} dB {:>10.1} ms", row.method, row.mse_db, row.runtime_ms);
            }
            Ok(())
        }
        Command::Synth {
            spec,
            output,
            onsets_out,
        } => {
            let spec = load_synthetic_spec(&spec)?;
            let (_, signal) = generate_synthetic_ecg(&spec)?;
            write_signal_csv(&output, &signal)?;
            if let Some(path) = onsets_out {
                let onsets: Vec<usize> = (0..=spec.num_beats).map(|i| i * spec.grid_len).collect();
                write_onsets(path, &onsets)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

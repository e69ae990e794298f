//! Experiment harness: config parsing, data loading or synthesis, noise
//! injection, method comparison and CSV reports.
//!
//! Configs are flat `key = value` text split into `[sections]`:
//!
//! ```text
//! [experiment]
//! source = synthetic          # or csv
//! snr_db = 0
//! seed = 1
//! methods = noisy, ks-intra, kf-inter, hkf
//!
//! [synthetic]
//! num_beats = 200
//!
//! [model]                     # shared by every method
//! order = 2
//! window = 2,2
//!
//! [hkf]                       # per-method overrides of [model]
//! alpha = 0.8
//! ```
//!
//! `#` starts a comment. Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::beat::{add_gaussian_noise, mse_db, segment_beats, BeatBoundaries, HeartbeatTensor, NoiseSpec};
use crate::error::{HkfError, Result};
use crate::inter::QMode;
use crate::io::{read_onsets, read_signal_csv};
use crate::pipeline::{denoise_record, kf_inter_denoise, ks_intra_denoise, PipelineConfig};
use crate::synth::{generate_synthetic_ecg, Kernel, SyntheticEcgSpec};
use crate::taylor::{TaylorBasisConfig, WindowConfig};

/// Parsed `[section] key = value` text. Keys before any header belong to
/// the section named `""`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| HkfError::Config(format!("line {}: unterminated section", i + 1)))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HkfError::Config(format!("line {}: expected key = value", i + 1)))?;
            let prev = sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
            if prev.is_some() {
                return Err(HkfError::Config(format!(
                    "line {}: duplicate key `{}` in [{current}]",
                    i + 1,
                    k.trim()
                )));
            }
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> Option<&BTreeMap<String, String>> {
        self.sections.get(name)
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    /// Canonical text: sections and keys sorted, one `key=value` per line.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (name, keys) in &self.sections {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in keys {
                let _ = writeln!(out, "{k}={v}");
            }
        }
        out
    }
}

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HkfError::Config(format!("[{section}] {key}: cannot parse `{value}`")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HkfError::Config(format!("[{section}] {key}: expected true/false, got `{value}`"))),
    }
}

/// `"L1,L2"` → uniform window.
pub fn parse_window(value: &str) -> Result<WindowConfig> {
    let (l, r) = value
        .split_once(',')
        .ok_or_else(|| HkfError::Config(format!("window must be `L1,L2`, got `{value}`")))?;
    let l = parse_value("model", "window", l.trim())?;
    let r = parse_value("model", "window", r.trim())?;
    Ok(WindowConfig::uniform(l, r))
}

/// Applies `[model]`-style keys on top of `base`.
pub fn apply_model_keys(
    base: &PipelineConfig,
    section: &str,
    keys: &BTreeMap<String, String>,
) -> Result<PipelineConfig> {
    let mut cfg = base.clone();
    let mut order = cfg.basis.order();
    let mut delta_t = cfg.basis.delta_t();
    for (k, v) in keys {
        match k.as_str() {
            "order" => order = parse_value(section, k, v)?,
            "delta_t" => delta_t = parse_value(section, k, v)?,
            "window" => cfg.window = parse_window(v)?,
            "em_iters" => cfg.em_iters = parse_value(section, k, v)?,
            "em_tol" => cfg.em_rel_tol = parse_value(section, k, v)?,
            "literal_em" => cfg.literal_em = parse_bool(section, k, v)?,
            "warmup" => cfg.warmup = parse_value(section, k, v)?,
            "alpha" => cfg.alpha = parse_value(section, k, v)?,
            "q_mode" => cfg.q_mode = v.parse::<QMode>()?,
            "smooth_q_across_index" => cfg.smooth_inter_q_across_index = parse_bool(section, k, v)?,
            other => {
                return Err(HkfError::Config(format!("[{section}] unknown key `{other}`")));
            }
        }
    }
    cfg.basis = TaylorBasisConfig::new(order, delta_t)
        .map_err(|e| HkfError::Config(format!("[{section}] {e}")))?;
    cfg.validate().map_err(|e| HkfError::Config(format!("[{section}] {e}")))?;
    Ok(cfg)
}

/// `center:width:amplitude` triples separated by whitespace.
fn parse_kernels(key: &str, value: &str) -> Result<Vec<Kernel>> {
    value
        .split_whitespace()
        .map(|triple| {
            let parts: Vec<&str> = triple.split(':').collect();
            if parts.len() != 3 {
                return Err(HkfError::Config(format!(
                    "[synthetic] {key}: kernel `{triple}` is not center:width:amplitude"
                )));
            }
            Ok(Kernel::new(
                parse_value("synthetic", key, parts[0])?,
                parse_value("synthetic", key, parts[1])?,
                parse_value("synthetic", key, parts[2])?,
            ))
        })
        .collect()
}

/// Builds a synthetic spec from a `[synthetic]` section (or the top-level
/// keys when the text has no sections).
pub fn parse_synthetic_spec(keys: &BTreeMap<String, String>, default_seed: u64) -> Result<SyntheticEcgSpec> {
    let mut spec = SyntheticEcgSpec {
        seed: default_seed,
        ..SyntheticEcgSpec::default()
    };
    let mut channels: Option<usize> = None;
    let mut explicit: BTreeMap<usize, Vec<Kernel>> = BTreeMap::new();
    for (k, v) in keys {
        match k.as_str() {
            "num_beats" => spec.num_beats = parse_value("synthetic", k, v)?,
            "grid_len" => spec.grid_len = parse_value("synthetic", k, v)?,
            "jitter" => spec.beat_jitter = parse_value("synthetic", k, v)?,
            "sample_rate" => spec.sample_rate_hz = parse_value("synthetic", k, v)?,
            "seed" => spec.seed = parse_value("synthetic", k, v)?,
            "channels" => channels = Some(parse_value("synthetic", k, v)?),
            other => match other.strip_prefix("kernels.") {
                Some(idx) => {
                    let idx: usize = parse_value("synthetic", k, idx)?;
                    explicit.insert(idx, parse_kernels(k, v)?);
                }
                None => return Err(HkfError::Config(format!("[synthetic] unknown key `{other}`"))),
            },
        }
    }
    if let Some(m) = channels {
        if m == 0 {
            return Err(HkfError::Config("[synthetic] channels must be at least 1".into()));
        }
        let template = spec.kernels.clone();
        spec.kernels = (0..m).map(|c| template[c % template.len()].clone()).collect();
    }
    for (idx, kernels) in explicit {
        if idx >= spec.kernels.len() {
            return Err(HkfError::Config(format!(
                "[synthetic] kernels.{idx} beyond channel count {}",
                spec.kernels.len()
            )));
        }
        spec.kernels[idx] = kernels;
    }
    spec.validate().map_err(|e| HkfError::Config(format!("[synthetic] {e}")))?;
    Ok(spec)
}

/// Reads a synthetic spec file for `hkf synth`.
pub fn load_synthetic_spec(path: impl AsRef<Path>) -> Result<SyntheticEcgSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HkfError::io(path, e))?;
    let kv = KeyValueConfig::parse(&text)?;
    let empty = BTreeMap::new();
    if let Some(other) = kv.section_names().find(|s| !matches!(*s, "" | "synthetic")) {
        return Err(HkfError::Config(format!("unexpected section [{other}] in synthetic spec")));
    }
    let mut keys = kv.section("").cloned().unwrap_or_default();
    keys.extend(kv.section("synthetic").unwrap_or(&empty).clone());
    parse_synthetic_spec(&keys, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Noisy,
    KsIntra,
    KfInter,
    Hkf,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Noisy => "noisy",
            Method::KsIntra => "ks-intra",
            Method::KfInter => "kf-inter",
            Method::Hkf => "hkf",
        }
    }
}

impl FromStr for Method {
    type Err = HkfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noisy" => Ok(Method::Noisy),
            "ks-intra" => Ok(Method::KsIntra),
            "kf-inter" => Ok(Method::KfInter),
            "hkf" => Ok(Method::Hkf),
            other => Err(HkfError::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticEcgSpec),
    Csv {
        input: PathBuf,
        boundaries: CsvBoundaries,
        beat_len: usize,
        sample_rate_hz: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvBoundaries {
    File(PathBuf),
    Period(usize),
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub snr_db: f64,
    pub seed: u64,
    /// Scale each clean channel to unit mean square before adding noise.
    pub normalize_power: bool,
    pub methods: Vec<(Method, PipelineConfig)>,
    /// Canonical form of the parsed text, hashed into the report digest.
    pub canonical: String,
}

impl ExperimentConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KeyValueConfig::parse(text)?;
        for name in kv.section_names() {
            if !matches!(name, "experiment" | "synthetic" | "model" | "hkf" | "ks-intra" | "kf-inter") {
                return Err(HkfError::Config(format!("unknown section [{name}]")));
            }
        }
        let empty = BTreeMap::new();
        let exp = kv
            .section("experiment")
            .ok_or_else(|| HkfError::Config("missing [experiment] section".into()))?;
        let get = |k: &str| exp.get(k).map(String::as_str);
        for k in exp.keys() {
            if !matches!(
                k.as_str(),
                "source" | "input" | "onsets" | "period" | "beat_len" | "sample_rate" | "snr_db"
                    | "seed" | "methods" | "normalize_power"
            ) {
                return Err(HkfError::Config(format!("[experiment] unknown key `{k}`")));
            }
        }
        let seed: u64 = get("seed").map(|v| parse_value("experiment", "seed", v)).transpose()?.unwrap_or(0);
        let snr_db: f64 = get("snr_db")
            .map(|v| parse_value("experiment", "snr_db", v))
            .transpose()?
            .unwrap_or(0.0);
        let normalize_power = get("normalize_power")
            .map(|v| parse_bool("experiment", "normalize_power", v))
            .transpose()?
            .unwrap_or(true);

        let source = match get("source").unwrap_or("synthetic") {
            "synthetic" => DataSource::Synthetic(parse_synthetic_spec(
                kv.section("synthetic").unwrap_or(&empty),
                seed,
            )?),
            "csv" => {
                let input = get("input")
                    .ok_or_else(|| HkfError::Config("[experiment] csv source needs `input`".into()))?;
                let boundaries = match (get("onsets"), get("period")) {
                    (Some(f), None) => CsvBoundaries::File(base_dir.join(f)),
                    (None, Some(p)) => CsvBoundaries::Period(parse_value("experiment", "period", p)?),
                    _ => {
                        return Err(HkfError::Config(
                            "[experiment] csv source needs exactly one of `onsets` or `period`".into(),
                        ))
                    }
                };
                let beat_len = get("beat_len")
                    .ok_or_else(|| HkfError::Config("[experiment] csv source needs `beat_len`".into()))
                    .and_then(|v| parse_value("experiment", "beat_len", v))?;
                let sample_rate_hz = get("sample_rate")
                    .map(|v| parse_value("experiment", "sample_rate", v))
                    .transpose()?
                    .unwrap_or(360.0);
                DataSource::Csv {
                    input: base_dir.join(input),
                    boundaries,
                    beat_len,
                    sample_rate_hz,
                }
            }
            other => return Err(HkfError::Config(format!("[experiment] unknown source `{other}`"))),
        };

        let base = apply_model_keys(
            &PipelineConfig {
                seed,
                ..PipelineConfig::default()
            },
            "model",
            kv.section("model").unwrap_or(&empty),
        )?;
        let names = get("methods").unwrap_or("noisy, ks-intra, kf-inter, hkf");
        let mut methods = Vec::new();
        for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let method: Method = name.parse()?;
            if methods.iter().any(|(m, _)| *m == method) {
                return Err(HkfError::Config(format!("method `{name}` listed twice")));
            }
            let cfg = apply_model_keys(&base, name, kv.section(name).unwrap_or(&empty))?;
            methods.push((method, cfg));
        }
        if methods.is_empty() {
            return Err(HkfError::Config("[experiment] methods list is empty".into()));
        }
        Ok(Self {
            source,
            snr_db,
            seed,
            normalize_power,
            methods,
            canonical: kv.canonical(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HkfError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub mse_db: f64,
    pub runtime_ms: f64,
    pub config_digest: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mse_db,runtime_ms,config_digest,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.3},{},{}",
                r.method, r.mse_db, r.runtime_ms, r.config_digest, r.seed
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| HkfError::io(path, e))
    }
}

fn digest(canonical: &str, method: Method, cfg: &PipelineConfig) -> String {
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    h.update(method.name().as_bytes());
    h.update(format!("{cfg:?}").as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn normalize(tensor: &HeartbeatTensor) -> Result<HeartbeatTensor> {
    let power = tensor.channel_power();
    if let Some(channel) = power.iter().position(|&p| p <= 0.0) {
        return Err(HkfError::DegenerateChannel { channel });
    }
    let scale: Vec<f64> = power.iter().map(|p| 1.0 / p.sqrt()).collect();
    let beats = tensor
        .beats()
        .iter()
        .map(|b| DMatrix::from_fn(b.nrows(), b.ncols(), |c, t| b[(c, t)] * scale[c]))
        .collect();
    tensor.map_beats(beats)
}

/// Loads or synthesizes the clean beats for an experiment.
pub fn load_clean(config: &ExperimentConfig) -> Result<HeartbeatTensor> {
    let clean = match &config.source {
        DataSource::Synthetic(spec) => generate_synthetic_ecg(spec)?.0,
        DataSource::Csv {
            input,
            boundaries,
            beat_len,
            sample_rate_hz,
        } => {
            let signal = read_signal_csv(input, *sample_rate_hz)?;
            let bounds = match boundaries {
                CsvBoundaries::File(f) => BeatBoundaries::Explicit(read_onsets(f)?),
                CsvBoundaries::Period(p) => BeatBoundaries::Period(*p),
            };
            segment_beats(&signal, &bounds, *beat_len)?
        }
    };
    if config.normalize_power {
        normalize(&clean)
    } else {
        Ok(clean)
    }
}

/// Runs every configured method on the same noisy data, timing only the
/// denoising call.
pub fn run_experiment_config(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let clean = load_clean(config)?;
    let noisy = add_gaussian_noise(
        &clean,
        NoiseSpec {
            snr_db: config.snr_db,
            seed: config.seed,
        },
    )?;
    let mut rows = Vec::with_capacity(config.methods.len());
    for (method, cfg) in &config.methods {
        let start = Instant::now();
        let estimate = match method {
            Method::Noisy => noisy.clone(),
            Method::KsIntra => ks_intra_denoise(&noisy, cfg)?,
            Method::KfInter => kf_inter_denoise(&noisy, cfg)?,
            Method::Hkf => denoise_record(&noisy, cfg)?,
        };
        let runtime_ms = match method {
            Method::Noisy => 0.0,
            _ => start.elapsed().as_secs_f64() * 1e3,
        };
        rows.push(ReportRow {
            method: method.name().to_string(),
            mse_db: mse_db(&estimate, &clean)?,
            runtime_ms,
            config_digest: digest(&config.canonical, *method, cfg),
            seed: config.seed,
        });
    }
    Ok(ExperimentReport { rows })
}

/// Loads a config file and runs it.
pub fn run_experiment(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    run_experiment_config(&ExperimentConfig::load(path)?)
}

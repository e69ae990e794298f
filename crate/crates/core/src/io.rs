//! Text file formats: signal and onset files, learned-model tables, filter
//! snapshots and the model bundle directory.
//!
//! Every table is CSV with a header row. Reals are written in shortest
//! round-trip form so files reload bit-exactly.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::beat::MultiChannelSignal;
use crate::error::{HkfError, Result};
use crate::inter::InterState;
use crate::intra::{GaussianBelief, IntraNoiseModel};
use crate::pipeline::HkfModel;
use crate::taylor::{TaylorBasisConfig, TaylorPrior, WindowConfig};

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> HkfError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HkfError::io(path, io),
        other => HkfError::parse(path, format!("{other:?}")),
    }
}

/// Shortest round-trip text, in exponent form when plain decimals would be
/// unwieldy.
fn real(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| HkfError::parse(path, format!("line {line}: `{field}` is not a number")))
}

fn parse_usize(path: &Path, line: usize, field: &str) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| HkfError::parse(path, format!("line {line}: `{field}` is not an index")))
}

/// Reads rows of reals, checking every row has `width` fields when given.
fn read_rows(path: &Path, width: Option<usize>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let width = width.unwrap_or(header.len());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        if rec.len() != width {
            return Err(HkfError::parse(
                path,
                format!("line {line}: expected {width} fields, got {}", rec.len()),
            ));
        }
        rows.push(
            rec.iter()
                .map(|f| parse_f64(path, line, f))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((header, rows))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HkfError::io(path, e))
}

/// Signal CSV: a header of channel names, then one row per sample.
pub fn read_signal_csv(path: impl AsRef<Path>, sample_rate_hz: f64) -> Result<MultiChannelSignal> {
    let path = path.as_ref();
    let (names, rows) = read_rows(path, None)?;
    if names.is_empty() {
        return Err(HkfError::parse(path, "no channel columns"));
    }
    let samples = DMatrix::from_fn(names.len(), rows.len(), |c, t| rows[t][c]);
    MultiChannelSignal::new(samples, sample_rate_hz, names)
}

pub fn write_signal_csv(path: impl AsRef<Path>, signal: &MultiChannelSignal) -> Result<()> {
    let path = path.as_ref();
    let header: Vec<&str> = signal.channel_names().iter().map(String::as_str).collect();
    let s = signal.samples();
    write_rows(
        path,
        &header,
        (0..s.ncols()).map(|t| s.column(t).iter().map(|&v| real(v)).collect()),
    )
}

/// One onset sample index per line; blank lines are skipped.
pub fn read_onsets(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HkfError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_usize(path, i + 1, l.trim()))
        .collect()
}

pub fn write_onsets(path: impl AsRef<Path>, onsets: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let text: String = onsets.iter().map(|o| format!("{o}\n")).collect();
    fs::write(path, text).map_err(|e| HkfError::io(path, e))
}

/// Columns `t,k,channel,theta`; `k` is one-based.
pub fn write_prior_csv(path: impl AsRef<Path>, prior: &TaylorPrior) -> Result<()> {
    let rows = prior.theta().iter().enumerate().flat_map(|(t, th)| {
        (0..th.nrows()).flat_map(move |k| {
            (0..th.ncols()).map(move |c| {
                vec![t.to_string(), (k + 1).to_string(), c.to_string(), real(th[(k, c)])]
            })
        })
    });
    write_rows(path.as_ref(), &["t", "k", "channel", "theta"], rows)
}

pub fn read_prior_csv(path: impl AsRef<Path>, basis: TaylorBasisConfig) -> Result<TaylorPrior> {
    let path = path.as_ref();
    let (_, rows) = read_rows(path, Some(4))?;
    let idx = |v: f64| v as usize;
    let len = rows.iter().map(|r| idx(r[0]) + 1).max().unwrap_or(0);
    let m = rows.iter().map(|r| idx(r[2]) + 1).max().unwrap_or(0);
    let mut theta = vec![DMatrix::zeros(basis.order(), m); len];
    for (i, r) in rows.iter().enumerate() {
        let k = idx(r[1]);
        if k == 0 || k > basis.order() {
            return Err(HkfError::parse(path, format!("line {}: order {k} out of range", i + 2)));
        }
        theta[idx(r[0])][(k - 1, idx(r[2]))] = r[3];
    }
    TaylorPrior::from_theta(theta, basis)
}

/// Process covariances as `t,row,col,value` and the observation covariance
/// as `row,col,value`.
pub fn write_noise_csv(
    q_path: impl AsRef<Path>,
    r_path: impl AsRef<Path>,
    noise: &IntraNoiseModel,
) -> Result<()> {
    let q_rows = noise.q().iter().enumerate().flat_map(|(t, q)| {
        matrix_cells(q).map(move |(i, j, v)| vec![t.to_string(), i.to_string(), j.to_string(), v])
    });
    write_rows(q_path.as_ref(), &["t", "row", "col", "value"], q_rows)?;
    let r_rows = matrix_cells(noise.r()).map(|(i, j, v)| vec![i.to_string(), j.to_string(), v]);
    write_rows(r_path.as_ref(), &["row", "col", "value"], r_rows)
}

fn matrix_cells(a: &DMatrix<f64>) -> impl Iterator<Item = (usize, usize, String)> + '_ {
    (0..a.nrows()).flat_map(move |i| (0..a.ncols()).map(move |j| (i, j, real(a[(i, j)]))))
}

pub fn read_noise_csv(q_path: impl AsRef<Path>, r_path: impl AsRef<Path>) -> Result<IntraNoiseModel> {
    let (_, r_rows) = read_rows(r_path.as_ref(), Some(3))?;
    let m = r_rows.iter().map(|r| r[0] as usize + 1).max().unwrap_or(0);
    let mut r = DMatrix::zeros(m, m);
    for row in &r_rows {
        r[(row[0] as usize, row[1] as usize)] = row[2];
    }
    let (_, q_rows) = read_rows(q_path.as_ref(), Some(4))?;
    let len = q_rows.iter().map(|r| r[0] as usize + 1).max().unwrap_or(0);
    let mut q = vec![DMatrix::zeros(m, m); len];
    for row in &q_rows {
        let (i, j) = (row[1] as usize, row[2] as usize);
        if i >= m || j >= m {
            return Err(HkfError::parse(q_path.as_ref(), "Q entry outside R's dimension"));
        }
        q[row[0] as usize][(i, j)] = row[3];
    }
    IntraNoiseModel::new(q, r)
}

/// Filter-bank snapshot: `t,channel,mean` and `t,row,col,value`.
pub fn write_inter_state(
    mean_path: impl AsRef<Path>,
    cov_path: impl AsRef<Path>,
    state: &InterState,
) -> Result<()> {
    let means = &state.means;
    let rows = (0..means.ncols()).flat_map(|t| {
        (0..means.nrows()).map(move |c| vec![t.to_string(), c.to_string(), real(means[(c, t)])])
    });
    write_rows(mean_path.as_ref(), &["t", "channel", "mean"], rows)?;
    let cov_rows = state.covs.iter().enumerate().flat_map(|(t, p)| {
        matrix_cells(p).map(move |(i, j, v)| vec![t.to_string(), i.to_string(), j.to_string(), v])
    });
    write_rows(cov_path.as_ref(), &["t", "row", "col", "value"], cov_rows)
}

fn write_belief(path: &Path, belief: &GaussianBelief) -> Result<()> {
    let mean_rows = belief
        .mean
        .iter()
        .enumerate()
        .map(|(i, v)| vec!["mean".to_string(), i.to_string(), "0".to_string(), real(*v)]);
    let cov_rows =
        matrix_cells(&belief.cov).map(|(i, j, v)| vec!["cov".to_string(), i.to_string(), j.to_string(), v]);
    write_rows(path, &["kind", "row", "col", "value"], mean_rows.chain(cov_rows))
}

fn read_belief(path: &Path) -> Result<GaussianBelief> {
    let mut rdr = reader(path)?;
    let mut mean = Vec::new();
    let mut cov = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        if rec.len() != 4 {
            return Err(HkfError::parse(path, format!("line {line}: expected 4 fields")));
        }
        let row = parse_usize(path, line, &rec[1])?;
        let col = parse_usize(path, line, &rec[2])?;
        let v = parse_f64(path, line, &rec[3])?;
        match &rec[0] {
            "mean" => mean.push((row, v)),
            "cov" => cov.push((row, col, v)),
            other => return Err(HkfError::parse(path, format!("line {line}: unknown kind `{other}`"))),
        }
    }
    let m = mean.len();
    let mut mu = DVector::zeros(m);
    for (i, v) in mean {
        mu[i] = v;
    }
    let mut p = DMatrix::zeros(m, m);
    for (i, j, v) in cov {
        if i >= m || j >= m {
            return Err(HkfError::parse(path, "covariance entry outside mean dimension"));
        }
        p[(i, j)] = v;
    }
    GaussianBelief::new(mu, p)
}

const BUNDLE_CONFIG: &str = "model.cfg";

/// Writes `model.cfg`, `prior.csv`, `q.csv`, `r.csv` and `init.csv` into `dir`.
pub fn save_model_bundle(dir: impl AsRef<Path>, model: &HkfModel) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| HkfError::io(dir, e))?;
    let weights: Vec<String> = model.window.weights().iter().map(|&w| real(w)).collect();
    let cfg = format!(
        "order={}\ndelta_t={}\nwindow_left={}\nwindow_right={}\nwindow_weights={}\nwarmup_beats={}\n",
        model.basis.order(),
        model.basis.delta_t(),
        model.window.left(),
        model.window.right(),
        weights.join(" "),
        model.warmup_beats,
    );
    let cfg_path = dir.join(BUNDLE_CONFIG);
    fs::write(&cfg_path, cfg).map_err(|e| HkfError::io(&cfg_path, e))?;
    write_prior_csv(dir.join("prior.csv"), &model.prior)?;
    write_noise_csv(dir.join("q.csv"), dir.join("r.csv"), &model.intra_noise)?;
    write_belief(&dir.join("init.csv"), &model.init_belief)
}

pub fn load_model_bundle(dir: impl AsRef<Path>) -> Result<HkfModel> {
    let dir = dir.as_ref();
    let cfg_path = dir.join(BUNDLE_CONFIG);
    let text = fs::read_to_string(&cfg_path).map_err(|e| HkfError::io(&cfg_path, e))?;
    let get = |key: &str| -> Result<&str> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| HkfError::parse(&cfg_path, format!("missing key `{key}`")))
    };
    let num = |key: &str| -> Result<f64> { parse_f64(&cfg_path, 0, get(key)?) };
    let int = |key: &str| -> Result<usize> { parse_usize(&cfg_path, 0, get(key)?) };
    let basis = TaylorBasisConfig::new(int("order")?, num("delta_t")?)?;
    let weights = get("window_weights")?
        .split_whitespace()
        .map(|w| parse_f64(&cfg_path, 0, w))
        .collect::<Result<Vec<_>>>()?;
    let window = WindowConfig::new(int("window_left")?, int("window_right")?, weights)?;
    let prior = read_prior_csv(dir.join("prior.csv"), basis)?;
    let intra_noise = read_noise_csv(dir.join("q.csv"), dir.join("r.csv"))?;
    let init_belief = read_belief(&dir.join("init.csv"))?;
    Ok(HkfModel {
        prior,
        intra_noise,
        init_belief,
        window,
        basis,
        warmup_beats: int("warmup_beats")?,
        em_trace: Vec::new(),
    })
}

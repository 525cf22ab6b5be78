//! Trajectory CSV, JSON sidecars and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use huygens_core::dynamics::{ModelKind, ModelParams, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// Column names after `t` for a model with `n` pendulums.
pub fn state_columns(model: ModelKind, n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(model.state_len(n));
    for i in 1..=n {
        cols.push(format!("theta{i}"));
        cols.push(format!("dtheta{i}"));
    }
    if model == ModelKind::TwoMass {
        cols.extend(["y1", "dy1", "y2", "dy2"].map(String::from));
    } else {
        cols.extend(["y", "dy"].map(String::from));
    }
    cols
}

/// Everything needed to rebuild a [`Trajectory`] from its CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub format_version: u32,
    pub model: ModelKind,
    pub n: usize,
    pub params: ModelParams,
    pub initial_conditions: Vec<f64>,
    pub t_end: f64,
    pub tol: f64,
    pub sample_interval: f64,
    pub samples: usize,
    pub columns: Vec<String>,
}

impl TrajectoryMeta {
    pub fn new(traj: &Trajectory, initial_conditions: &[f64], t_end: f64, tol: f64, sample_interval: f64) -> Self {
        let mut columns = vec!["t".to_string()];
        columns.extend(state_columns(traj.model, traj.n));
        TrajectoryMeta {
            format_version: FORMAT_VERSION,
            model: traj.model,
            n: traj.n,
            params: traj.params,
            initial_conditions: initial_conditions.to_vec(),
            t_end,
            tol,
            sample_interval,
            samples: traj.len(),
            columns,
        }
    }
}

/// The sidecar of `data.csv` is `data.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report types serialize");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, &json_bytes(value))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a `t` column and one column per state component, every value
/// written as `{:.16e}` so that reading back is exact.
pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(state_columns(traj.model, traj.n));
    w.write_record(&header).expect("in-memory write");
    let mut row = Vec::with_capacity(header.len());
    for k in 0..traj.len() {
        row.clear();
        row.push(fmt_f64(traj.times[k]));
        row.extend(traj.state(k).iter().map(|&v| fmt_f64(v)));
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Header plus numeric rows of a trajectory CSV.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let bad = |reason: String| CliError::Input { path: path.to_path_buf(), reason };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => bad(format!("{other:?}")),
    })?;
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a trajectory CSV and its JSON sidecar.
pub fn read_trajectory(csv_path: &Path) -> CliResult<(Trajectory, TrajectoryMeta)> {
    let meta_path = sidecar_path(csv_path);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: TrajectoryMeta =
        serde_json::from_str(&text).map_err(|e| CliError::Input { path: meta_path.clone(), reason: e.to_string() })?;
    let (header, rows) = read_csv(csv_path)?;
    if header != meta.columns {
        return Err(CliError::Input {
            path: csv_path.to_path_buf(),
            reason: format!("header {header:?} does not match sidecar columns {:?}", meta.columns),
        });
    }
    let mut times = Vec::with_capacity(rows.len());
    let mut states = Vec::with_capacity(rows.len() * (header.len() - 1));
    for row in rows {
        times.push(row[0]);
        states.extend_from_slice(&row[1..]);
    }
    let traj = Trajectory::from_parts(times, states, meta.model, meta.params, meta.n)?;
    Ok((traj, meta))
}

//! File formats.
//!
//! Matrices travel as CSV (one row per line) or, inside a design directory,
//! as raw row-major little-endian `f64` with a JSON shape sidecar. Every
//! number is written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces the exact bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sparsegap_core::experiments::{ExperimentReport, SUBSTITUTE_DISTRIBUTION_NOTICE};
use sparsegap_core::hard_design::{CalibrationStep, HardDesign, HardDesignParams};
use sparsegap_core::re_cond::NormalizationCheck;
use sparsegap_core::RegressionProblem;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("OutputExists: {0} already exists (pass --force to overwrite)")]
    OutputExists(PathBuf),
    #[error("Io: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("Format: {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Domain(#[from] sparsegap_core::Error),
}

impl IoError {
    pub fn name(&self) -> &'static str {
        match self {
            IoError::OutputExists(_) => "OutputExists",
            IoError::Io { .. } => "Io",
            IoError::Format { .. } => "Format",
            IoError::Domain(e) => e.name(),
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        IoError::Format { path: path.to_path_buf(), message: message.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Refuses to clobber an existing path unless `force` is set.
pub fn guard(path: &Path, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(IoError::OutputExists(path.to_path_buf()));
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    guard(path, force)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, force: bool) -> Result<()> {
    write_bytes(path, to_json(value).as_bytes(), force)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_string(path)?).map_err(|e| IoError::format(path, e))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn vector_to_csv(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = read_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<_, _>>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| IoError::format(path, e))?;
    rows_to_matrix(path, &rows)
}

fn rows_to_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(IoError::format(path, "matrix rows are empty or ragged"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// On-disk regression problem: `{"x": [[..], ..], "y": [..], "sigma": .., "k": ..}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub sigma: f64,
    pub k: usize,
}

impl ProblemFile {
    pub fn from_problem(prob: &RegressionProblem) -> Self {
        let x = prob.x();
        ProblemFile {
            x: (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect(),
            y: prob.y().as_slice().to_vec(),
            sigma: prob.sigma(),
            k: prob.k(),
        }
    }
}

pub fn read_problem(path: &Path) -> Result<RegressionProblem> {
    let file: ProblemFile = read_json(path)?;
    let x = rows_to_matrix(path, &file.x)?;
    Ok(RegressionProblem::new(x, DVector::from_vec(file.y), file.sigma, file.k)?)
}

/// Everything in `params.json` of a design directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignRecord {
    pub params: HardDesignParams,
    pub seed_used: u64,
    pub r_seed: u64,
    pub x_calibrated: f64,
    pub gamma_hat: f64,
    pub gamma_hat_unquantized: f64,
    pub normalization: NormalizationCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub rows: usize,
    pub cols: usize,
    pub l: u32,
    pub layout: String,
    pub dtype: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub trace: Vec<CalibrationStep>,
}

pub const DESIGN_FILES: [&str; 4] = ["params.json", "X.bin", "X.meta.json", "provenance.json"];

pub fn write_design(dir: &Path, design: &HardDesign, force: bool) -> Result<()> {
    for name in DESIGN_FILES {
        guard(&dir.join(name), force)?;
    }
    let record = DesignRecord {
        params: design.params,
        seed_used: design.seed_used,
        r_seed: design.r_seed,
        x_calibrated: design.x_calibrated,
        gamma_hat: design.gamma_hat,
        gamma_hat_unquantized: design.gamma_hat_unquantized,
        normalization: design.normalization,
    };
    let (rows, cols) = design.x.shape();
    let mut bin = Vec::with_capacity(rows * cols * 8);
    for i in 0..rows {
        for j in 0..cols {
            bin.extend_from_slice(&design.x[(i, j)].to_le_bytes());
        }
    }
    let meta = MatrixMeta { rows, cols, l: design.params.l, layout: "row-major".into(), dtype: "f64-le".into() };
    write_json(&dir.join("params.json"), &record, true)?;
    write_bytes(&dir.join("X.bin"), &bin, true)?;
    write_json(&dir.join("X.meta.json"), &meta, true)?;
    write_json(&dir.join("provenance.json"), &Provenance { trace: design.trace.clone() }, true)
}

pub fn read_design(dir: &Path) -> Result<HardDesign> {
    let record: DesignRecord = read_json(&dir.join("params.json"))?;
    let meta: MatrixMeta = read_json(&dir.join("X.meta.json"))?;
    let provenance: Provenance = read_json(&dir.join("provenance.json"))?;
    let bin_path = dir.join("X.bin");
    let bin = fs::read(&bin_path).map_err(io_err(&bin_path))?;
    if bin.len() != meta.rows * meta.cols * 8 {
        return Err(IoError::format(&bin_path, format!("expected {}x{} f64 values", meta.rows, meta.cols)));
    }
    let value = |i: usize, j: usize| {
        let at = 8 * (i * meta.cols + j);
        f64::from_le_bytes(bin[at..at + 8].try_into().unwrap())
    };
    Ok(HardDesign {
        x: DMatrix::from_fn(meta.rows, meta.cols, value),
        params: record.params,
        seed_used: record.seed_used,
        x_calibrated: record.x_calibrated,
        gamma_hat: record.gamma_hat,
        gamma_hat_unquantized: record.gamma_hat_unquantized,
        r_seed: record.r_seed,
        trace: provenance.trace,
        normalization: record.normalization,
    })
}

pub const REPORT_HEADER: &str = "gamma,estimator,trials,mse_mean,mse_std,seed,runtime_s";

pub fn report_to_csv(report: &ExperimentReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.gamma, r.estimator, r.trials, r.mse_mean, r.mse_std, r.seed, r.runtime_s
        )
        .unwrap();
    }
    out
}

/// The report with its configuration, per-γ details and distribution notice.
pub fn report_to_json(report: &ExperimentReport) -> String {
    debug_assert_eq!(report.notice, SUBSTITUTE_DISTRIBUTION_NOTICE);
    to_json(report)
}

/// Sidecar path for a CSV report: `report.csv` gets `report.csv.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

//! The `sparsegap` command line.
//!
//! Exit codes: 0 on success, 1 when the computation or file handling fails
//! (the error's name is the first word on stderr), 2 on usage errors,
//! including an existing output without `--force`.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use sparsegap_core::estimators::{l0_estimate_with_budget, lasso, standard_lambda, thresholded_lasso, LassoOptions};
use sparsegap_core::experiments::{
    build_pprime_response, gap_experiment, reduction_params, replace_segment, sample_theta_star, segment_range, Clock,
    NoClock,
};
use sparsegap_core::hard_design::{build_hard_design, GammaCeiling};
use sparsegap_core::re_cond::{check_normalization, re_upper_bound, NormalizationMode};
use sparsegap_core::seed::{derive_seed, label, rng};
use sparsegap_core::x3c::{
    build_cover_matrix, build_response, enumerate_triples, solve_x3c_bruteforce, solve_x3c_via_regression, X3CInstance,
};
use sparsegap_core::{EstimatorKind, GapConfig, HardDesignParams, DEFAULT_BUDGET};

use crate::io::{self, IoError, Result};
use crate::WallClock;

#[derive(Debug, Parser)]
#[command(name = "sparsegap", version, about = "Sparse-regression hardness workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random X3C instance as JSON.
    GenX3c(GenX3c),
    /// Cover matrix M (and response y for an instance) as CSV.
    BuildM(BuildM),
    /// Exact cover of an instance, or null.
    SolveX3c(SolveX3c),
    /// Run an estimator on a regression problem file.
    Estimate(EstimateCmd),
    /// Upper bound on the RE constant of a matrix or design.
    ReEstimate(ReEstimate),
    /// Check the 2k-sparse normalization condition.
    CheckNorm(CheckNorm),
    /// Calibrate, quantize and certify a hard design into a directory.
    BuildDesign(BuildDesign),
    /// l0 vs thresholded-Lasso prediction error across RE targets.
    Gap(Gap),
    /// Two-vector response built from a design and an advice vector.
    PprimeDemo(PprimeDemo),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GenX3c {
    #[arg(long)]
    pub m: usize,
    /// Probability of including each triple.
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    #[arg(long)]
    pub plant_cover: bool,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BuildM {
    #[arg(long, required_unless_present = "instance", conflicts_with = "instance")]
    pub m: Option<usize>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Directory receiving M.csv, y.csv (with --instance) and meta.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Oracle {
    Brute,
    L0,
}

#[derive(Debug, Args)]
pub struct SolveX3c {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Oracle::Brute)]
    pub oracle: Oracle,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    L0,
    Lasso,
    ThreshLasso,
}

#[derive(Debug, Args)]
pub struct EstimateCmd {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Lasso level; defaults to 4σ√(ln d / n).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Largest number of supports l0 may enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u128,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MatrixInput {
    /// Design directory written by build-design.
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub design: Option<PathBuf>,
    /// Matrix CSV, one row per line.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Sparsity; defaults to the design's k.
    #[arg(long)]
    pub k: Option<usize>,
}

impl MatrixInput {
    fn load(&self) -> Result<(DMatrix<f64>, usize)> {
        match (&self.design, &self.matrix) {
            (Some(dir), _) => {
                let design = io::read_design(dir)?;
                let k = self.k.unwrap_or(design.k());
                Ok((design.x, k))
            }
            (None, Some(path)) => {
                let k = self
                    .k
                    .ok_or_else(|| sparsegap_core::Error::InvalidParameter("--k is required with --matrix".into()))?;
                Ok((io::read_matrix_csv(path)?, k))
            }
            (None, None) => unreachable!("clap enforces one input"),
        }
    }
}

#[derive(Debug, Args)]
pub struct ReEstimate {
    #[command(flatten)]
    pub input: MatrixInput,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Debug, Args)]
pub struct CheckNorm {
    #[command(flatten)]
    pub input: MatrixInput,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Ceiling {
    Theoretical,
    Empirical,
}

#[derive(Debug, Args)]
pub struct BuildDesign {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 30)]
    pub l: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon_bar: f64,
    #[arg(long, value_enum, default_value_t = Ceiling::Empirical)]
    pub ceiling: Ceiling,
    #[arg(long)]
    pub seed: u64,
    /// Design directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Timing {
    /// runtime_s is 0, keeping reports byte-reproducible.
    None,
    Wall,
}

#[derive(Debug, Args)]
pub struct Gap {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub gammas: Vec<f64>,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub theta_samples: usize,
    #[arg(long, default_value_t = 30)]
    pub l: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon_bar: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = Timing::None)]
    pub timing: Timing,
    /// Report path; CSV reports also get a `<out>.meta.json` sidecar.
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct PprimeDemo {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    /// 0-based segment replaced in the advice vector.
    #[arg(long)]
    pub segment: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(IoError::OutputExists(path)) => {
            eprintln!("OutputExists: {} already exists (pass --force to overwrite)", path.display());
            2
        }
        Err(e) => {
            eprintln!("{e}");
            1
        }
    }
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => io::write_bytes(path, text.as_bytes(), output.force),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| IoError::Io { path: "<stdout>".into(), source })
        }
    }
}

#[derive(Serialize)]
struct SolveOutput {
    m: usize,
    oracle: &'static str,
    found: bool,
    /// 1-based indices into the lexicographic list of all triples.
    cover: Option<Vec<usize>>,
    triples: Option<Vec<[usize; 3]>>,
}

#[derive(Serialize)]
struct EstimateOutput {
    method: &'static str,
    lambda: Option<f64>,
    #[serde(flatten)]
    estimate: sparsegap_core::Estimate,
}

#[derive(Serialize)]
struct NormOutput {
    k: usize,
    mode: NormalizationMode,
    seed: u64,
    #[serde(flatten)]
    check: sparsegap_core::re_cond::NormalizationCheck,
}

#[derive(Serialize)]
struct MatrixMetaOutput {
    m: usize,
    p: usize,
    rows: usize,
    cols: usize,
    instance: Option<PathBuf>,
}

#[derive(Serialize)]
struct PprimeOutput {
    segment: usize,
    sigma: f64,
    seed: u64,
    r: f64,
    rho: f64,
    theta_bar: Vec<f64>,
    theta_tilde: Vec<f64>,
    y: Vec<f64>,
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenX3c(c) => {
            let inst = X3CInstance::random(c.m, c.density, c.plant_cover, &mut rng(c.seed))?;
            emit(&c.output, &io::to_json(&inst))
        }
        Command::BuildM(c) => {
            let (m, inst) = match (&c.instance, c.m) {
                (Some(path), _) => {
                    let inst: X3CInstance = io::read_json(path)?;
                    (inst.m(), Some(inst))
                }
                (None, Some(m)) => (m, None),
                (None, None) => unreachable!("clap enforces one source"),
            };
            let cm = build_cover_matrix(m)?;
            let files = ["M.csv", "y.csv", "meta.json"];
            for f in files {
                io::guard(&c.out.join(f), c.force)?;
            }
            io::write_bytes(&c.out.join("M.csv"), io::matrix_to_csv(cm.matrix()).as_bytes(), true)?;
            if let Some(inst) = &inst {
                io::write_bytes(&c.out.join("y.csv"), io::vector_to_csv(&build_response(inst)).as_bytes(), true)?;
            }
            let (rows, cols) = cm.matrix().shape();
            let meta = MatrixMetaOutput { m, p: cm.p(), rows, cols, instance: c.instance.clone() };
            io::write_json(&c.out.join("meta.json"), &meta, true)
        }
        Command::SolveX3c(c) => {
            let inst: X3CInstance = io::read_json(&c.instance)?;
            let (oracle, cover) = match c.oracle {
                Oracle::Brute => ("brute", solve_x3c_bruteforce(&inst)?),
                Oracle::L0 => ("l0", solve_x3c_via_regression(&inst, &EstimatorKind::L0)?),
            };
            let index = enumerate_triples(inst.m())?;
            let out = SolveOutput {
                m: inst.m(),
                oracle,
                found: cover.is_some(),
                triples: cover
                    .as_ref()
                    .map(|cv| cv.selected.iter().map(|&j| *index.triple(j).expect("valid index")).collect()),
                cover: cover.map(|cv| cv.selected.into_iter().collect()),
            };
            emit(&c.output, &io::to_json(&out))
        }
        Command::Estimate(c) => {
            let prob = io::read_problem(&c.problem)?;
            let default_lambda = || standard_lambda(prob.sigma(), prob.n(), prob.d());
            let (method, lambda, estimate) = match c.method {
                Method::L0 => ("l0", None, l0_estimate_with_budget(&prob, c.budget)?),
                Method::Lasso => {
                    let lambda = c.lambda.unwrap_or_else(default_lambda);
                    ("lasso", Some(lambda), lasso(&prob, lambda, &LassoOptions::default())?)
                }
                Method::ThreshLasso => ("thresh-lasso", Some(default_lambda()), thresholded_lasso(&prob)?),
            };
            emit(&c.output, &io::to_json(&EstimateOutput { method, lambda, estimate }))
        }
        Command::ReEstimate(c) => {
            let (x, k) = c.input.load()?;
            let est = re_upper_bound(&x, k, c.restarts, c.seed)?;
            emit(&c.output, &io::to_json(&est))
        }
        Command::CheckNorm(c) => {
            let (x, k) = c.input.load()?;
            let mode = match c.mode {
                Mode::Exact => NormalizationMode::Exact,
                Mode::Sampled => NormalizationMode::Sampled,
            };
            let check = check_normalization(&x, k, mode, c.seed)?;
            emit(&c.output, &io::to_json(&NormOutput { k, mode, seed: c.seed, check }))
        }
        Command::BuildDesign(c) => {
            for name in io::DESIGN_FILES {
                io::guard(&c.out.join(name), c.force)?;
            }
            let params = HardDesignParams {
                m: c.m,
                t: c.t,
                n: c.n,
                d: c.d,
                gamma_target: c.gamma,
                l: c.l,
                epsilon_bar: c.epsilon_bar,
                seed: c.seed,
                ceiling: match c.ceiling {
                    Ceiling::Theoretical => GammaCeiling::Theoretical,
                    Ceiling::Empirical => GammaCeiling::Empirical,
                },
            };
            let design = build_hard_design(&params)?;
            io::write_design(&c.out, &design, c.force)
        }
        Command::Gap(c) => {
            let config = GapConfig {
                m: c.m,
                t: c.t,
                n: c.n,
                d: c.d,
                gammas: c.gammas.clone(),
                sigma: c.sigma,
                trials: c.trials,
                seed: c.seed,
                l: c.l,
                epsilon_bar: c.epsilon_bar,
                theta_samples: c.theta_samples,
            };
            if let Some(path) = &c.output.out {
                io::guard(path, c.output.force)?;
                if matches!(c.format, Format::Csv) {
                    io::guard(&io::sidecar_path(path), c.output.force)?;
                }
            }
            let wall = WallClock::new();
            let clock: &dyn Clock = match c.timing {
                Timing::None => &NoClock,
                Timing::Wall => &wall,
            };
            let report = gap_experiment(&config, clock)?;
            match c.format {
                Format::Csv => {
                    emit(&c.output, &io::report_to_csv(&report))?;
                    if let Some(path) = &c.output.out {
                        io::write_bytes(&io::sidecar_path(path), io::report_to_json(&report).as_bytes(), true)?;
                    }
                    Ok(())
                }
                Format::Json => emit(&c.output, &io::report_to_json(&report)),
            }
        }
        Command::PprimeDemo(c) => {
            let design = io::read_design(&c.design)?;
            let red = reduction_params(&design, c.sigma)?;
            let p = design.params.p();
            let advice = sample_theta_star(&design, red.rho, derive_seed(c.seed, label("advice")))?;
            let fresh = sample_theta_star(&design, red.rho, derive_seed(c.seed, label("segment")))?;
            if c.segment >= design.params.t {
                return Err(sparsegap_core::Error::InvalidAdvice(format!(
                    "segment {} outside 0..{}",
                    c.segment, design.params.t
                ))
                .into());
            }
            let bar = replace_segment(&advice.theta, p, c.segment, &fresh.theta[segment_range(p, c.segment)])?;
            let y = build_pprime_response(
                &design,
                &bar,
                &advice.theta,
                c.sigma,
                c.segment,
                derive_seed(c.seed, label("noise")),
            )?;
            let out = PprimeOutput {
                segment: c.segment,
                sigma: c.sigma,
                seed: c.seed,
                r: red.r,
                rho: red.rho,
                theta_bar: bar,
                theta_tilde: advice.theta,
                y: y.as_slice().to_vec(),
            };
            emit(&c.output, &io::to_json(&out))
        }
    }
}

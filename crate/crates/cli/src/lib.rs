//! Command-line surface for angemb-core.
//!
//! Exit codes: 2 usage, 3 data, 4 numeric failure.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use angemb_core::imaging::{rmse, DEFAULT_BACKGROUND_COMPONENTS, DEFAULT_FACE_COMPONENTS};
use angemb_core::linalg::DEFAULT_ZERO_TOL;
use angemb_core::synth::{
    darken_band, four_class_3d, moving_square_video, synthetic_faces, timing_matrix, timing_shape,
    FaceSpec, VideoSpec,
};
use angemb_core::tae::DEFAULT_BLOCK;
use angemb_core::{
    background_model, center, fit, generate, load_frames, normalize_columns, outlier_counts,
    reconstruct, select_inliers, shadow_removal, write_frames, DataMatrix, EmConfig, Error,
    FitConfig, FitModel, FitOptions, FrameStack, Method, Strategy, Subspace, SynthSpec,
    TrimReport,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

pub mod io;

use io::{atomic_write, csv_bytes, frame_paths, read_csv};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidThreshold(_)) => 2,
            CliError::Core(Error::RankDeficient { .. } | Error::SingularStep) => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "angemb", version, about = "Angular embedding and trimmed angular embedding toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fit a model on a CSV of samples (rows) and write model JSON.
    Fit(FitCmd),
    /// Reconstruct CSV samples from a saved model.
    Reconstruct(ReconstructCmd),
    /// Report the outlier trimming of a CSV without fitting.
    TrimReport(TrimCmd),
    /// Generate a synthetic data set.
    Synth(SynthCmd),
    /// Background modeling over a stack of PGM frames.
    Bgmodel(ImageCmd),
    /// Shadow removal over a stack of PGM face images.
    Faces(ImageCmd),
    /// Time methods on a CSV or a synthetic matrix of a named shape.
    Bench(BenchCmd),
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Settings shared by every command that fits a model.
#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// pca, em_pca, ae or tae
    #[arg(long, default_value_t = Method::Tae, value_parser = parse_method)]
    pub method: Method,
    /// Angular threshold in radians, strictly between 0 and pi/2 (tae only)
    #[arg(long, default_value_t = FRAC_PI_3)]
    pub eta_theta: f64,
    /// auto, d-path, n-path or randomized
    #[arg(long, default_value_t = Strategy::Auto, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows of the cosine matrix held in memory at once (tae only)
    #[arg(long, default_value_t = DEFAULT_BLOCK, value_parser = positive)]
    pub block: usize,
    /// Relative change of the loadings that stops EM (em_pca only)
    #[arg(long, default_value_t = 1e-4)]
    pub em_tol: f64,
    /// Iteration cap for EM (em_pca only)
    #[arg(long, default_value_t = 1000)]
    pub em_max_iter: usize,
}

impl FitArgs {
    fn validate(&self) -> Result<(), CliError> {
        let eta = self.eta_theta;
        if !(eta.is_finite() && eta > 0.0 && eta < FRAC_PI_2) {
            return Err(CliError::Usage(format!(
                "--eta-theta must lie strictly between 0 and pi/2, got {eta}"
            )));
        }
        if !(self.em_tol.is_finite() && self.em_tol >= 0.0) {
            return Err(CliError::Usage("--em-tol must be finite and non-negative".into()));
        }
        if self.em_max_iter == 0 {
            return Err(CliError::Usage("--em-max-iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> FitOptions {
        FitOptions {
            method: self.method,
            eta_theta: self.eta_theta,
            em: EmConfig {
                tol: self.em_tol,
                max_iter: self.em_max_iter,
            },
            config: FitConfig {
                strategy: self.strategy,
                zero_tol: DEFAULT_ZERO_TOL,
                seed: self.seed,
                block: self.block,
            },
        }
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitCmd {
    /// CSV of samples, one per row
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the model JSON
    #[arg(long)]
    pub output: PathBuf,
    /// Number of components d
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub components: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReconstructCmd {
    /// Model JSON written by `fit`
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of samples, one per row
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the reconstructed CSV
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrimCmd {
    #[arg(long)]
    pub input: PathBuf,
    /// Write the report here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Angular threshold in radians, strictly between 0 and pi/2
    #[arg(long, default_value_t = FRAC_PI_3)]
    pub eta_theta: f64,
    #[arg(long, default_value_t = DEFAULT_BLOCK, value_parser = positive)]
    pub block: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 10-D, 500 inliers on a line, 50 orthogonal outliers (CSV)
    Canonical,
    /// Four classes in 3-D with a lifted tenth (CSV)
    FourClass3d,
    /// 64x48 moving-square video (PGM frames)
    Video,
    /// 32x32 rank-9 faces (PGM frames)
    Faces,
    /// The faces preset with a dark band across face 0 (PGM frames)
    FacesShadow,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthCmd {
    #[arg(long, value_enum)]
    pub preset: Preset,
    /// Output directory
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the preset seed (42)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the inlier noise of the canonical preset
    #[arg(long)]
    pub noise: Option<f64>,
    /// Overrides the outlier fraction of the canonical preset
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImageCmd {
    /// Directory of .pgm files or a glob pattern
    #[arg(long)]
    pub frames: String,
    /// Output directory
    #[arg(long)]
    pub output: PathBuf,
    /// Number of components (5 for bgmodel, 9 for faces)
    #[arg(long, value_parser = positive)]
    pub components: Option<usize>,
    /// Clean reference frame (PGM); the summary then reports RMSE against it
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchCmd {
    /// yale, water, hall or caviar; ignored when --input is given
    #[arg(long, default_value = "water")]
    pub preset: String,
    /// CSV of samples to time instead of a synthetic matrix
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated methods
    #[arg(long = "method", value_delimiter = ',', default_value = "pca,ae,tae", value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    pub components: usize,
    #[arg(long, default_value_t = 3, value_parser = positive)]
    pub repeats: usize,
    /// Divide the preset feature count by this factor
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub scale: usize,
    /// Write the CSV table here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// auto, d-path, n-path or randomized
    #[arg(long, default_value_t = Strategy::Auto, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angular threshold for tae
    #[arg(long, default_value_t = FRAC_PI_3)]
    pub eta_theta: f64,
}

/// Runs a parsed command, returning what goes to standard output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let config = serde_json::to_value(&cli.command).expect("config serializes");
    match &cli.command {
        Command::Fit(cmd) => cmd_fit(cmd, config),
        Command::Reconstruct(cmd) => cmd_reconstruct(cmd, config),
        Command::TrimReport(cmd) => cmd_trim_report(cmd, config),
        Command::Synth(cmd) => cmd_synth(cmd, config),
        Command::Bgmodel(cmd) => cmd_images(cmd, config, Pipeline::Background),
        Command::Faces(cmd) => cmd_images(cmd, config, Pipeline::Faces),
        Command::Bench(cmd) => cmd_bench(cmd),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    atomic_write(path, pretty(v).as_bytes())
}

fn trim_json(report: &TrimReport) -> Value {
    json!({
        "eta_theta": report.eta_theta,
        "tau_min": report.tau_min,
        "pivot": report.pivot,
        "outliers": report.outliers,
        "n_inliers": report.inliers.len(),
    })
}

pub fn cmd_fit(cmd: &FitCmd, config: Value) -> Result<String, CliError> {
    cmd.fit.validate()?;
    let x = read_csv(&cmd.input)?;
    let model = fit(&x, cmd.components, &cmd.fit.options())?;
    atomic_write(&cmd.output, model.to_json()?.as_bytes())?;
    Ok(pretty(&json!({
        "method": model.method,
        "d": model.rank(),
        "n": x.n_samples(),
        "D": x.dim(),
        "samples_trimmed": model.n_trimmed(),
        "wall_time_s": model.stats.wall_time_s,
        "path": model.stats.path,
        "iterations": model.stats.iterations,
        "config": config,
    })))
}

pub fn cmd_reconstruct(cmd: &ReconstructCmd, config: Value) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&cmd.model).map_err(|source| Error::Io {
        path: cmd.model.clone(),
        source,
    })?;
    let model = FitModel::from_json(&text)?;
    let x = read_csv(&cmd.input)?;
    let r = reconstruct(&model, &x)?;
    atomic_write(&cmd.output, &csv_bytes(r.values(), None)?)?;
    let err = (x.values() - r.values()).norm() / (x.len_f64()).sqrt();
    Ok(pretty(&json!({
        "method": model.method,
        "d": model.rank(),
        "n": x.n_samples(),
        "D": x.dim(),
        "rmse": err,
        "config": config,
    })))
}

trait LenF64 {
    fn len_f64(&self) -> f64;
}

impl LenF64 for DataMatrix {
    fn len_f64(&self) -> f64 {
        (self.dim() * self.n_samples()) as f64
    }
}

/// Trims like `fit --method tae` and also maps the flagged columns back to
/// input rows (zero-norm samples are skipped before trimming).
pub fn trim_with_sources(x: &DataMatrix, eta_theta: f64, block: usize) -> Result<(TrimReport, Vec<usize>, usize), CliError> {
    let (_, xc) = center(x);
    let units = normalize_columns(&xc, DEFAULT_ZERO_TOL)?;
    let tau = outlier_counts(&units, eta_theta, block)?;
    let (report, _) = select_inliers(&units, &tau, eta_theta)?;
    let rows = report.outliers.iter().map(|&j| units.kept()[j]).collect();
    Ok((report, rows, units.dropped().len()))
}

pub fn cmd_trim_report(cmd: &TrimCmd, config: Value) -> Result<String, CliError> {
    let eta = cmd.eta_theta;
    if !(eta.is_finite() && eta > 0.0 && eta < FRAC_PI_2) {
        return Err(CliError::Usage(format!(
            "--eta-theta must lie strictly between 0 and pi/2, got {eta}"
        )));
    }
    let x = read_csv(&cmd.input)?;
    let (report, rows, dropped) = trim_with_sources(&x, eta, cmd.block)?;
    let out = json!({
        "eta_theta": report.eta_theta,
        "cos_threshold": report.cos_threshold,
        "tau_min": report.tau_min,
        "pivot": report.pivot,
        "outliers": report.outliers,
        "outlier_rows": rows,
        "n_inliers": report.inliers.len(),
        "dropped_zero_norm": dropped,
        "tau": report.tau,
        "config": config,
    });
    match &cmd.output {
        Some(path) => {
            write_json(path, &out)?;
            Ok(String::new())
        }
        None => Ok(pretty(&out)),
    }
}

fn basis_columns(s: &Subspace) -> Vec<Vec<f64>> {
    s.basis().column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn cmd_synth(cmd: &SynthCmd, config: Value) -> Result<String, CliError> {
    let seed = cmd.seed.unwrap_or(42);
    let out = &cmd.output;
    let mut summary = json!({ "preset": cmd.preset, "seed": seed, "config": config });
    match cmd.preset {
        Preset::Canonical => {
            let mut spec = SynthSpec { seed, ..SynthSpec::canonical() };
            if let Some(noise) = cmd.noise {
                spec.inlier_noise = noise;
            }
            if let Some(fraction) = cmd.fraction {
                spec.outlier_fraction = fraction;
            }
            let r = generate(&spec)?;
            atomic_write(&out.join("data.csv"), &csv_bytes(r.data.values(), None)?)?;
            write_json(
                &out.join("truth.json"),
                &json!({
                    "outlier_indices": r.outlier_indices,
                    "true_basis": basis_columns(&r.true_basis),
                    "spec": spec,
                }),
            )?;
            summary["n"] = json!(r.data.n_samples());
            summary["D"] = json!(r.data.dim());
        }
        Preset::FourClass3d => {
            let r = four_class_3d(100, seed)?;
            atomic_write(&out.join("data.csv"), &csv_bytes(r.data.values(), None)?)?;
            write_json(
                &out.join("truth.json"),
                &json!({
                    "outlier_indices": r.shifted,
                    "labels": r.labels,
                    "true_basis": basis_columns(&r.true_basis),
                }),
            )?;
            summary["n"] = json!(r.data.n_samples());
            summary["D"] = json!(r.data.dim());
        }
        Preset::Video => {
            let v = moving_square_video(&VideoSpec { seed, ..VideoSpec::default() })?;
            write_frames(&v.frames, &out.join("frames"), "")?;
            let bg = DataMatrix::new(DMatrix::from_columns(&[v.background.clone()]))?;
            let bg = FrameStack::new(v.frames.width(), v.frames.height(), bg, vec!["background".into()])?;
            write_frames(&bg, out, "")?;
            let names: Vec<&String> = v.intruded.iter().map(|&i| &v.frames.names()[i]).collect();
            write_json(
                &out.join("truth.json"),
                &json!({ "intruded": v.intruded, "intruded_names": names }),
            )?;
            summary["frames"] = json!(v.frames.len());
        }
        Preset::Faces | Preset::FacesShadow => {
            let f = synthetic_faces(&FaceSpec { seed, ..FaceSpec::default() })?;
            let (stack, band) = if cmd.preset == Preset::FacesShadow {
                let (s, pixels) = darken_band(&f.faces, 0, 12..18, 0.3)?;
                (s, pixels)
            } else {
                (f.faces, Vec::new())
            };
            write_frames(&stack, &out.join("frames"), "")?;
            write_json(&out.join("truth.json"), &json!({ "shadow_face": 0, "shadow_pixels": band }))?;
            summary["frames"] = json!(stack.len());
        }
    }
    write_json(&out.join("summary.json"), &summary)?;
    Ok(pretty(&summary))
}

#[derive(Clone, Copy)]
enum Pipeline {
    Background,
    Faces,
}

fn load_reference(path: &Path, stack: &FrameStack) -> Result<nalgebra::DVector<f64>, CliError> {
    let r = load_frames(&[path])?;
    if r.width() != stack.width() || r.height() != stack.height() {
        return Err(Error::MixedDimensions {
            name: r.names()[0].clone(),
            width: stack.width(),
            height: stack.height(),
            got_width: r.width(),
            got_height: r.height(),
        }
        .into());
    }
    Ok(r.frame(0).into_owned())
}

fn cmd_images(cmd: &ImageCmd, mut config: Value, pipeline: Pipeline) -> Result<String, CliError> {
    cmd.fit.validate()?;
    let d = cmd.components.unwrap_or(match pipeline {
        Pipeline::Background => DEFAULT_BACKGROUND_COMPONENTS,
        Pipeline::Faces => DEFAULT_FACE_COMPONENTS,
    });
    config["components"] = json!(d);
    let paths = frame_paths(&cmd.frames)?;
    let stack = load_frames(&paths)?;
    let reference = cmd.reference.as_deref().map(|p| load_reference(p, &stack)).transpose()?;
    let options = cmd.fit.options();
    let (model, clean) = match pipeline {
        Pipeline::Background => {
            let r = background_model(&stack, d, &options)?;
            write_frames(&r.backgrounds, &cmd.output, "_bg")?;
            write_frames(&r.foreground, &cmd.output, "_fg")?;
            (r.model, r.backgrounds)
        }
        Pipeline::Faces => {
            let r = shadow_removal(&stack, d, &options)?;
            write_frames(&r.reconstructed, &cmd.output, "_rec")?;
            write_frames(&r.inverted_difference, &cmd.output, "_diff")?;
            (r.model, r.reconstructed)
        }
    };
    let trim = match model.as_ref().and_then(|m| m.trim.as_ref()) {
        Some(report) => {
            let (_, rows, _) = trim_with_sources(stack.frames(), report.eta_theta, cmd.fit.block)?;
            let mut t = trim_json(report);
            t["trimmed_frames"] = json!(rows.iter().map(|&i| &stack.names()[i]).collect::<Vec<_>>());
            t
        }
        None => Value::Null,
    };
    let mut summary = json!({
        "method": cmd.fit.method,
        "d": d,
        "eta_theta": cmd.fit.eta_theta,
        "frames": stack.len(),
        "width": stack.width(),
        "height": stack.height(),
        "trim": trim,
        "config": config,
    });
    if let Some(reference) = reference {
        summary["rmse"] = json!(rmse(clean.frames().values(), &reference));
    }
    write_json(&cmd.output.join("summary.json"), &summary)?;
    Ok(pretty(&summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub dataset: String,
    pub method: Method,
    pub d: usize,
    pub mean_s: f64,
    #[serde(rename = "D")]
    pub dim: usize,
    pub n: usize,
    pub path: String,
}

pub fn cmd_bench(cmd: &BenchCmd) -> Result<String, CliError> {
    let eta = cmd.eta_theta;
    if !(eta.is_finite() && eta > 0.0 && eta < FRAC_PI_2) {
        return Err(CliError::Usage(format!(
            "--eta-theta must lie strictly between 0 and pi/2, got {eta}"
        )));
    }
    let (dataset, x) = match &cmd.input {
        Some(path) => (
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            read_csv(path)?,
        ),
        None => {
            let (dim, n) = timing_shape(&cmd.preset).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown preset {:?}; expected yale, water, hall or caviar",
                    cmd.preset
                ))
            })?;
            let dim = (dim / cmd.scale).max(1);
            (cmd.preset.clone(), timing_matrix(dim, n, 20, cmd.seed)?)
        }
    };
    let mut options = FitOptions::new(Method::Ae);
    options.eta_theta = eta;
    options.config.strategy = cmd.strategy;
    options.config.seed = cmd.seed;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for &method in &cmd.methods {
        options.method = method;
        let mut total = 0.0;
        let mut path = String::new();
        for _ in 0..cmd.repeats {
            let start = Instant::now();
            let model = fit(&x, cmd.components, &options)?;
            total += start.elapsed().as_secs_f64();
            path = model.stats.path.map(|p| p.to_string()).unwrap_or_else(|| "em".into());
        }
        writer
            .serialize(BenchRow {
                dataset: dataset.clone(),
                method,
                d: cmd.components,
                mean_s: total / cmd.repeats as f64,
                dim: x.dim(),
                n: x.n_samples(),
                path,
            })
            .map_err(|e| Error::InvalidData(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidData(e.to_string()))?;
    match &cmd.output {
        Some(path) => {
            atomic_write(path, &bytes)?;
            Ok(String::new())
        }
        None => Ok(String::from_utf8(bytes).expect("csv is utf-8")),
    }
}

/// Sizes the global thread pool from `ANGEMB_THREADS` (0 or unset = auto).
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ANGEMB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("ANGEMB_THREADS must be a count, got {raw:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

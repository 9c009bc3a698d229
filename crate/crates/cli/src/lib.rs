//! Command line entry points and the session service.

pub mod commands;
pub mod service;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use layoutlab_core::backend::{BackendConfig, BackendKind};
use layoutlab_core::engine::{EngineError, Mode, OrderPolicy};
use thiserror::Error;

/// Environment variable that takes precedence over `--endpoint`.
pub const ENDPOINT_ENV: &str = "LAYOUTLAB_ENDPOINT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sampler(#[from] layoutlab_core::SamplerError),
    #[error(transparent)]
    Backend(#[from] layoutlab_core::BackendError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Eval(#[from] layoutlab_core::EvalError),
    #[error(transparent)]
    Model(#[from] layoutlab_core::ModelError),
    #[error(transparent)]
    Training(#[from] layoutlab_core::training::TrainingError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Sampler(layoutlab_core::SamplerError::UnknownSplit { .. }) => 1,
            CliError::Backend(layoutlab_core::BackendError::Config(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "layoutlab", version, about = "Layout-guided image synthesis benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample benchmark scenes into split manifests.
    GenerateBench(GenerateBenchArgs),
    /// Render ground-truth images and layouts for manifests.
    RenderGt(RenderGtArgs),
    /// Generate images from manifest layouts with an inpainting backend.
    Run(RunArgs),
    /// Score generated images or ingested detections against manifests.
    Eval(EvalArgs),
    /// Merge evaluation reports into one table.
    Report(ReportArgs),
    /// Export foreground/background inpainting training examples.
    ExportTraining(ExportTrainingArgs),
    /// Serve the session API over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateBenchArgs {
    /// Skill to sample; all out-of-distribution splits when omitted.
    #[arg(long)]
    pub skill: Option<String>,
    /// Split of the skill; every split of the skill when omitted.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// First scene seed; scene i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderGtArgs {
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, default_value = "procedural", value_parser = ["procedural", "remote", "perturb"])]
    pub backend: String,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    pub guidance: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: u32,
    /// Box offset bound in pixels for the perturb backend.
    #[arg(long, default_value_t = 0)]
    pub jitter: u32,
    #[arg(long, default_value_t = 120_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 4)]
    pub max_inflight: usize,
}

impl BackendArgs {
    /// Backend configuration, with the endpoint taken from the environment
    /// when it is set there.
    pub fn config(&self, seed: u64) -> Result<BackendConfig, CliError> {
        let kind: BackendKind = self.backend.parse()?;
        let endpoint = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()).or_else(|| self.endpoint.clone());
        let config = BackendConfig {
            kind,
            endpoint,
            guidance_scale: self.guidance,
            steps: self.steps,
            jitter_px: self.jitter,
            seed,
            timeout_ms: self.timeout_ms,
            max_inflight: self.max_inflight,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value = "paste", value_parser = ["paste", "repaint"])]
    pub mode: String,
    #[arg(long, default_value = "given", value_parser = ["given", "random", "top", "bottom"])]
    pub order: String,
}

impl EngineArgs {
    pub fn mode(&self) -> Result<Mode, CliError> {
        Ok(self.mode.parse()?)
    }

    /// Order policy for one scene; random orders mix `seed` with the scene seed.
    pub fn order(&self, seed: u64, scene_seed: u64) -> Result<OrderPolicy, CliError> {
        let name = match self.order.as_str() {
            "top" => "top_to_bottom",
            "bottom" => "bottom_to_top",
            other => other,
        };
        let mixed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ scene_seed;
        Ok(OrderPolicy::parse(name, mixed)?)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every intermediate step under `<out>/traces/<id>/`.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Directory of `<id>.png` images to run the detector on.
    #[arg(long, conflicts_with = "detections", required_unless_present = "detections")]
    pub images: Option<PathBuf>,
    /// Detections JSONL to score instead of running the detector.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Pair every layout with another image's detections.
    #[arg(long)]
    pub shuffled: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Row label in the report table.
    #[arg(long, default_value = "run")]
    pub method: String,
    /// Where to write the detector's output when scoring images.
    #[arg(long)]
    pub write_detections: Option<PathBuf>,
    /// Report JSONL, one entry per manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Plain-text table destination; printed to stdout regardless.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportTrainingArgs {
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.3)]
    pub fg_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Idle seconds before a session is evicted.
    #[arg(long, default_value_t = 3600)]
    pub ttl_secs: u64,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateBench(a) => commands::generate_bench(&a),
        Command::RenderGt(a) => commands::render_gt(&a),
        Command::Run(a) => commands::run(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Report(a) => commands::report(&a),
        Command::ExportTraining(a) => commands::export_training(&a),
        Command::Serve(a) => commands::serve(&a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! `panostitch` command-line interface.
//!
//! Exit status: 0 on success, 1 for usage and configuration errors, 2 for
//! backend and runtime failures.

mod eval;
mod generate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panostitch::caption::{prepare_caption, CaptionRule, DEFAULT_TRIGGER};
use panostitch::sampler::RunManifest;
use panostitch::tensor::ptsr::read_raw;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Converts an error to a runtime failure with context.
pub fn runtime<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Runtime(anyhow::anyhow!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "panostitch",
    version,
    about = "Seamless 360-degree panorama sampling with tiled diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one sampling job and write J0, Jsyn and a manifest.
    Generate(generate::GenerateArgs),
    /// Sweep one parameter and report seam statistics per value.
    Ablate(generate::AblateArgs),
    /// Evaluation tools: patch cropping, embeddings and metrics.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Clean a caption file (one caption per line) and prepend the trigger.
    PrepCaptions(PrepCaptionsArgs),
    /// Summarize a PTSR tensor or a run manifest.
    Inspect { path: PathBuf },
}

#[derive(Debug, clap::Args)]
struct PrepCaptionsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "out")]
    output: PathBuf,
    /// Comma-separated substrings to remove.
    #[arg(long, value_delimiter = ',')]
    blocklist: Option<Vec<String>>,
    #[arg(long, default_value = DEFAULT_TRIGGER)]
    trigger: String,
}

fn prep_captions(args: PrepCaptionsArgs) -> CliResult<()> {
    let blocklist = args
        .blocklist
        .unwrap_or_else(|| CaptionRule::default().blocklist().to_vec());
    let rule = CaptionRule::new(args.trigger, blocklist).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = std::fs::read_to_string(&args.input).map_err(runtime("reading captions"))?;
    let out: String = text.lines().map(|l| prepare_caption(l, &rule) + "\n").collect();
    std::fs::write(&args.output, out).map_err(runtime("writing captions"))?;
    eprintln!("prepared {} captions", text.lines().count());
    Ok(())
}

fn inspect(path: PathBuf) -> CliResult<()> {
    if path.extension().is_some_and(|e| e == "json") {
        let manifest = RunManifest::load(&path).map_err(runtime("reading manifest"))?;
        let c = &manifest.config;
        let summary = serde_json::json!({
            "kind": "manifest",
            "backend": manifest.backend,
            "mode": c.mode,
            "seed": manifest.seed,
            "rng": manifest.rng,
            "shape": [c.height, c.canvas_width, c.channels],
            "steps": c.steps,
            "total_seconds": manifest.total_seconds,
            "outputs": manifest.outputs,
        });
        println!("{}", serde_json::to_string_pretty(&summary).unwrap());
        return Ok(());
    }
    let raw = read_raw(&path).map_err(runtime("reading tensor"))?;
    let n = raw.data.len().max(1) as f64;
    let mean = raw.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = raw.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let min = raw.data.iter().copied().fold(f32::INFINITY, f32::min);
    let max = raw.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let summary = serde_json::json!({
        "kind": "tensor",
        "dims": raw.dims,
        "len": raw.data.len(),
        "min": min,
        "max": max,
        "mean": mean,
        "std": var.sqrt(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(args) => generate::generate(args),
        Command::Ablate(args) => generate::ablate(args),
        Command::Eval(cmd) => eval::run(cmd),
        Command::PrepCaptions(args) => prep_captions(args),
        Command::Inspect { path } => inspect(path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

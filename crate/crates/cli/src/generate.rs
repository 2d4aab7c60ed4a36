use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use panostitch::backends::{self, BackendConfig};
use panostitch::caption::{prepare_caption, CaptionRule, DEFAULT_TRIGGER};
use panostitch::evalkit::seam_stats;
use panostitch::sampler::{run, Conditioning, Mode, RunManifest, RunOutput, SamplerConfig, SamplerError};
use panostitch::tensor::{export_image, write_tensor, Canvas, ValueRange};
use panostitch::tiling::{ConcatOrder, OrderMode};

use crate::{runtime, usage, CliError, CliResult};

const PIXEL_SCALE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Multi,
    Stitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderArg {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcatArg {
    RightmostFirst,
    LeftmostFirst,
}

/// Settings shared by `generate` and `ablate`. Every field may also come
/// from the `--config` JSON file (snake_case keys); flags take precedence.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Text prompt; the trigger phrase is prepended unless --no-trigger.
    #[arg(long)]
    pub prompt: Option<String>,
    /// Pre-registered backend embedding id to send with every request.
    #[arg(long)]
    pub embedding_id: Option<String>,
    /// Trigger phrase prepended to the prompt.
    #[arg(long)]
    pub trigger: Option<String>,
    /// Send the prompt as given, without the trigger phrase.
    #[arg(long)]
    #[serde(skip)]
    pub no_trigger: bool,
    /// Panorama height H in cells (latent cells, or pixels with --pixel-space).
    #[arg(long)]
    pub height: Option<usize>,
    /// Window width W (default 2H).
    #[arg(long)]
    pub window_width: Option<usize>,
    /// Horizontal stride between windows (default H/4).
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Number of stitch-block passes per step (K).
    #[arg(long)]
    pub stitch_passes: Option<usize>,
    #[arg(long, value_enum)]
    pub stitch_order: Option<OrderArg>,
    #[arg(long, value_enum)]
    pub concat_order: Option<ConcatArg>,
    #[arg(long)]
    pub periodic_init: Option<bool>,
    #[arg(long)]
    pub enforce_periodicity: Option<bool>,
    /// `mock:identity`, `mock:constant=V`, `mock:blur[=R]`, `mock:noise` or an http(s) URL.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub max_inflight: Option<usize>,
    /// Remote request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Remote retry count for transient failures.
    #[arg(long)]
    pub retries: Option<u32>,
    /// Scale default geometry by 8 for pixel-space mock experiments (H=512).
    #[arg(long)]
    #[serde(skip)]
    pub pixel_space: bool,
    /// Also write jsyn.png (1 or 3 channels, values mapped from [-1, 1]).
    #[arg(long)]
    #[serde(skip)]
    pub png: bool,
    /// JSON file supplying any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub options: RunOptions,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Re-run the job recorded in a manifest; other options are ignored.
    #[arg(long, conflicts_with = "config")]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblateParam {
    Stride,
    StitchPasses,
    StitchOrder,
    TriggerWord,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub options: RunOptions,
    #[arg(long, value_enum)]
    pub param: AblateParam,
    /// Comma-separated values; for trigger-word, `none` disables the trigger.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// A fully resolved job.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: SamplerConfig,
    pub conditioning: Conditioning,
    pub backend: String,
    pub remote: BackendConfig,
    pub png: bool,
}

fn merge(flags: RunOptions) -> CliResult<RunOptions> {
    let Some(path) = &flags.config else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let file: RunOptions =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    macro_rules! pick {
        ($($f:ident),*) => {
            RunOptions { $($f: flags.$f.clone().or(file.$f),)* ..flags.clone() }
        };
    }
    Ok(pick!(
        prompt,
        embedding_id,
        trigger,
        height,
        window_width,
        stride,
        channels,
        steps,
        seed,
        mode,
        stitch_passes,
        stitch_order,
        concat_order,
        periodic_init,
        enforce_periodicity,
        backend,
        max_inflight,
        timeout,
        retries
    ))
}

fn conditioning(prompt: &str, trigger: Option<&str>, embedding_id: Option<String>) -> CliResult<Conditioning> {
    let text = match trigger {
        Some(t) => {
            let rule = CaptionRule::new(t, CaptionRule::default().blocklist().to_vec())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            prepare_caption(prompt, &rule)
        }
        None => prompt.trim().to_string(),
    };
    let prompt = (!text.is_empty()).then_some(text);
    Conditioning::new(prompt, embedding_id).ok_or_else(|| CliError::Usage("need a prompt or an embedding id".into()))
}

pub fn resolve(flags: RunOptions) -> CliResult<Job> {
    let o = merge(flags)?;
    let scale = if o.pixel_space { PIXEL_SCALE } else { 1 };
    let height = o.height.unwrap_or(64 * scale);
    let window_width = o.window_width.unwrap_or(2 * height);
    let mut config = SamplerConfig::for_height(height, o.stride.unwrap_or((height / 4).max(1)));
    config.window_width = window_width;
    config.canvas_width = 2 * height + window_width;
    config.channels = o.channels.unwrap_or(if o.pixel_space { 3 } else { 4 });
    config.steps = o.steps.unwrap_or(config.steps);
    config.seed = o.seed.unwrap_or(config.seed);
    config.mode = match o.mode.unwrap_or(ModeArg::Stitch) {
        ModeArg::Multi => Mode::MultiDiffusion,
        ModeArg::Stitch => Mode::StitchDiffusion,
    };
    config.stitch_passes = o.stitch_passes.unwrap_or(config.stitch_passes);
    config.stitch_order = match o.stitch_order.unwrap_or(OrderArg::Pre) {
        OrderArg::Pre => OrderMode::Pre,
        OrderArg::Post => OrderMode::Post,
    };
    config.concat_order = match o.concat_order.unwrap_or(ConcatArg::RightmostFirst) {
        ConcatArg::RightmostFirst => ConcatOrder::RightmostFirst,
        ConcatArg::LeftmostFirst => ConcatOrder::LeftmostFirst,
    };
    config.periodic_init = o.periodic_init.unwrap_or(config.periodic_init);
    config.enforce_periodicity = o.enforce_periodicity.unwrap_or(config.enforce_periodicity);
    config.max_inflight = o.max_inflight.unwrap_or(config.max_inflight);

    let Some(backend) = o.backend.clone() else {
        return usage("no backend given (use --backend or the config file)");
    };
    let mut remote = BackendConfig::new(backend.clone());
    remote.max_inflight = config.max_inflight;
    if let Some(t) = o.timeout {
        remote.timeout =
            Duration::try_from_secs_f64(t).map_err(|e| CliError::Usage(format!("bad timeout {t}: {e}")))?;
    }
    if let Some(r) = o.retries {
        remote.retries = r;
    }
    let trigger = if o.no_trigger {
        None
    } else {
        Some(o.trigger.clone().unwrap_or_else(|| DEFAULT_TRIGGER.to_string()))
    };
    let conditioning = conditioning(
        o.prompt.as_deref().unwrap_or(""),
        trigger.as_deref(),
        o.embedding_id.clone(),
    )?;
    if o.png && !matches!(config.channels, 1 | 3) {
        return usage(format!("--png needs 1 or 3 channels, run has {}", config.channels));
    }
    let job = Job {
        config,
        conditioning,
        backend,
        remote,
        png: o.png,
    };
    validate(&job)?;
    Ok(job)
}

fn validate(job: &Job) -> CliResult<()> {
    job.config.validate().map_err(|e| CliError::Usage(e.to_string()))
}

fn sampler_error(e: SamplerError) -> CliError {
    match e {
        SamplerError::Config(_) | SamplerError::Tiling(_) => CliError::Usage(e.to_string()),
        other => CliError::Runtime(anyhow::Error::new(other).context("sampling failed")),
    }
}

/// Runs a job and writes `j0.ptsr`, `jsyn.ptsr`, `manifest.json` (and
/// `jsyn.png` when requested) into `out`.
pub fn execute(job: &Job, out: &Path) -> CliResult<RunOutput> {
    let denoiser = backends::open(&job.backend, job.config.steps, Some(job.remote.clone())).map_err(|e| match e {
        panostitch::sampler::DenoiseError::Config(msg) => CliError::Usage(msg),
        other => CliError::Runtime(anyhow::Error::new(other).context("opening backend")),
    })?;
    let output = run(&job.config, denoiser.as_ref(), &job.conditioning).map_err(sampler_error)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(CliError::Runtime)?;
    let j0 = out.join("j0.ptsr");
    let jsyn = out.join("jsyn.ptsr");
    write_tensor(&output.canvas, &j0).map_err(runtime("writing j0"))?;
    write_tensor(&output.panorama, &jsyn).map_err(runtime("writing jsyn"))?;
    let mut manifest = RunManifest::new(&job.config, job.backend.clone(), &job.conditioning, &output)
        .with_output("j0", "j0.ptsr")
        .with_output("jsyn", "jsyn.ptsr");
    if job.png {
        export_image(&output.panorama, out.join("jsyn.png"), ValueRange::default()).map_err(runtime("writing png"))?;
        manifest = manifest.with_output("png", "jsyn.png");
    }
    manifest
        .save(out.join("manifest.json"))
        .map_err(runtime("writing manifest"))?;
    Ok(output)
}

pub fn generate(args: GenerateArgs) -> CliResult<()> {
    let job = match &args.replay {
        Some(path) => {
            let m =
                RunManifest::load(path).map_err(|e| CliError::Usage(format!("manifest {}: {e}", path.display())))?;
            let mut remote = BackendConfig::new(m.backend.clone());
            remote.max_inflight = m.config.max_inflight;
            let job = Job {
                config: m.config,
                conditioning: m.conditioning,
                backend: m.backend,
                remote,
                png: m.outputs.contains_key("png"),
            };
            validate(&job)?;
            job
        }
        None => resolve(args.options)?,
    };
    let output = execute(&job, &args.out)?;
    let seam = seam_stats(&output.panorama).map_err(runtime("seam metric"))?;
    eprintln!(
        "wrote {} ({}x{}x{} panorama, seam ratio {:.4}, {:.2}s)",
        args.out.display(),
        output.panorama.height(),
        output.panorama.width(),
        output.panorama.channels(),
        seam.ratio,
        output.step_seconds.iter().sum::<f64>()
    );
    Ok(())
}

/// One row of the ablation report.
#[derive(Debug, Serialize)]
struct AblationRow {
    value: String,
    dir: String,
    seam_ratio: f64,
    d_wrap: f64,
    d_interior: f64,
    /// Mean absolute difference between the two `2H`-wide halves of J0.
    half_consistency: Option<f64>,
    seconds: f64,
}

fn half_consistency(canvas: &Canvas, period: usize) -> Option<f64> {
    if canvas.width() < 2 * period {
        return None;
    }
    let a = canvas.columns(0, period).ok()?;
    let b = canvas.columns(period, period).ok()?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).sum();
    Some(sum / a.data().len() as f64)
}

fn parse_value<T: std::str::FromStr>(param: &str, v: &str) -> CliResult<T> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad {param} value `{v}`")))
}

fn ablation_job(base: &Job, options: &RunOptions, param: AblateParam, value: &str) -> CliResult<Job> {
    let mut job = base.clone();
    match param {
        AblateParam::Stride => job.config.stride = parse_value("stride", value)?,
        AblateParam::StitchPasses => {
            job.config.stitch_passes = parse_value("stitch-passes", value)?;
            if job.config.stitch_passes == 0 {
                job.config.mode = Mode::MultiDiffusion;
            }
        }
        AblateParam::StitchOrder => {
            job.config.stitch_order = match value.trim() {
                "pre" => OrderMode::Pre,
                "post" => OrderMode::Post,
                other => return usage(format!("bad stitch-order value `{other}` (pre|post)")),
            }
        }
        AblateParam::TriggerWord => {
            let trigger = (value.trim() != "none").then_some(value.trim());
            job.conditioning = conditioning(
                options.prompt.as_deref().unwrap_or(""),
                trigger,
                options.embedding_id.clone(),
            )?;
        }
    }
    validate(&job)?;
    Ok(job)
}

fn dir_name(param: AblateParam, value: &str) -> String {
    let name = param
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    let clean: String = value
        .trim()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{name}-{clean}")
}

pub fn ablate(args: AblateArgs) -> CliResult<()> {
    let options = merge(args.options.clone())?;
    let base = resolve(args.options)?;
    // resolve every value up front so a bad value fails before any run
    let jobs = args
        .values
        .iter()
        .map(|v| Ok((v.clone(), ablation_job(&base, &options, args.param, v)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (value, job) in &jobs {
        let dir = dir_name(args.param, value);
        let output = execute(job, &args.out.join(&dir))?;
        let seam = seam_stats(&output.panorama).map_err(runtime("seam metric"))?;
        let row = AblationRow {
            value: value.clone(),
            dir,
            seam_ratio: seam.ratio,
            d_wrap: seam.d_wrap,
            d_interior: seam.d_interior,
            half_consistency: half_consistency(&output.canvas, job.config.period()),
            seconds: output.step_seconds.iter().sum(),
        };
        println!(
            "{:>24}  seam_ratio {:>9.4}  half_consistency {:>9}  {:.2}s",
            row.value,
            row.seam_ratio,
            row.half_consistency.map_or("-".into(), |v| format!("{v:.4}")),
            row.seconds
        );
        rows.push(row);
    }
    let report = serde_json::json!({
        "param": dir_name(args.param, "").trim_end_matches('-'),
        "rows": rows,
    });
    std::fs::create_dir_all(&args.out).map_err(runtime("creating output directory"))?;
    std::fs::write(
        args.out.join("ablation.json"),
        serde_json::to_string_pretty(&report).unwrap(),
    )
    .map_err(runtime("writing ablation report"))?;
    Ok(())
}

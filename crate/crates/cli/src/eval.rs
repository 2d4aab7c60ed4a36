use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};

use panostitch::backends::{BackendConfig, RemoteDenoiser};
use panostitch::evalkit::{
    clip_score, crop_patches, fid, load_locations, sample_locations, save_locations, seam_stats, EmbeddingSet,
    EvalReport,
};
use panostitch::tensor::ptsr::{read_raw, write_raw};
use panostitch::tensor::{read_tensor, Canvas, RawTensor, Rng};

use crate::{runtime, usage, CliError, CliResult};

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Mean cosine similarity between paired embedding rows.
    ClipScore(PairArgs),
    /// Frechet distance between two embedding sets.
    Fid(PairArgs),
    /// Wraparound discontinuity of a panorama relative to its interior.
    Seam {
        #[arg(long)]
        input: PathBuf,
    },
    /// Crop square patches from a set of panoramas.
    Crop(CropArgs),
    /// Embed a patch stack through a model server.
    Embed(EmbedArgs),
    /// Aggregate repeated runs into a report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Rank-2 PTSR embeddings of generated images.
    #[arg(long)]
    pub gen: PathBuf,
    /// Rank-2 PTSR embeddings of reference images (or prompts for CLIP score).
    #[arg(long)]
    pub real: PathBuf,
}

#[derive(Debug, Args)]
pub struct CropArgs {
    /// Comma-separated PTSR panoramas.
    #[arg(long, value_delimiter = ',', required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Locations file; written after sampling, or read with --reuse.
    #[arg(long)]
    pub locations: PathBuf,
    /// Crop at the recorded locations instead of sampling new ones.
    #[arg(long)]
    pub reuse: bool,
    /// Rank-4 PTSR output `[count, size, size, channels]`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Rank-4 PTSR patch stack.
    #[arg(long)]
    pub patches: PathBuf,
    /// Model server URL.
    #[arg(long)]
    pub backend: String,
    #[arg(long, default_value_t = 4)]
    pub max_inflight: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Comma-separated generated-patch embeddings, one file per repeat.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gen: Vec<PathBuf>,
    /// Reference embeddings shared by every repeat.
    #[arg(long)]
    pub real: PathBuf,
    /// Comma-separated text embeddings paired row-wise with each --gen file
    /// for CLIP score; defaults to --real.
    #[arg(long, value_delimiter = ',')]
    pub text: Vec<PathBuf>,
    /// Comma-separated panoramas, one per repeat, for the seam ratio.
    #[arg(long, value_delimiter = ',')]
    pub panoramas: Vec<PathBuf>,
    /// Name of the embedding network, recorded in the report.
    #[arg(long)]
    pub embedding_source: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_embeddings(path: &Path) -> CliResult<EmbeddingSet> {
    let raw = read_raw(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    EmbeddingSet::from_raw(&raw).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_canvas(path: &Path) -> CliResult<Canvas> {
    read_tensor(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn print_json(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).unwrap());
}

fn stack(patches: &[Canvas]) -> CliResult<RawTensor> {
    let Some(first) = patches.first() else {
        return usage("no patches to write");
    };
    let (h, w, c) = first.shape();
    let mut data = Vec::with_capacity(patches.len() * h * w * c);
    for p in patches {
        data.extend_from_slice(p.data());
    }
    RawTensor::new(vec![patches.len(), h, w, c], data).map_err(runtime("stacking patches"))
}

fn unstack(raw: RawTensor) -> CliResult<Vec<Canvas>> {
    let [n, h, w, c] = raw.dims[..] else {
        return usage(format!("patch file must be rank 4, found rank {}", raw.dims.len()));
    };
    let cell = h * w * c;
    (0..n)
        .map(|i| {
            Canvas::new(h, w, c, raw.data[i * cell..(i + 1) * cell].to_vec())
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn crop(args: CropArgs) -> CliResult<()> {
    let images = args
        .images
        .iter()
        .map(|p| load_canvas(p))
        .collect::<CliResult<Vec<_>>>()?;
    let locations = if args.reuse {
        load_locations(&args.locations).map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        let dims: Vec<_> = images.iter().map(|c| (c.height(), c.width())).collect();
        let locs = sample_locations(&dims, args.count, args.size, &mut Rng::new(args.seed))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        save_locations(&locs, &args.locations).map_err(runtime("writing locations"))?;
        locs
    };
    let patches = crop_patches(&images, &locations).map_err(|e| CliError::Usage(e.to_string()))?;
    write_raw(&stack(&patches)?, &args.out).map_err(runtime("writing patches"))?;
    eprintln!("wrote {} patches to {}", patches.len(), args.out.display());
    Ok(())
}

fn embed(args: EmbedArgs) -> CliResult<()> {
    let raw = read_raw(&args.patches).map_err(|e| CliError::Usage(format!("{}: {e}", args.patches.display())))?;
    let patches = unstack(raw)?;
    let mut config = BackendConfig::new(args.backend);
    config.max_inflight = args.max_inflight;
    let server = RemoteDenoiser::connect(config).map_err(runtime("connecting to backend"))?;
    let rows = patches
        .iter()
        .map(|p| server.embed_image(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime("embedding patches"))?;
    let set = EmbeddingSet::from_rows(&rows).map_err(runtime("embedding set"))?;
    write_raw(&set.to_raw(), &args.out).map_err(runtime("writing embeddings"))?;
    Ok(())
}

fn report(args: ReportArgs) -> CliResult<()> {
    let real = load_embeddings(&args.real)?;
    if !args.text.is_empty() && args.text.len() != args.gen.len() {
        return usage(format!(
            "{} --text files for {} --gen files",
            args.text.len(),
            args.gen.len()
        ));
    }
    let mut clip = Vec::new();
    let mut dist = Vec::new();
    for (i, path) in args.gen.iter().enumerate() {
        let gen = load_embeddings(path)?;
        let text = match args.text.get(i) {
            Some(p) => load_embeddings(p)?,
            None => real.clone(),
        };
        clip.push(clip_score(&gen, &text).map_err(runtime("clip score"))?);
        dist.push(fid(&gen, &real).map_err(runtime("fid"))?);
    }
    let seams = args
        .panoramas
        .iter()
        .map(|p| Ok(seam_stats(&load_canvas(p)?).map_err(runtime("seam metric"))?.ratio))
        .collect::<CliResult<Vec<_>>>()?;
    let report = EvalReport::from_runs(&clip, &dist, &seams, args.embedding_source)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    report.save(&args.out).map_err(runtime("writing report"))?;
    print_json(serde_json::to_value(&report).unwrap());
    Ok(())
}

pub fn run(cmd: EvalCommand) -> CliResult<()> {
    match cmd {
        EvalCommand::ClipScore(p) => {
            let score =
                clip_score(&load_embeddings(&p.gen)?, &load_embeddings(&p.real)?).map_err(runtime("clip score"))?;
            print_json(serde_json::json!({ "clip_score": score }));
        }
        EvalCommand::Fid(p) => {
            let d = fid(&load_embeddings(&p.gen)?, &load_embeddings(&p.real)?).map_err(runtime("fid"))?;
            print_json(serde_json::json!({ "fid": d }));
        }
        EvalCommand::Seam { input } => {
            let s = seam_stats(&load_canvas(&input)?).map_err(|e| CliError::Usage(e.to_string()))?;
            print_json(serde_json::to_value(s).unwrap());
        }
        EvalCommand::Crop(a) => crop(a)?,
        EvalCommand::Embed(a) => embed(a)?,
        EvalCommand::Report(a) => report(a)?,
    }
    Ok(())
}

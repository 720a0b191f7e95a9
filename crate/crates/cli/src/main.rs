use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ctreduce::config::{split_override, CorpusSpec, PipelineConfig};
use ctreduce::kds::Strategy;
use ctreduce::metrics::{read_predictions, ScoreReport};
use ctreduce::pipeline::{self, IMAGE_DIR, LABELS_FILE};

/// Spatial and slice redundancy reduction for CT scan corpora.
#[derive(Parser)]
#[command(name = "ctreduce", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crop, window and sample every scan of a corpus.
    Reduce(ReduceArgs),
    /// Write a synthetic corpus with ground truth.
    GenCorpus(GenArgs),
    /// Per-class and macro F1 of a `scan_id,label,prediction` CSV.
    Score { predictions: PathBuf },
}

#[derive(clap::Args)]
struct ReduceArgs {
    /// Directory holding one sub-directory of slices per scan.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Key/value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set slice.alpha=0.8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Slices to sample per scan.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the cropped, resized sampled slices under `<out>/images`.
    #[arg(long)]
    export_images: bool,
    /// `scan_id,label` CSV grouping the report. Defaults to the corpus
    /// `labels.csv` when present.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Key/value corpus spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override a spec key, e.g. `--set num_scans=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn reduce_config(args: &ReduceArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&read_text(path)?)
            .with_context(|| format!("in {}", path.display()))?;
    }
    for o in &args.overrides {
        let (k, v) = split_override(o)?;
        cfg.set(k, v)?;
    }
    if let Some(s) = args.strategy {
        cfg.strategy = s;
    }
    if let Some(m) = args.samples {
        cfg.kds.num_samples = m;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        cfg.parallelism = jobs;
    }
    cfg.export_images |= args.export_images;
    cfg.validate()?;
    Ok(cfg)
}

fn reduce(args: ReduceArgs) -> Result<ExitCode> {
    let cfg = reduce_config(&args)?;
    let labels_path = args
        .labels
        .clone()
        .or_else(|| Some(args.corpus.join(LABELS_FILE)).filter(|p| p.is_file()));
    let labels = labels_path
        .as_deref()
        .map(pipeline::read_labels)
        .transpose()?;
    let image_dir = cfg.export_images.then(|| args.out.join(IMAGE_DIR));
    let outcome =
        pipeline::run_pipeline(&args.corpus, &cfg, labels.as_ref(), image_dir.as_deref())?;
    pipeline::write_outcome(&args.out, &outcome)?;
    print!("{}", outcome.report.render());
    let s = &outcome.summary;
    log::info!("{} of {} scans reduced", s.scans_ok, s.scans_total);
    Ok(if s.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "{} of {} scans failed; see summary.json",
            s.failures.len(),
            s.scans_total
        );
        ExitCode::from(1)
    })
}

fn gen_corpus(args: GenArgs) -> Result<ExitCode> {
    let mut spec = match &args.spec {
        Some(path) => CorpusSpec::from_text(&read_text(path)?)
            .with_context(|| format!("in {}", path.display()))?,
        None => CorpusSpec::default(),
    };
    for o in &args.overrides {
        let (k, v) = split_override(o)?;
        spec.set(k, v)?;
    }
    spec.scan.validate()?;
    let truths = pipeline::generate_corpus(&spec, &args.out)?;
    println!("wrote {} scans to {}", truths.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn score(path: &Path) -> Result<ExitCode> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let preds = read_predictions(file).with_context(|| format!("in {}", path.display()))?;
    print!("{}", ScoreReport::from_predictions(&preds)?.render());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reduce(args) => reduce(args),
        Command::GenCorpus(args) => gen_corpus(args),
        Command::Score { predictions } => score(&predictions),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

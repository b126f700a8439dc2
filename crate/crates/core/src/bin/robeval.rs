use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use robeval::bench::{aggregate_summaries, parse_report, render_aggregate, render_summary};
use robeval::datamodel::{DEFAULT_ACCEPT_RATE, DEFAULT_GEN_GAMMA, DEFAULT_LEGACY_TPR};
use robeval::fixture::{write_fixture, FixtureConfig};
use robeval::imagegen::{generate_dataset, BlobParams, GenerateOptions, Source};
use robeval::{
    calibrate, evaluate, load_manifest, render_report, DataType, Error, EvalConfig, GeneratorKind, Pooling,
    ReportFormat, ScoreMethod, Shape,
};

#[derive(Parser)]
#[command(
    name = "robeval",
    version,
    about = "Comprehensive robustness benchmark with a single rejection threshold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate on clean data and report per-type DAR and its mean.
    Evaluate(EvaluateArgs),
    /// Print the rejection threshold fitted on the calibration set.
    Calibrate(CalibrateArgs),
    /// Generate an unrecognisable-image dataset.
    Generate(GenerateArgs),
    /// Write a complete synthetic benchmark (logits and manifest).
    SynthFixture(FixtureArgs),
    /// Render saved reports or aggregate them across trials.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Msp,
    Mls,
    Energy,
    Gen,
}

impl From<ScoreArg> for ScoreMethod {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Msp => ScoreMethod::Msp,
            ScoreArg::Mls => ScoreMethod::Mls,
            ScoreArg::Energy => ScoreMethod::Energy,
            ScoreArg::Gen => ScoreMethod::Gen,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolingArg {
    Pooled,
    Macro,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Phase,
    Scramble,
    Blobs,
    Uniform,
}

impl From<KindArg> for GeneratorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Phase => GeneratorKind::Phase,
            KindArg::Scramble => GeneratorKind::Scramble,
            KindArg::Blobs => GeneratorKind::Blobs,
            KindArg::Uniform => GeneratorKind::Uniform,
        }
    }
}

#[derive(Args)]
struct ScoreOpts {
    /// Confidence score used for rejection.
    #[arg(long, value_enum, default_value = "msp")]
    score: ScoreArg,
    /// Fraction of correctly classified clean samples to accept.
    #[arg(long, default_value_t = DEFAULT_ACCEPT_RATE)]
    accept_rate: f64,
    /// GEN exponent.
    #[arg(long, default_value_t = DEFAULT_GEN_GAMMA)]
    gen_gamma: f64,
    /// GEN top-M (default min(C, 100)).
    #[arg(long)]
    gen_top_m: Option<usize>,
}

impl ScoreOpts {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            score_method: self.score.into(),
            accept_rate: self.accept_rate,
            gen_gamma: self.gen_gamma,
            gen_top_m: self.gen_top_m,
            ..EvalConfig::default()
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    manifest: PathBuf,
    #[command(flatten)]
    score: ScoreOpts,
    /// Pool samples per type, or average per-dataset DARs within a type.
    #[arg(long, value_enum, default_value = "pooled")]
    pooling: PoolingArg,
    /// Also compute plain accuracy, AUROC, AUPR and FPR@TPR.
    #[arg(long)]
    legacy: bool,
    /// TPR for the legacy FPR metric.
    #[arg(long, default_value_t = DEFAULT_LEGACY_TPR)]
    legacy_tpr: f64,
    /// Report over the data types present instead of failing on missing ones.
    #[arg(long)]
    allow_partial: bool,
    /// Write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report file format (default: from the --out extension, else csv).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct CalibrateArgs {
    manifest: PathBuf,
    #[command(flatten)]
    score: ScoreOpts,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Source image directory (phase, scramble).
    #[arg(long)]
    src: Option<PathBuf>,
    /// Output shape HxWxC (blobs, uniform; resize target for phase, scramble).
    #[arg(long)]
    shape: Option<String>,
    /// Number of images (blobs, uniform).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Draw an independent phase field for each channel.
    #[arg(long)]
    per_channel_phase: bool,
    #[arg(long, default_value_t = BlobParams::default().fill_probability)]
    blob_p: f64,
    #[arg(long, default_value_t = BlobParams::default().sigma)]
    blob_sigma: f64,
    #[arg(long, default_value_t = BlobParams::default().zero_below)]
    blob_threshold: f64,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per dataset.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    n_clean: Option<usize>,
    #[arg(long)]
    n_corrupt: Option<usize>,
    #[arg(long)]
    n_adversarial: Option<usize>,
    #[arg(long)]
    n_novel: Option<usize>,
    #[arg(long)]
    n_unrecognisable: Option<usize>,
    /// Held-out cluster centres used for the novel set.
    #[arg(long, default_value_t = 5)]
    n_train_free: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Mean and sample std across the reports (trials).
    #[arg(long)]
    aggregate: bool,
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn format_for(path: Option<&Path>, explicit: Option<FormatArg>) -> ReportFormat {
    if let Some(f) = explicit {
        return f.into();
    }
    match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("md") => ReportFormat::Markdown,
        Some("json") => ReportFormat::Json,
        _ => ReportFormat::Csv,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let manifest = load_manifest(&args.manifest)?;
    let config = EvalConfig {
        pooling: match args.pooling {
            PoolingArg::Pooled => Pooling::Pooled,
            PoolingArg::Macro => Pooling::MacroPerDataset,
        },
        legacy: args.legacy,
        legacy_tpr: args.legacy_tpr,
        allow_partial: args.allow_partial,
        ..args.score.config()
    };
    let report = evaluate(&manifest, &config)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", render_report(&report, ReportFormat::Markdown));
    if let Some(out) = &args.out {
        write_file(out, &render_report(&report, format_for(Some(out), args.format)))?;
    }
    Ok(())
}

fn run_calibrate(args: CalibrateArgs) -> Result<(), Error> {
    let manifest = load_manifest(&args.manifest)?;
    let config = args.score.config();
    let t = calibrate(&manifest, &config)?;
    println!("score: {}", config.score_method);
    println!("threshold: {}", t.value);
    println!("accept_rate_target: {}", t.accept_rate_target);
    println!("achieved_accept_rate: {}", t.achieved_accept_rate);
    println!("n_calibration: {}", t.n_calibration);
    Ok(())
}

fn run_generate(args: GenerateArgs) -> Result<(), Error> {
    let kind: GeneratorKind = args.kind.into();
    let shape = args.shape.as_deref().map(str::parse::<Shape>).transpose()?;
    let source = if kind.needs_source() {
        let path = args
            .src
            .ok_or_else(|| Error::InvalidArgument(format!("--src is required for {kind}")))?;
        if args.count.is_some() {
            return Err(Error::InvalidArgument(format!(
                "--count does not apply to {kind}; one image is written per source image"
            )));
        }
        Source::Directory { path, target: shape }
    } else {
        if args.src.is_some() {
            return Err(Error::InvalidArgument(format!("--src does not apply to {kind}")));
        }
        Source::Synthetic {
            shape: shape.ok_or_else(|| Error::InvalidArgument(format!("--shape is required for {kind}")))?,
            count: args
                .count
                .ok_or_else(|| Error::InvalidArgument(format!("--count is required for {kind}")))?,
        }
    };
    let options = GenerateOptions {
        per_channel_phase: args.per_channel_phase,
        blobs: BlobParams {
            fill_probability: args.blob_p,
            sigma: args.blob_sigma,
            zero_below: args.blob_threshold,
        },
    };
    let fragment = generate_dataset(kind, &source, args.seed, &args.out, &options)?;
    println!(
        "wrote {} {} images to {}",
        fragment.generator.count,
        kind,
        args.out.display()
    );
    Ok(())
}

fn run_fixture(args: FixtureArgs) -> Result<(), Error> {
    let n = args.n;
    let config = FixtureConfig {
        seed: args.seed,
        num_classes: args.classes,
        dim: args.dim,
        novel_classes: args.n_train_free,
        samples: [
            args.n_clean.unwrap_or(n),
            args.n_corrupt.unwrap_or(n),
            args.n_adversarial.unwrap_or(n),
            args.n_novel.unwrap_or(n),
            args.n_unrecognisable.unwrap_or(n),
        ],
        ..FixtureConfig::default()
    };
    let fixture = write_fixture(&config, &args.out)?;
    for (ty, path, count) in &fixture.datasets {
        println!("{ty}: {count} samples -> {}", path.display());
    }
    let missing: Vec<&str> = DataType::ALL
        .iter()
        .filter(|t| !fixture.datasets.iter().any(|(d, _, _)| d == *t))
        .map(|t| t.as_str())
        .collect();
    if !missing.is_empty() {
        eprintln!("warning: no {} data; evaluate with --allow-partial", missing.join(", "));
    }
    println!("manifest: {}", fixture.manifest_path.display());
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), Error> {
    let summaries = args
        .reports
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            parse_report(&text).map_err(|e| Error::ReportParse(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let format = args.format.into();
    let text = if args.aggregate {
        render_aggregate(&aggregate_summaries(&summaries)?, format)
    } else {
        summaries
            .iter()
            .map(|s| render_summary(s, format))
            .collect::<Vec<_>>()
            .join("\n")
    };
    match &args.out {
        Some(out) => write_file(out, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(raw) = std::env::var("ROBEVAL_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("ROBEVAL_THREADS=`{raw}` is not a number")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Evaluate(a) => run_evaluate(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Generate(a) => run_generate(a),
        Command::SynthFixture(a) => run_fixture(a),
        Command::Report(a) => run_report(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

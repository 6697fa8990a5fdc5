use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mframe::bench::{self, BenchOptions, Grid};
use mframe::corpus::CorpusSpec;
use mframe::filters::{CovKind, FilterKind};
use mframe::pipeline::{enhance_stream, Enhanced, FailurePolicy, HighBandPolicy, PipelineConfig};
use mframe::wav::{read_wav, write_wav, WavEncoding};
use mframe::WeightSequence;

#[derive(Parser)]
#[command(name = "mframe", version, about = "Low-latency multi-frame speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance one noisy file.
    Enhance(EnhanceArgs),
    /// Enhance every row of a manifest and emit one JSON report line per row.
    Evaluate(EvaluateArgs),
    /// Sweep filter kinds and covariance parameterizations over a synthetic corpus.
    Bench(BenchArgs),
}

/// Pipeline settings shared by `enhance` and `evaluate`; flags override `--config`.
#[derive(Args, Clone)]
struct PipelineArgs {
    /// TOML file with PipelineConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// df, wf, mvdr-noisy or mvdr.
    #[arg(long)]
    filter: Option<FilterKind>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    lookahead: Option<usize>,
    /// direct, inverse, hermitian or hermitian-inverse.
    #[arg(long)]
    param: Option<CovKind>,
    /// passthrough or oracle-gain.
    #[arg(long)]
    high_band: Option<HighBandPolicy>,
    #[arg(long)]
    diag_loading: Option<f64>,
    /// Abort on the first singular covariance instead of passing the bin through.
    #[arg(long)]
    strict: bool,
    /// Timed repetitions for the reported RTF.
    #[arg(long)]
    rtf_runs: Option<usize>,
    /// Filter-weight file for the deep-filter path.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Write 16-bit PCM instead of 32-bit float.
    #[arg(long)]
    pcm16: bool,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_toml_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.filter {
            cfg.filter = v;
        }
        if let Some(v) = self.order {
            cfg.order = v;
        }
        if let Some(v) = self.lookahead {
            cfg.lookahead = v;
        }
        if let Some(v) = self.param {
            cfg.cov_kind = v;
        }
        if let Some(v) = self.high_band {
            cfg.high_band = v;
        }
        if let Some(v) = self.diag_loading {
            cfg.diag_loading = v;
        }
        if let Some(v) = self.rtf_runs {
            cfg.rtf_runs = v;
        }
        if self.strict {
            cfg.on_solve_failure = FailurePolicy::Abort;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn weights(&self) -> Result<Option<WeightSequence>> {
        self.weights
            .as_ref()
            .map(|p| WeightSequence::load(p).with_context(|| format!("reading {}", p.display())))
            .transpose()
    }

    fn encoding(&self) -> WavEncoding {
        if self.pcm16 {
            WavEncoding::Pcm16
        } else {
            WavEncoding::Float32
        }
    }
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    clean: Option<PathBuf>,
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Append the JSON report line to this file as well as stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Tab-separated rows: noisy, clean, noise. Relative paths resolve against the manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// JSONL output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for enhanced WAVs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "synthetic")]
    suite: String,
    /// default or full.
    #[arg(long, default_value = "default")]
    grid: Grid,
    /// Diagonal loading for Direct and Hermitian kinds.
    #[arg(long, default_value_t = 0.0)]
    diag_loading: f64,
    #[arg(long, default_value_t = 10)]
    clips: usize,
    #[arg(long, default_value_t = 5.0)]
    seconds: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_enhance(args: &EnhanceArgs) -> Result<()> {
    let cfg = args.pipeline.config()?;
    let fs = cfg.filterbank.sample_rate;
    let noisy = read_wav(&args.input, fs)?;
    let clean = args.clean.as_ref().map(|p| read_wav(p, fs)).transpose()?;
    let noise = args.noise.as_ref().map(|p| read_wav(p, fs)).transpose()?;
    let weights = args.pipeline.weights()?;
    let Enhanced { samples, mut report, .. } =
        enhance_stream(&noisy, clean.as_deref(), noise.as_deref(), &cfg, weights.as_ref())?;
    write_wav(&args.out, &samples, fs, args.pipeline.encoding())?;
    report.file = args.input.display().to_string();
    let line = report.to_json_line();
    println!("{line}");
    if let Some(path) = &args.report {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

struct ManifestRow {
    noisy: PathBuf,
    clean: Option<PathBuf>,
    noise: Option<PathBuf>,
}

fn parse_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |s: &str| -> Option<PathBuf> {
        let s = s.trim();
        (!s.is_empty() && s != "-").then(|| base.join(s))
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if i == 0 && cols[0].trim() == "noisy" {
            continue;
        }
        if cols.len() > 3 {
            bail!("{}:{}: expected at most 3 columns, found {}", path.display(), i + 1, cols.len());
        }
        rows.push(ManifestRow {
            noisy: resolve(cols[0]).with_context(|| format!("{}:{}: missing noisy path", path.display(), i + 1))?,
            clean: cols.get(1).and_then(|s| resolve(s)),
            noise: cols.get(2).and_then(|s| resolve(s)),
        });
    }
    Ok(rows)
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let cfg = args.pipeline.config()?;
    let fs = cfg.filterbank.sample_rate;
    let rows = parse_manifest(&args.manifest)?;
    let weights = args.pipeline.weights()?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    for row in &rows {
        let result = (|| -> Result<String> {
            let noisy = read_wav(&row.noisy, fs)?;
            let clean = row.clean.as_ref().map(|p| read_wav(p, fs)).transpose()?;
            let noise = row.noise.as_ref().map(|p| read_wav(p, fs)).transpose()?;
            let mut out = enhance_stream(&noisy, clean.as_deref(), noise.as_deref(), &cfg, weights.as_ref())?;
            if let Some(dir) = &args.out_dir {
                let stem = row.noisy.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
                write_wav(dir.join(format!("{stem}_enhanced.wav")), &out.samples, fs, args.pipeline.encoding())?;
            }
            out.report.file = row.noisy.display().to_string();
            Ok(out.report.to_json_line())
        })();
        match result {
            Ok(line) => {
                writeln!(sink, "{line}")?;
                sink.flush()?;
            }
            Err(e) => {
                sink.flush()?;
                return Err(e.context(format!("processing {}", row.noisy.display())));
            }
        }
    }
    sink.flush()?;
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    if args.suite != "synthetic" {
        bail!("unknown suite '{}' (only 'synthetic' is available)", args.suite);
    }
    let mut options = BenchOptions {
        grid: args.grid,
        corpus: CorpusSpec {
            clips: args.clips,
            seconds: args.seconds,
            ..Default::default()
        },
        ..Default::default()
    };
    if let Some(seed) = args.seed {
        options.corpus.seed = seed;
    }
    options.base.diag_loading = args.diag_loading;
    let rows = bench::run_bench(&options)?;
    for row in &rows {
        if let bench::RowOutcome::NotInvertible { clip, message } = &row.outcome {
            eprintln!("{}/{}: {message} ({clip})", row.filter, row.param.name());
        }
    }
    let csv = bench::to_csv(&rows);
    match &args.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Enhance(a) => run_enhance(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

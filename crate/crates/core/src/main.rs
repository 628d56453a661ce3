use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pnrkit::eval::{oscc_accuracy, pnr_report, Task};
use pnrkit::fusion::{fuse_oscc, fuse_pnr};
use pnrkit::ingest::{
    emit_annotations, emit_oscc_scores, emit_pnr_predictions, emit_scores, parse_annotations,
    parse_oscc_predictions, parse_oscc_scores, parse_pnr_predictions, parse_scores,
    pnr_count_stats, position_histogram, write_record, Dataset,
};
use pnrkit::localization::{
    baseline_center, baseline_fraction, localize_all, oracle_error, Fallback, SelectionConfig,
    DEFAULT_PRIOR_FRACTION, DEFAULT_THRESHOLD,
};
use pnrkit::model::{window_center_time, Clip};
use pnrkit::sampling::{dense_windows, WindowingConfig, DEFAULT_WINDOW_LEN};
use pnrkit::sim::{gen_dataset, simulate_oscc, simulate_scores, SimulationSpec};

const FORMATS: &str = "\
File formats (one JSON object per line):
  annotations   {\"clip_id\":\"a\",\"fps\":30.0,\"num_frames\":240,\"state_change\":true,\"pnr_frame\":103,\"other_pnr_frames\":[12,200]}
  PNR scores    {\"clip_id\":\"a\",\"start\":0,\"end\":32,\"confidence\":0.81}
  OSCC scores   {\"clip_id\":\"a\",\"prob\":0.73}
  predictions   {\"clip_id\":\"a\",\"time_sec\":3.4333333333333336,\"frame\":103,\"source\":\"selected\"}
  OSCC preds    {\"clip_id\":\"a\",\"state_change\":true}  (or an OSCC score record)";

/// Window sampling, PNR localization, score fusion and evaluation.
#[derive(Debug, Parser)]
#[command(name = "pnrkit", version, after_help = FORMATS)]
struct Cli {
    /// Seed for randomized steps (overrides the simulation config seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress human-readable summaries on stdout.
    #[arg(long, global = true)]
    quiet: bool,

    /// Output file; written atomically. Defaults to stdout where applicable.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Oscc,
    Pnr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FallbackArg {
    PriorPoint,
    ArgmaxConfidence,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineMode {
    Center,
    Fraction,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// PNR-per-clip statistics and the position histogram of positive/negative PNRs.
    #[command(after_help = FORMATS)]
    Stats {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Write histogram columns (bin_center, positive, negative) here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Print the dense window layout for one clip geometry.
    Windows {
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        fps: f64,
        #[arg(long = "n")]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW_LEN)]
        window: usize,
    },
    /// Select one PNR per clip from dense window scores.
    #[command(after_help = FORMATS)]
    Localize {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_PRIOR_FRACTION)]
        prior: f64,
        #[arg(long, value_enum, default_value_t = FallbackArg::PriorPoint)]
        fallback: FallbackArg,
    },
    /// Fixed-position predictions for every clip.
    #[command(after_help = FORMATS)]
    Baseline {
        #[arg(long, value_enum)]
        mode: BaselineMode,
        #[arg(long, default_value_t = DEFAULT_PRIOR_FRACTION)]
        fraction: f64,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Smallest error reachable by predicting dense window centers.
    ///
    /// Per-clip records go to --out; the mean is printed.
    Oracle {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long = "n")]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW_LEN)]
        window: usize,
    },
    /// Average several scorers' outputs into one score file.
    #[command(after_help = FORMATS)]
    Fuse {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, num_args = 1.., required = true)]
        scores: Vec<PathBuf>,
        /// Clip geometry; required for --task pnr.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    #[command(after_help = FORMATS)]
    Evaluate {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Write per-position error columns (bin_center, mean_error, count) here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Generate a synthetic dataset and simulated scorer outputs.
    ///
    /// Writes annotations.jsonl plus <scorer>.pnr.jsonl and <scorer>.oscc.jsonl
    /// for each scorer in the TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn load_annotations(path: &Path) -> Result<Dataset> {
    parse_annotations(open(path)?).with_context(|| format!("{}", path.display()))
}

/// Writes `bytes` to `path` via a temporary file in the same directory, so
/// readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit_to(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn to_json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

struct Ctx {
    seed: Option<u64>,
    quiet: bool,
    out: Option<PathBuf>,
}

impl Ctx {
    fn say(&self, text: &str) {
        if !self.quiet {
            print!("{text}");
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
        out: cli.out,
    };
    match cli.command {
        Command::Stats {
            annotations,
            bins,
            plot_data,
        } => stats(&ctx, &annotations, bins, plot_data.as_deref()),
        Command::Windows {
            frames,
            fps,
            count,
            window,
        } => windows(&ctx, frames, fps, count, window),
        Command::Localize {
            scores,
            annotations,
            threshold,
            prior,
            fallback,
        } => {
            let fallback = match fallback {
                FallbackArg::PriorPoint => Fallback::PriorPoint,
                FallbackArg::ArgmaxConfidence => Fallback::ArgmaxConfidence,
            };
            let cfg = SelectionConfig::new(threshold, prior, fallback)?;
            let ds = load_annotations(&annotations)?;
            let series =
                parse_scores(open(&scores)?).with_context(|| format!("{}", scores.display()))?;
            let preds = localize_all(&series, &ds, &cfg)?;
            let mut buf = Vec::new();
            emit_pnr_predictions(preds.values(), &mut buf)?;
            emit_to(ctx.out.as_deref(), &buf)
        }
        Command::Baseline {
            mode,
            fraction,
            annotations,
        } => {
            let ds = load_annotations(&annotations)?;
            let preds = ds
                .clips()
                .map(|clip| match mode {
                    BaselineMode::Center => Ok(baseline_center(clip)),
                    BaselineMode::Fraction => baseline_fraction(clip, fraction),
                })
                .collect::<pnrkit::Result<Vec<_>>>()?;
            let mut buf = Vec::new();
            emit_pnr_predictions(&preds, &mut buf)?;
            emit_to(ctx.out.as_deref(), &buf)
        }
        Command::Oracle {
            annotations,
            count,
            window,
        } => oracle(&ctx, &annotations, count, window),
        Command::Fuse {
            task,
            scores,
            annotations,
        } => fuse(&ctx, task, &scores, annotations.as_deref()),
        Command::Evaluate {
            task,
            preds,
            annotations,
            bins,
            plot_data,
        } => evaluate(&ctx, task, &preds, &annotations, bins, plot_data.as_deref()),
        Command::Simulate { config, out_dir } => simulate(&ctx, &config, &out_dir),
    }
}

fn stats(ctx: &Ctx, annotations: &Path, bins: usize, plot_data: Option<&Path>) -> Result<()> {
    #[derive(Serialize)]
    struct StatsReport {
        pnr_count: pnrkit::ingest::PnrCountStats,
        histogram: pnrkit::ingest::PositionHistogram,
    }
    let ds = load_annotations(annotations)?;
    let report = StatsReport {
        pnr_count: pnr_count_stats(&ds)?,
        histogram: position_histogram(&ds, bins)?,
    };
    let mut table = format!(
        "clips          {}\npnr per clip   mean {:.4}  min {}  max {}\n\n{:<14} {:>9} {:>9}\n",
        report.pnr_count.clips,
        report.pnr_count.mean,
        report.pnr_count.min,
        report.pnr_count.max,
        "fraction",
        "positive",
        "negative"
    );
    let h = &report.histogram;
    for k in 0..h.bins {
        table.push_str(&format!(
            "[{:.2}, {:.2})   {:>9} {:>9}\n",
            k as f64 / h.bins as f64,
            (k + 1) as f64 / h.bins as f64,
            h.positive[k],
            h.negative[k]
        ));
    }
    ctx.say(&table);
    if let Some(path) = &ctx.out {
        write_atomic(path, &to_json_line(&report)?)?;
    }
    if let Some(path) = plot_data {
        let mut buf = Vec::new();
        h.write_plot_data(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    Ok(())
}

fn windows(ctx: &Ctx, frames: usize, fps: f64, count: usize, window: usize) -> Result<()> {
    let clip = Clip::new("cli", fps, frames)?;
    let cfg = WindowingConfig::new(count, window, 0)?;
    let mut buf = b"index\tstart\tend\tcenter_sec\n".to_vec();
    for (k, w) in dense_windows(&clip, &cfg)?.into_iter().enumerate() {
        let t = window_center_time(w, &clip)?;
        writeln!(buf, "{k}\t{}\t{}\t{t:.6}", w.start, w.end)?;
    }
    emit_to(ctx.out.as_deref(), &buf)
}

fn oracle(ctx: &Ctx, annotations: &Path, count: usize, window: usize) -> Result<()> {
    #[derive(Serialize)]
    struct OracleRecord<'a> {
        clip_id: &'a str,
        oracle_error_sec: f64,
    }
    let ds = load_annotations(annotations)?;
    if ds.pnr_len() == 0 {
        bail!("{}: no PNR annotations", annotations.display());
    }
    let cfg = WindowingConfig::new(count, window, 0)?;
    let mut buf = Vec::new();
    let mut sum = 0.0;
    for (clip, ann) in ds.pnr_clips() {
        let err = oracle_error(ann, clip, &cfg)?;
        sum += err;
        write_record(
            &mut buf,
            &OracleRecord {
                clip_id: &clip.clip_id,
                oracle_error_sec: err,
            },
        )?;
    }
    if let Some(path) = &ctx.out {
        write_atomic(path, &buf)?;
    }
    ctx.say(&format!(
        "mean_oracle_error_sec\t{:.6}\n",
        sum / ds.pnr_len() as f64
    ));
    Ok(())
}

/// Ensures every input covers the same set of clips.
fn same_clips<'a, T: 'a>(
    maps: impl IntoIterator<Item = (&'a Path, &'a BTreeMap<String, T>)>,
) -> Result<()> {
    let mut first: Option<(&Path, Vec<&String>)> = None;
    for (path, map) in maps {
        let keys: Vec<&String> = map.keys().collect();
        match &first {
            None => first = Some((path, keys)),
            Some((p0, k0)) => {
                if let Some(id) = k0.iter().find(|id| !map.contains_key(id.as_str())) {
                    bail!(
                        "clip {id} is in {} but not in {}",
                        p0.display(),
                        path.display()
                    );
                }
                if let Some(id) = keys.iter().find(|id| !k0.contains(id)) {
                    bail!(
                        "clip {id} is in {} but not in {}",
                        path.display(),
                        p0.display()
                    );
                }
            }
        }
    }
    Ok(())
}

fn fuse(ctx: &Ctx, task: TaskArg, scores: &[PathBuf], annotations: Option<&Path>) -> Result<()> {
    let mut buf = Vec::new();
    match task {
        TaskArg::Oscc => {
            let inputs = scores
                .iter()
                .map(|p| parse_oscc_scores(open(p)?).with_context(|| format!("{}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            same_clips(scores.iter().map(PathBuf::as_path).zip(&inputs))?;
            let mut fused = BTreeMap::new();
            for id in inputs[0].keys() {
                let probs: Vec<f64> = inputs.iter().map(|m| m[id]).collect();
                fused.insert(id.clone(), fuse_oscc(&probs)?);
            }
            emit_oscc_scores(&fused, &mut buf)?;
        }
        TaskArg::Pnr => {
            let Some(annotations) = annotations else {
                bail!("fuse --task pnr requires --annotations");
            };
            let ds = load_annotations(annotations)?;
            let inputs = scores
                .iter()
                .map(|p| parse_scores(open(p)?).with_context(|| format!("{}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            same_clips(scores.iter().map(PathBuf::as_path).zip(&inputs))?;
            let mut fused = Vec::new();
            for id in inputs[0].keys() {
                let clip = ds
                    .clip(id)
                    .with_context(|| format!("clip {id} missing from {}", annotations.display()))?;
                let series: Vec<_> = inputs.iter().map(|m| m[id].clone()).collect();
                fused.push(fuse_pnr(&series, clip)?.into_series());
            }
            emit_scores(&fused, &mut buf)?;
        }
    }
    emit_to(ctx.out.as_deref(), &buf)
}

fn evaluate(
    ctx: &Ctx,
    task: TaskArg,
    preds: &Path,
    annotations: &Path,
    bins: usize,
    plot_data: Option<&Path>,
) -> Result<()> {
    let ds = load_annotations(annotations)?;
    let report = match task {
        TaskArg::Oscc => {
            let p = parse_oscc_predictions(open(preds)?)
                .with_context(|| format!("{}", preds.display()))?;
            oscc_accuracy(&p, &ds)?
        }
        TaskArg::Pnr => {
            let p = parse_pnr_predictions(open(preds)?)
                .with_context(|| format!("{}", preds.display()))?;
            pnr_report(&p, &ds, bins)?
        }
    };
    ctx.say(&report.to_table());
    if let Some(path) = &ctx.out {
        write_atomic(path, &to_json_line(&report)?)?;
    }
    if let Some(path) = plot_data {
        if report.task != Task::Pnr {
            bail!("--plot-data is only available for --task pnr");
        }
        let mut buf = Vec::new();
        report.write_plot_data(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    Ok(())
}

fn simulate(ctx: &Ctx, config: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("cannot read {}", config.display()))?;
    let mut spec =
        SimulationSpec::from_toml(&text).with_context(|| format!("{}", config.display()))?;
    if let Some(seed) = ctx.seed {
        spec.dataset.seed = seed;
    }
    let mut names: Vec<&str> = spec.scorer.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(pair) = names.windows(2).find(|p| p[0] == p[1]) {
        bail!("{}: scorer name {} used twice", config.display(), pair[0]);
    }

    let ds = gen_dataset(&spec.dataset)?;
    let mut outputs: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut buf = Vec::new();
    emit_annotations(&ds, &mut buf)?;
    outputs.push((out_dir.join("annotations.jsonl"), buf));
    for (i, scorer) in spec.scorer.iter().enumerate() {
        let seed = spec.scorer_seed(i);
        let scores = simulate_scores(&ds, &scorer.windowing()?, &scorer.noise, seed)?;
        let mut buf = Vec::new();
        emit_scores(scores.values(), &mut buf)?;
        outputs.push((out_dir.join(format!("{}.pnr.jsonl", scorer.name)), buf));

        let probs = simulate_oscc(&ds, &scorer.noise, seed ^ 0x05CC)?;
        let mut buf = Vec::new();
        emit_oscc_scores(&probs, &mut buf)?;
        outputs.push((out_dir.join(format!("{}.oscc.jsonl", scorer.name)), buf));
    }

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    for (path, bytes) in &outputs {
        write_atomic(path, bytes)?;
    }
    ctx.say(&format!(
        "simulated {} clips, {} scorer(s) -> {}\n",
        ds.len(),
        spec.scorer.len(),
        out_dir.display()
    ));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

//! `dialseg`: dialogue topic segmentation pipelines.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dialseg::pairgen::SplitUnit;
use dialseg::scorer::ScorerSpec;

const SCORER_HELP: &str = "Coherence scorer: `lexical`, `embedding:<vector-file>` or `external:<url>`";

#[derive(Debug, Parser)]
#[command(name = "dialseg", version, about = "Unsupervised dialogue topic segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score and segment every dialogue of a corpus.
    Segment(SegmentArgs),
    /// Evaluate segmentations against reference boundaries.
    Eval(EvalArgs),
    /// Generate coherence-ranking triplets with train/val/test splits.
    GenPairs(GenPairsArgs),
    /// Depth-score variance of one or more segment report files.
    Stats(StatsArgs),
    /// Convert a raw `__eou__` corpus to canonical JSONL.
    Convert(ConvertArgs),
    /// Write a synthetic corpus with known topic boundaries.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ScorerArgs {
    /// Per-request timeout for the external scorer, in seconds.
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    /// Retries of failed external requests (timeouts, 429, 5xx).
    #[arg(long, default_value_t = 2)]
    max_retries: u32,
    /// External score cache capacity in pairs; 0 disables the cache.
    #[arg(long, default_value_t = 100_000)]
    cache_capacity: usize,
    /// Bearer token sent to the external scorer.
    #[arg(
        long = "scorer-token",
        env = "DIALSEG_SCORER_TOKEN",
        hide_env_values = true,
        hide = true
    )]
    token: Option<String>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Canonical JSONL corpus.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, help = SCORER_HELP)]
    scorer: ScorerSpec,
    /// Per-dialogue report JSONL.
    #[arg(long)]
    output: PathBuf,
    /// Summary JSON (default: `<output>.summary.json`).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    backend: ScorerArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["hyp", "scorer", "random"]))]
struct EvalArgs {
    /// Canonical JSONL corpus with reference boundaries.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Stored hypotheses: JSONL records with `id` and `boundaries`.
    #[arg(long)]
    hyp: Option<PathBuf>,
    #[arg(long, help = SCORER_HELP)]
    scorer: Option<ScorerSpec>,
    /// Random baseline segmenter.
    #[arg(long, requires = "seed")]
    random: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Metric window size (default: half the mean reference segment length).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    window_size: Option<u64>,
    /// Report JSON; a manifest is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Row label in the results table.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    backend: ScorerArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["text", "input"]))]
struct GenPairsArgs {
    /// Raw corpus: one dialogue per line, utterances ending in `__eou__`.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Dialogue-act codes aligned with `--text`.
    #[arg(long, requires = "text")]
    acts: Option<PathBuf>,
    /// Topic ids aligned with `--text`.
    #[arg(long, requires = "text")]
    topics: Option<PathBuf>,
    /// Canonical JSONL corpus instead of raw files.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Keep every adjacent pair as a positive (ablation without act flows).
    #[arg(long)]
    no_flows: bool,
    /// Draw cross-dialogue negatives regardless of topic.
    #[arg(long)]
    no_topics: bool,
    #[arg(long, default_value = "instance")]
    split_unit: SplitUnit,
    #[arg(long, default_value = "en")]
    language: String,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Segment report JSONL files, one table row each.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Row labels, in the order of the report files (default: file stem).
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    text: PathBuf,
    #[arg(long)]
    acts: Option<PathBuf>,
    #[arg(long)]
    topics: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "en")]
    language: String,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    dialogues: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Also write a matching word-vector file.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<commands::UsageError>().is_some();
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

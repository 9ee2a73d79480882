//! `chroma`: human color ground truth, corpus color statistics, zero-shot
//! evaluation and representation probing.
//!
//! Exit codes: 0 success, 1 validation failure, 2 malformed input.

mod corpus;
mod io;
mod load;
mod pipeline;
mod repr;
mod zeroshot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::io::InputFormat;

#[derive(Parser, Debug)]
#[command(name = "chroma", version, about = "Color reporting-bias analysis and model probing")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "CHROMA_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gate HITs on the control object and aggregate ratings into ground truth.
    ///
    /// Writes dataset.jsonl (object, singular, plural, gt, group, split,
    /// n_annotations) and qc_report.json.
    Aggregate(pipeline::AggregateArgs),
    /// Cluster sorted ground-truth profiles and label Single/Multi/Any.
    ///
    /// Writes dataset.jsonl with `group` filled, clusters.json and, with
    /// --stability-seeds, stability.json.
    Group(pipeline::GroupArgs),
    /// Stratified train/val/test split per group.
    ///
    /// Writes dataset.jsonl with `split` filled.
    Split(pipeline::SplitArgs),
    /// Count color-object n-grams over corpus shards.
    ///
    /// Writes corpus_dist.jsonl, ingest_summary.json,
    /// table1_percentiles.csv (source, n_objects, p25, p50, p75) and, with
    /// --dataset, table2_corpus_vs_gt.csv (source, group, n_objects, freq,
    /// spearman_mean, spearman_std, kendall_mean, kendall_std, acc_at_1,
    /// js_mean, js_std).
    Corpus(corpus::CorpusArgs),
    /// Instantiate prompt templates for the model adapter.
    ///
    /// Writes prompts.jsonl (object, template, text, color?).
    Expand(zeroshot::ExpandArgs),
    /// Score zero-shot predictions against ground truth.
    ///
    /// Writes table4.csv (model, group, n_objects, spearman_mean,
    /// spearman_std, kendall_mean, kendall_std, acc_at_1, js_mean, js_std,
    /// delta_rho, delta_tau, avg_corr_mean, avg_corr_std,
    /// undefined_correlation, excluded_from_delta), scatter.csv (object,
    /// group, tau_ngram, tau_model) and zeroshot_objects.jsonl. Correlations
    /// are scaled by 100.
    EvalZeroshot(zeroshot::EvalArgs),
    /// Train probes on frozen embeddings over a subset schedule.
    ///
    /// Writes table5.csv (model, n, d_js, mdl, sdl(eps=E),
    /// sdl_lower_bound, esc(eps=E), esc_reached, avg_corr) and curves.csv
    /// (model, n, mean_loss, std_loss, mean_avg_corr[, zero_shot_baseline]).
    ProbeRepr(repr::ProbeArgs),
    /// Dataset summary tables.
    ///
    /// Writes splits.csv (group, all, train, val, test) and, with --corpus
    /// and --predictions, humans_vs_ngrams.csv (model, group, n_objects,
    /// freq, humans_mean, humans_std, ngrams_mean, ngrams_std).
    Report(pipeline::ReportArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct OutArgs {
    /// Directory for output files (created if missing).
    #[arg(long, short = 'o')]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Decoder,
    Encoder,
    Clip,
}

impl From<FamilyArg> for chroma_core::zeroshot::Family {
    fn from(f: FamilyArg) -> Self {
        use chroma_core::zeroshot::Family;
        match f {
            FamilyArg::Decoder => Family::Decoder,
            FamilyArg::Encoder => Family::Encoder,
            FamilyArg::Clip => Family::Clip,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    pool.build_global()?;
    match cli.command {
        Command::Aggregate(a) => pipeline::aggregate(a),
        Command::Group(a) => pipeline::group(a),
        Command::Split(a) => pipeline::split(a),
        Command::Corpus(a) => corpus::run(a),
        Command::Expand(a) => zeroshot::expand(a),
        Command::EvalZeroshot(a) => zeroshot::eval(a),
        Command::ProbeRepr(a) => repr::run(a),
        Command::Report(a) => pipeline::report(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputFormat>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<chroma_core::Error>() {
            return if e.is_input_format() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

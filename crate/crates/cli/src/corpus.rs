use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use chroma_core::annotations::Group;
use chroma_core::corpus::{
    attribute_colors, frequency_percentiles, ingest_shards, CorpusFormat, CorpusRecord, IngestStats,
    DEFAULT_MIN_OBJECT_COUNT,
};
use chroma_core::zeroshot::{evaluate_distributions, Stat};
use clap::Args;
use serde::Serialize;

use crate::io::{cell, num, OutDir};
use crate::load;
use crate::OutArgs;

#[derive(Args, Debug, Serialize)]
pub struct CorpusArgs {
    /// Corpus shard, plain or gzip (repeatable).
    #[arg(long = "shard", required = true)]
    pub shards: Vec<PathBuf>,
    /// google_ngram, plain_tsv or raw_text.
    #[arg(long)]
    pub format: CorpusFormat,
    /// Object lexicon, JSON Lines {"object","singular","plural"}.
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Dataset JSON Lines; adds the corpus-vs-ground-truth table.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Objects occurring fewer times are left out of the summary tables.
    #[arg(long, default_value_t = DEFAULT_MIN_OBJECT_COUNT)]
    pub min_object_count: u64,
    /// Row label for the tables.
    #[arg(long, default_value = "corpus")]
    pub name: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct ShardSummary<'a> {
    path: String,
    #[serde(flatten)]
    stats: &'a IngestStats,
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    format: CorpusFormat,
    distinct_ngrams: usize,
    shards: Vec<ShardSummary<'a>>,
    absent_objects: Vec<&'a str>,
    below_min_count: Vec<&'a str>,
    without_color_mentions: Vec<&'a str>,
}

const TABLE2: [&str; 11] = [
    "source",
    "group",
    "n_objects",
    "freq",
    "spearman_mean",
    "spearman_std",
    "kendall_mean",
    "kendall_std",
    "acc_at_1",
    "js_mean",
    "js_std",
];

pub fn run(args: CorpusArgs) -> Result<()> {
    let lexicon = load::lexicon(&args.lexicon)?;
    let shards: Vec<_> = args.shards.iter().map(|p| (p.clone(), args.format)).collect();
    let (table, stats) = ingest_shards(&shards)?;
    if table.is_empty() {
        bail!("no usable n-grams in {} shard(s)", shards.len());
    }
    let counts = attribute_colors(&table, &lexicon)?;
    let records: Vec<CorpusRecord> = counts.iter().map(CorpusRecord::from).collect();

    let kept: Vec<&CorpusRecord> = records.iter().filter(|r| r.phi_o >= args.min_object_count).collect();
    let summary = IngestSummary {
        format: args.format,
        distinct_ngrams: table.len(),
        shards: args
            .shards
            .iter()
            .zip(&stats)
            .map(|(p, s)| ShardSummary {
                path: p.display().to_string(),
                stats: s,
            })
            .collect(),
        absent_objects: records.iter().filter(|r| r.phi_o == 0).map(|r| r.object.as_str()).collect(),
        below_min_count: records
            .iter()
            .filter(|r| r.phi_o > 0 && r.phi_o < args.min_object_count)
            .map(|r| r.object.as_str())
            .collect(),
        without_color_mentions: records
            .iter()
            .filter(|r| r.phi_o > 0 && r.dist.is_none())
            .map(|r| r.object.as_str())
            .collect(),
    };

    let mut out = OutDir::create(&args.out.out_dir)?;
    out.jsonl("corpus_dist.jsonl", &records)?;
    out.json("ingest_summary.json", &summary)?;

    let occurrences: Vec<f64> = kept.iter().map(|r| r.phi_o as f64).collect();
    let percentile_row = match frequency_percentiles(&occurrences) {
        Ok(p) => vec![args.name.clone(), kept.len().to_string(), num(p.p25), num(p.p50), num(p.p75)],
        Err(_) => vec![args.name.clone(), "0".into(), String::new(), String::new(), String::new()],
    };
    out.csv("table1_percentiles.csv", &["source", "n_objects", "p25", "p50", "p75"], &[percentile_row])?;

    let mut inputs = vec![args.lexicon.as_path()];
    inputs.extend(args.shards.iter().map(PathBuf::as_path));
    if let Some(path) = &args.dataset {
        let dataset = load::dataset(path)?;
        inputs.push(path);
        let by_id: BTreeMap<&str, &CorpusRecord> = kept.iter().map(|r| (r.object.as_str(), *r)).collect();
        let usable: Vec<_> = dataset
            .iter()
            .filter(|o| by_id.contains_key(o.object_id.as_str()))
            .cloned()
            .collect();
        let dists = by_id.iter().map(|(k, r)| (k.to_string(), r.dist)).collect();
        let (report, missing) = evaluate_distributions(&dists, &usable);
        eprintln!(
            "{} dataset objects scored, {} below the occurrence threshold or absent, {} without color mentions",
            report.objects.len(),
            dataset.len() - usable.len(),
            missing.len()
        );
        let mut rows = Vec::new();
        for g in Group::ALL.map(Some).into_iter().chain([None]) {
            let name = g.map_or("all", Group::name);
            let freqs: Vec<f64> = usable
                .iter()
                .filter(|o| g.is_none() || o.group == g)
                .filter_map(|o| by_id[o.object_id.as_str()].freq)
                .collect();
            let summary = report.group(name);
            if summary.is_none() && freqs.is_empty() {
                continue;
            }
            let mean = |s: Option<Stat>| cell(s.map(|s| s.mean));
            let std = |s: Option<Stat>| cell(s.map(|s| s.std));
            rows.push(vec![
                args.name.clone(),
                name.to_owned(),
                summary.map_or(0, |s| s.n_objects).to_string(),
                mean(Stat::of(&freqs)),
                mean(summary.and_then(|s| s.spearman)),
                std(summary.and_then(|s| s.spearman)),
                mean(summary.and_then(|s| s.kendall)),
                std(summary.and_then(|s| s.kendall)),
                mean(summary.and_then(|s| s.acc_at_1)),
                mean(summary.and_then(|s| s.js)),
                std(summary.and_then(|s| s.js)),
            ]);
        }
        out.csv("table2_corpus_vs_gt.csv", &TABLE2, &rows)?;
    }
    out.manifest("corpus", &args, &inputs)
}

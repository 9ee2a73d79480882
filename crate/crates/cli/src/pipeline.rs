use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use chroma_core::annotations::{assemble_dataset, make_splits, Group, Split};
use chroma_core::corpus::DEFAULT_MIN_OBJECT_COUNT;
use chroma_core::grouping::{cluster_objects, label_clusters, profiles_of, stability_check};
use chroma_core::zeroshot::{avg_correlation, kendall, spearman, Stat};
use clap::Args;
use serde::Serialize;

use crate::io::{cell, OutDir};
use crate::load::{self, NamedPath};
use crate::{zeroshot, FamilyArg, OutArgs};

#[derive(Args, Debug, Serialize)]
pub struct AggregateArgs {
    /// Raw HIT submissions, JSON Lines.
    #[arg(long)]
    pub hits: PathBuf,
    /// Object lexicon, JSON Lines {"object","singular","plural"}.
    #[arg(long)]
    pub lexicon: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn aggregate(args: AggregateArgs) -> Result<()> {
    let hits = load::hits(&args.hits)?;
    let lexicon = load::lexicon(&args.lexicon)?;
    let (dataset, report) = assemble_dataset(&hits, &lexicon)?;
    eprintln!(
        "{} of {} HITs accepted, {} objects, {} annotations removed",
        report.hits_accepted,
        report.hits_total,
        dataset.len(),
        report.removed_annotations.len()
    );
    let mut out = OutDir::create(&args.out.out_dir)?;
    out.jsonl("dataset.jsonl", &dataset)?;
    out.json("qc_report.json", &report)?;
    out.manifest("aggregate", &args, &[&args.hits, &args.lexicon])
}

#[derive(Args, Debug, Serialize)]
pub struct GroupArgs {
    /// Dataset JSON Lines.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of clusters; labeling requires 3.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Comma-separated seeds for a pairwise-ARI stability report.
    #[arg(long, value_delimiter = ',')]
    pub stability_seeds: Vec<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    k: usize,
    seed: u64,
    iterations: usize,
    converged: bool,
    objective_trace: &'a [f64],
    clusters: Vec<ClusterEntry>,
}

#[derive(Serialize)]
struct ClusterEntry {
    index: usize,
    group: Group,
    size: usize,
    centroid: chroma_core::ColorDistribution,
}

pub fn group(args: GroupArgs) -> Result<()> {
    let mut dataset = load::dataset(&args.dataset)?;
    let profiles = profiles_of(&dataset);
    let model = label_clusters(cluster_objects(&profiles, args.k, args.seed)?)?;
    let groups = model.groups().expect("labeled");
    for o in &mut dataset {
        o.group = Some(groups[&o.object_id]);
    }
    let labels = model.labels.as_ref().expect("labeled");
    let sizes = model.cluster_sizes();
    let summary = ClusterSummary {
        k: model.k,
        seed: args.seed,
        iterations: model.iterations,
        converged: model.converged,
        objective_trace: &model.objective_trace,
        clusters: (0..model.k)
            .map(|i| ClusterEntry {
                index: i,
                group: labels[i],
                size: sizes[i],
                centroid: model.centroids[i],
            })
            .collect(),
    };
    for g in Group::ALL {
        eprintln!("{g}: {}", groups.values().filter(|x| **x == g).count());
    }

    let mut out = OutDir::create(&args.out.out_dir)?;
    out.jsonl("dataset.jsonl", &dataset)?;
    out.json("clusters.json", &summary)?;
    if !args.stability_seeds.is_empty() {
        let report = stability_check(&profiles, args.k, &args.stability_seeds)?;
        if !report.is_stable() {
            eprintln!("warning: clustering is not seed-stable (min ARI {:?})", report.min_ari);
        }
        out.json("stability.json", &report)?;
    }
    out.manifest("group", &args, &[&args.dataset])
}

#[derive(Args, Debug, Serialize)]
pub struct SplitArgs {
    /// Dataset JSON Lines with groups assigned.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn split(args: SplitArgs) -> Result<()> {
    let mut dataset = load::dataset(&args.dataset)?;
    let splits = make_splits(&dataset, args.seed)?;
    for o in &mut dataset {
        o.split = Some(splits[&o.object_id]);
    }
    let mut out = OutDir::create(&args.out.out_dir)?;
    out.jsonl("dataset.jsonl", &dataset)?;
    out.manifest("split", &args, &[&args.dataset])
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// Dataset JSON Lines with groups and splits assigned.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Corpus distribution file from `chroma corpus`.
    #[arg(long, requires = "predictions")]
    pub corpus: Option<PathBuf>,
    /// Zero-shot predictions as NAME=PATH (repeatable).
    #[arg(long, requires = "corpus")]
    pub predictions: Vec<NamedPath>,
    #[arg(long, value_enum, default_value = "encoder")]
    pub family: FamilyArg,
    /// Objects with fewer occurrences are left out of the frequency column.
    #[arg(long, default_value_t = DEFAULT_MIN_OBJECT_COUNT)]
    pub min_object_count: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

fn stat_cells(values: &[f64]) -> [String; 2] {
    let s = Stat::of(values);
    [cell(s.map(|s| s.mean)), cell(s.map(|s| s.std))]
}

pub fn report(args: ReportArgs) -> Result<()> {
    let dataset = load::dataset(&args.dataset)?;
    let mut counts: BTreeMap<Group, [usize; 3]> = BTreeMap::new();
    for o in &dataset {
        let (Some(g), Some(s)) = (o.group, o.split) else {
            bail!("object {:?} has no group or split; run `group` and `split` first", o.object_id);
        };
        let i = Split::ALL.iter().position(|x| *x == s).expect("known split");
        counts.entry(g).or_default()[i] += 1;
    }
    let mut rows = Vec::new();
    let mut total = [0usize; 3];
    for g in Group::ALL {
        let c = counts.get(&g).copied().unwrap_or_default();
        for i in 0..3 {
            total[i] += c[i];
        }
        rows.push(vec![
            g.name().to_owned(),
            c.iter().sum::<usize>().to_string(),
            c[0].to_string(),
            c[1].to_string(),
            c[2].to_string(),
        ]);
    }
    rows.push(vec![
        "total".into(),
        total.iter().sum::<usize>().to_string(),
        total[0].to_string(),
        total[1].to_string(),
        total[2].to_string(),
    ]);
    let mut out = OutDir::create(&args.out.out_dir)?;
    out.csv("splits.csv", &["group", "all", "train", "val", "test"], &rows)?;

    let mut inputs = vec![args.dataset.as_path()];
    if let Some(corpus_path) = &args.corpus {
        load::unique_names(&args.predictions)?;
        let corpus = load::corpus(corpus_path)?;
        inputs.push(corpus_path);
        let mut rows = Vec::new();
        for model in &args.predictions {
            let preds = load::predictions(&model.path)?;
            let chosen = zeroshot::chosen_distributions(&preds, args.family.into(), &dataset)?;
            for g in Group::ALL.map(Some).into_iter().chain([None]) {
                let members: Vec<_> = dataset.iter().filter(|o| g.is_none() || o.group == g).collect();
                let mut freq = Vec::new();
                let mut humans = Vec::new();
                let mut ngrams = Vec::new();
                for o in &members {
                    let pred = &chosen[&o.object_id];
                    if let Some(a) = avg_correlation(spearman(pred, &o.ground_truth), kendall(pred, &o.ground_truth)) {
                        humans.push(100.0 * a);
                    }
                    let Some(rec) = corpus.get(&o.object_id) else { continue };
                    if rec.phi_o >= args.min_object_count {
                        freq.extend(rec.freq);
                    }
                    if let Some(d) = &rec.dist {
                        if let Some(a) = avg_correlation(spearman(pred, d), kendall(pred, d)) {
                            ngrams.push(100.0 * a);
                        }
                    }
                }
                let [hm, hs] = stat_cells(&humans);
                let [nm, ns] = stat_cells(&ngrams);
                rows.push(vec![
                    model.name.clone(),
                    g.map_or("all", Group::name).to_owned(),
                    members.len().to_string(),
                    cell(Stat::of(&freq).map(|s| s.mean)),
                    hm,
                    hs,
                    nm,
                    ns,
                ]);
            }
        }
        for m in &args.predictions {
            inputs.push(&m.path);
        }
        out.csv(
            "humans_vs_ngrams.csv",
            &["model", "group", "n_objects", "freq", "humans_mean", "humans_std", "ngrams_mean", "ngrams_std"],
            &rows,
        )?;
    }
    out.manifest("report", &args, &inputs)
}

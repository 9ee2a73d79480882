use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{bail, Result};
use chroma_core::annotations::{ObjectRecord, Split};
use chroma_core::zeroshot::{
    evaluate, expand as expand_prompts, to_distribution, Family, GroupSummary, MetricReport, PredictionSet,
    TemplateSet,
};
use chroma_core::ColorDistribution;
use clap::Args;
use serde::Serialize;

use crate::io::{cell, num, read_to_string, OutDir};
use crate::load::{self, NamedPath};
use crate::{FamilyArg, OutArgs};

fn templates(path: Option<&PathBuf>, family: Family) -> Result<TemplateSet> {
    let Some(path) = path else {
        return Ok(TemplateSet::default_for(family));
    };
    let set = TemplateSet::from_json(&read_to_string(path)?)?;
    if set.family != family {
        bail!("{} holds {:?} templates, expected {:?}", path.display(), set.family, family);
    }
    Ok(set)
}

#[derive(Args, Debug, Serialize)]
pub struct ExpandArgs {
    /// Dataset JSON Lines.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Template file (default: bundled set for the family).
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Only objects of this split.
    #[arg(long)]
    pub split: Option<Split>,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn expand(args: ExpandArgs) -> Result<()> {
    let family = args.family.into();
    let ts = templates(args.templates.as_ref(), family)?;
    let dataset = load::select(load::dataset(&args.dataset)?, args.split)?;
    let prompts = expand_prompts(&dataset, &ts)?;
    let mut out = OutDir::create(&args.out.out_dir)?;
    out.jsonl("prompts.jsonl", &prompts)?;
    let mut inputs = vec![args.dataset.as_path()];
    if let Some(t) = &args.templates {
        inputs.push(t);
    }
    out.manifest("expand", &args, &inputs)
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Prediction files as NAME=PATH (repeatable).
    #[arg(long, required = true)]
    pub predictions: Vec<NamedPath>,
    /// Dataset JSON Lines with groups assigned.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Reject predictions whose template ids are not in this file.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Corpus distribution file; enables the delta columns and tau_ngram.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Only objects of this split.
    #[arg(long)]
    pub split: Option<Split>,
    #[command(flatten)]
    pub out: OutArgs,
}

const TABLE4: [&str; 16] = [
    "model",
    "group",
    "n_objects",
    "spearman_mean",
    "spearman_std",
    "kendall_mean",
    "kendall_std",
    "acc_at_1",
    "js_mean",
    "js_std",
    "delta_rho",
    "delta_tau",
    "avg_corr_mean",
    "avg_corr_std",
    "undefined_correlation",
    "excluded_from_delta",
];

fn table4_row(model: &str, g: &GroupSummary) -> Vec<String> {
    let mean = |s: Option<chroma_core::zeroshot::Stat>| cell(s.map(|s| s.mean));
    let std = |s: Option<chroma_core::zeroshot::Stat>| cell(s.map(|s| s.std));
    vec![
        model.to_owned(),
        g.group.clone(),
        g.n_objects.to_string(),
        mean(g.spearman),
        std(g.spearman),
        mean(g.kendall),
        std(g.kendall),
        mean(g.acc_at_1),
        mean(g.js),
        std(g.js),
        mean(g.delta_rho),
        mean(g.delta_tau),
        mean(g.avg_corr),
        std(g.avg_corr),
        g.undefined_correlation.to_string(),
        g.excluded_from_delta.to_string(),
    ]
}

#[derive(Serialize)]
struct ObjectLine<'a> {
    model: &'a str,
    #[serde(flatten)]
    metrics: &'a chroma_core::zeroshot::ObjectMetrics,
}

fn check_templates(preds: &PredictionSet, ts: &TemplateSet, name: &str) -> Result<()> {
    let known: BTreeSet<&str> = ts.templates.iter().map(|t| t.id.as_str()).collect();
    for o in preds.objects() {
        for (t, _) in preds.templates_for(o) {
            if !known.contains(t) {
                bail!("{name}: template {t:?} (object {o:?}) is not in the template set");
            }
        }
    }
    Ok(())
}

/// The prediction each object is scored by: its best-tau template's
/// distribution.
pub fn chosen_distributions(
    preds: &PredictionSet,
    family: Family,
    dataset: &[ObjectRecord],
) -> Result<BTreeMap<String, ColorDistribution>> {
    let report = evaluate(preds, family, dataset, None)?;
    chosen_from_report(preds, family, &report)
}

fn chosen_from_report(
    preds: &PredictionSet,
    family: Family,
    report: &MetricReport,
) -> Result<BTreeMap<String, ColorDistribution>> {
    let mut out = BTreeMap::new();
    for m in &report.objects {
        let template = m.template.as_deref().expect("evaluate names a template");
        let (_, scores) = preds
            .templates_for(&m.object)
            .find(|(t, _)| *t == template)
            .expect("chosen template exists");
        out.insert(m.object.clone(), to_distribution(scores, family)?);
    }
    Ok(out)
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let family: Family = args.family.into();
    if family == Family::Clip {
        bail!("clip text encoders are probed through embeddings (probe-repr), not zero-shot scores");
    }
    load::unique_names(&args.predictions)?;
    let dataset = load::select(load::dataset(&args.dataset)?, args.split)?;
    let ts = match &args.templates {
        Some(p) => Some(templates(Some(p), family)?),
        None => None,
    };
    let corpus = args.corpus.as_deref().map(load::corpus).transpose()?;
    let baseline = corpus.as_ref().map(load::baseline);

    let mut table = Vec::new();
    let mut objects = Vec::new();
    let mut model_tau: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut reports = Vec::new();
    for model in &args.predictions {
        let preds = load::predictions(&model.path)?;
        if let Some(ts) = &ts {
            check_templates(&preds, ts, &model.name)?;
        }
        let report = evaluate(&preds, family, &dataset, baseline.as_ref())?;
        if baseline.is_some() {
            eprintln!(
                "{}: {} objects excluded from delta metrics (no n-gram distribution)",
                model.name, report.excluded_no_baseline
            );
        }
        for g in &report.groups {
            table.push(table4_row(&model.name, g));
        }
        for m in &report.objects {
            if let Some(t) = m.kendall {
                model_tau.entry(m.object.clone()).or_default().push(t);
            }
        }
        reports.push((model.name.clone(), report));
    }
    for (name, report) in &reports {
        for m in &report.objects {
            objects.push(ObjectLine { model: name, metrics: m });
        }
    }

    let mut scatter = Vec::new();
    for o in &dataset {
        let tau_ngram = baseline
            .as_ref()
            .and_then(|b| b.get(&o.object_id).copied().flatten())
            .and_then(|d| chroma_core::zeroshot::kendall(&d, &o.ground_truth))
            .map(|t| 100.0 * t);
        let tau_model = model_tau
            .get(&o.object_id)
            .map(|v| v.iter().sum::<f64>() / v.len() as f64);
        scatter.push(vec![
            o.object_id.clone(),
            o.group.map_or("", |g| g.name()).to_owned(),
            cell(tau_ngram),
            tau_model.map(num).unwrap_or_default(),
        ]);
    }

    let mut out = OutDir::create(&args.out.out_dir)?;
    out.csv("table4.csv", &TABLE4, &table)?;
    out.csv("scatter.csv", &["object", "group", "tau_ngram", "tau_model"], &scatter)?;
    out.jsonl("zeroshot_objects.jsonl", &objects)?;
    let mut inputs = vec![args.dataset.as_path()];
    inputs.extend(args.predictions.iter().map(|p| p.path.as_path()));
    inputs.extend(args.templates.as_deref());
    inputs.extend(args.corpus.as_deref());
    out.manifest("eval-zeroshot", &args, &inputs)
}

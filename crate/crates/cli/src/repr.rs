use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use chroma_core::annotations::Split;
use chroma_core::loss_data::{default_report_sizes, loss_data_curve, repr_report, subset_schedule, Esc, ProbingRun};
use chroma_core::probe::ProbeConfig;
use chroma_core::ColorDistribution;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::io::{cell, input_error, num, OutDir};
use crate::load::{self, NamedPath};
use crate::OutArgs;

#[derive(Args, Debug, Serialize)]
pub struct ProbeArgs {
    /// Embedding files as NAME=PATH (repeatable).
    #[arg(long, required = true)]
    pub embeddings: Vec<NamedPath>,
    /// Dataset JSON Lines with splits assigned.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Number of seeds (0..N).
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Loss threshold for SDL and sample complexity.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Number of log-spaced training subset sizes.
    #[arg(long, default_value_t = 10)]
    pub subsets: usize,
    #[arg(long, default_value_t = 4000)]
    pub steps: usize,
    #[arg(long, default_value_t = 512)]
    pub hidden_width: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    /// Minibatch size (default: min(256, samples)).
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value = "train")]
    pub train_split: Split,
    #[arg(long, default_value = "test")]
    pub eval_split: Split,
    /// Comma-separated sizes for table rows (default: 13 and the largest).
    #[arg(long, value_delimiter = ',')]
    pub report_sizes: Vec<usize>,
    /// CSV with columns model,value: best zero-shot average correlation per
    /// model, copied into curves.csv.
    #[arg(long)]
    pub zero_shot_baseline: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Deserialize)]
struct BaselineRow {
    model: String,
    value: f64,
}

#[derive(Serialize)]
struct RunDump<'a> {
    model: &'a str,
    seeds: &'a [u64],
    #[serde(flatten)]
    run: &'a ProbingRun,
}

fn read_baseline(path: &PathBuf) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let row: BaselineRow = row.map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        out.insert(row.model, row.value);
    }
    Ok(out)
}

pub fn run(args: ProbeArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    if !(args.epsilon > 0.0) {
        bail!("--epsilon must be positive");
    }
    load::unique_names(&args.embeddings)?;
    let cfg = ProbeConfig {
        hidden_width: args.hidden_width,
        steps: args.steps,
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        seeds: (0..args.seeds).collect(),
        epsilon: args.epsilon,
    };
    cfg.validate()?;

    let dataset = load::dataset(&args.dataset)?;
    let targets: BTreeMap<String, ColorDistribution> =
        dataset.iter().map(|o| (o.object_id.clone(), o.ground_truth)).collect();
    let ids = |split: Split| -> Result<Vec<String>> {
        Ok(load::select(dataset.clone(), Some(split))?.into_iter().map(|o| o.object_id).collect())
    };
    let train = ids(args.train_split)?;
    let eval = ids(args.eval_split)?;
    let schedule = subset_schedule(train.len(), args.subsets)?;
    let report_sizes = if args.report_sizes.is_empty() {
        default_report_sizes(&schedule)
    } else {
        args.report_sizes.clone()
    };
    let baseline = args.zero_shot_baseline.as_ref().map(read_baseline).transpose()?;

    let mut runs = Vec::new();
    for e in &args.embeddings {
        let embs = load::embeddings(&e.path)?;
        eprintln!(
            "{}: d = {}, {} train / {} eval objects, schedule {:?}",
            e.name,
            embs.dim(),
            train.len(),
            eval.len(),
            schedule
        );
        let run = loss_data_curve(&embs, &targets, &train, &eval, &schedule, &cfg)?;
        runs.push((e.name.clone(), run));
    }
    let (rows, points) = repr_report(&runs, args.epsilon, &report_sizes)?;

    let eps = args.epsilon;
    let sdl_col = format!("sdl(eps={eps})");
    let esc_col = format!("esc(eps={eps})");
    let header = ["model", "n", "d_js", "mdl", &sdl_col, "sdl_lower_bound", &esc_col, "esc_reached", "avg_corr"];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (esc_n, reached) = match r.esc {
                Esc::At(n) => (n, true),
                Esc::GreaterThan(n) => (n, false),
            };
            vec![
                r.model.clone(),
                r.n.to_string(),
                num(r.d_js),
                num(r.mdl),
                num(r.sdl.value),
                r.sdl.lower_bound.to_string(),
                esc_n.to_string(),
                reached.to_string(),
                cell(r.avg_corr),
            ]
        })
        .collect();

    let mut curve_header = vec!["model", "n", "mean_loss", "std_loss", "mean_avg_corr"];
    if baseline.is_some() {
        curve_header.push("zero_shot_baseline");
    }
    let curves: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut row = vec![
                p.model.clone(),
                p.n.to_string(),
                num(p.mean_loss),
                num(p.std_loss),
                cell(p.mean_avg_corr),
            ];
            if let Some(b) = &baseline {
                row.push(cell(b.get(&p.model).copied()));
            }
            row
        })
        .collect();

    let mut out = OutDir::create(&args.out.out_dir)?;
    out.csv("table5.csv", &header, &table)?;
    out.csv("curves.csv", &curve_header, &curves)?;
    let dumps: Vec<RunDump> = runs
        .iter()
        .map(|(m, r)| RunDump {
            model: m,
            seeds: &cfg.seeds,
            run: r,
        })
        .collect();
    out.json("probe_runs.json", &dumps)?;
    let mut inputs = vec![args.dataset.as_path()];
    inputs.extend(args.embeddings.iter().map(|e| e.path.as_path()));
    inputs.extend(args.zero_shot_baseline.as_deref());
    out.manifest("probe-repr", &args, &inputs)
}

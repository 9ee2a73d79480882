//! Loss-data curves over a nested subset schedule, and the description-length
//! measures read off them: MDL, SDL(ε) and εSC.
//!
//! The accounting loss is held-out mean Jensen-Shannon divergence in nats.
//! For sizes `n_1 < … < n_k` with `n_0 = 0` and `L(n_0)` the loss of the
//! uniform predictor,
//!
//! ```text
//! MDL     = Σ_{i<k} (n_{i+1} - n_i) · L(n_i)
//! SDL(ε)  = Σ_{i<k} (n_{i+1} - n_i) · max(0, L(n_i) - ε)
//! εSC     = min { n_i : L(n_i) ≤ ε }
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{js_divergence, ColorDistribution};
use crate::error::{Error, Result};
use crate::probe::{train_probe, Probe, ProbeConfig};
use crate::zeroshot::{avg_correlation, best_template, kendall, spearman, Stat};

pub const DEFAULT_SUBSETS: usize = 10;

/// `k` log-spaced object counts from 1 to `n_max`, rounded up and
/// deduplicated.
pub fn subset_schedule(n_max: usize, k: usize) -> Result<Vec<usize>> {
    if k < 2 || n_max < k {
        return Err(Error::Config(format!(
            "subset schedule needs n_max >= k >= 2, got n_max = {n_max}, k = {k}"
        )));
    }
    let log_max = (n_max as f64).log10();
    let mut sizes: Vec<usize> = (0..k)
        .map(|i| {
            let x = 10f64.powf(i as f64 * log_max / (k - 1) as f64);
            // absorb representation error on exact integers before rounding up
            ((x - 1e-9).ceil() as usize).clamp(1, n_max)
        })
        .collect();
    sizes[k - 1] = n_max;
    sizes.dedup();
    Ok(sizes)
}

/// Vectors keyed by (object, template), all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    vectors: BTreeMap<(String, String), Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub object: String,
    pub template: String,
    pub vector: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a vector. The first insert fixes the dimension.
    pub fn insert(&mut self, object: &str, template: &str, vector: Vec<f64>) -> Result<()> {
        if vector.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: self.dim.max(1),
                got: 0,
            });
        }
        if self.vectors.is_empty() {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite component in {object}/{template}")));
        }
        let key = (object.to_owned(), template.to_owned());
        if self.vectors.contains_key(&key) {
            return Err(Error::Duplicate(format!("{object}/{template}")));
        }
        self.vectors.insert(key, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn objects(&self) -> BTreeSet<&str> {
        self.vectors.keys().map(|(o, _)| o.as_str()).collect()
    }

    pub fn for_object<'a>(&'a self, object: &'a str) -> impl Iterator<Item = (&'a str, &'a [f64])> + 'a {
        self.vectors
            .range((object.to_owned(), String::new())..)
            .take_while(move |((o, _), _)| o == object)
            .map(|((_, t), v)| (t.as_str(), v.as_slice()))
    }

    /// Multiplies every component by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }
}

/// Held-out loss per seed and subset size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossDataCurve {
    pub sizes: Vec<usize>,
    /// `losses[seed][i]` is the loss after training on `sizes[i]` objects.
    pub losses: Vec<Vec<f64>>,
    /// Loss of the uniform predictor on the same evaluation set.
    pub prior_loss: f64,
}

impl LossDataCurve {
    /// Single-run curve, mostly for fixtures.
    pub fn from_losses(sizes: Vec<usize>, losses: Vec<f64>, prior_loss: f64) -> Result<Self> {
        let curve = Self {
            sizes,
            losses: vec![losses],
            prior_loss,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes[0] == 0 || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("curve sizes must be positive and strictly increasing".into()));
        }
        if self.losses.is_empty() {
            return Err(Error::Config("curve has no runs".into()));
        }
        for run in &self.losses {
            if run.len() != self.sizes.len() {
                return Err(Error::Config("every run needs one loss per size".into()));
            }
            if run.iter().any(|l| !l.is_finite() || *l < 0.0) {
                return Err(Error::Config("losses must be finite and non-negative".into()));
            }
        }
        if !(self.prior_loss.is_finite() && self.prior_loss >= 0.0) {
            return Err(Error::Config("prior loss must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        *self.sizes.last().expect("non-empty curve")
    }

    /// Pointwise mean over runs.
    pub fn mean_losses(&self) -> Vec<f64> {
        let runs = self.losses.len() as f64;
        (0..self.sizes.len())
            .map(|i| self.losses.iter().map(|r| r[i]).sum::<f64>() / runs)
            .collect()
    }

    /// Pointwise sample standard deviation over runs (0 for a single run).
    pub fn std_losses(&self) -> Vec<f64> {
        (0..self.sizes.len())
            .map(|i| {
                let column: Vec<f64> = self.losses.iter().map(|r| r[i]).collect();
                Stat::of(&column).map_or(0.0, |s| s.std)
            })
            .collect()
    }

    /// The curve restricted to sizes up to and including `n`.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        let keep = self.sizes.iter().take_while(|&&s| s <= n).count();
        if keep == 0 {
            return Err(Error::Config(format!("no scheduled size at or below {n}")));
        }
        Ok(Self {
            sizes: self.sizes[..keep].to_vec(),
            losses: self.losses.iter().map(|r| r[..keep].to_vec()).collect(),
            prior_loss: self.prior_loss,
        })
    }

    /// (chunk width, loss charged for it) for each step of the accounting sum.
    fn chunks(&self) -> Vec<(f64, f64)> {
        let mean = self.mean_losses();
        let mut out = Vec::with_capacity(self.sizes.len());
        let mut prev_n = 0usize;
        let mut prev_loss = self.prior_loss;
        for (n, l) in self.sizes.iter().zip(mean) {
            out.push(((n - prev_n) as f64, prev_loss));
            prev_n = *n;
            prev_loss = l;
        }
        out
    }
}

pub fn mdl(curve: &LossDataCurve) -> f64 {
    curve.chunks().iter().map(|(w, l)| w * l).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sdl {
    pub value: f64,
    /// The curve never reached ε, so the true surplus is at least `value`.
    pub lower_bound: bool,
}

impl fmt::Display for Sdl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lower_bound {
            write!(f, "> {:.2}", self.value)
        } else {
            write!(f, "{:.2}", self.value)
        }
    }
}

pub fn sdl(curve: &LossDataCurve, epsilon: f64) -> Sdl {
    let value = curve.chunks().iter().map(|(w, l)| w * (l - epsilon).max(0.0)).sum();
    Sdl {
        value,
        lower_bound: matches!(esc(curve, epsilon), Esc::GreaterThan(_)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "n", rename_all = "snake_case")]
pub enum Esc {
    At(usize),
    GreaterThan(usize),
}

impl Esc {
    fn rank(&self) -> (u8, usize) {
        match *self {
            Esc::At(n) => (0, n),
            Esc::GreaterThan(_) => (1, 0),
        }
    }
}

/// `GreaterThan` sorts above every `At`, like +∞.
impl PartialOrd for Esc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Esc {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl fmt::Display for Esc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Esc::At(n) => write!(f, "{n}"),
            Esc::GreaterThan(n) => write!(f, "> {n}"),
        }
    }
}

pub fn esc(curve: &LossDataCurve, epsilon: f64) -> Esc {
    curve
        .sizes
        .iter()
        .zip(curve.mean_losses())
        .find(|(_, l)| *l <= epsilon)
        .map_or(Esc::GreaterThan(curve.n_max()), |(n, _)| Esc::At(*n))
}

/// A curve plus the per-(seed, size) average correlation of the trained
/// probes on the evaluation objects (×100 scale).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbingRun {
    pub curve: LossDataCurve,
    pub avg_corr: Vec<Vec<Option<f64>>>,
    pub eval_objects: usize,
    pub eval_samples: usize,
}

impl ProbingRun {
    /// Mean over seeds of the average correlation at each size.
    pub fn mean_avg_corr(&self) -> Vec<Option<f64>> {
        (0..self.curve.sizes.len())
            .map(|i| {
                let vals: Vec<f64> = self.avg_corr.iter().filter_map(|r| r[i]).collect();
                Stat::of(&vals).map(|s| s.mean)
            })
            .collect()
    }
}

struct Samples<'a> {
    inputs: Vec<&'a [f64]>,
    targets: Vec<ColorDistribution>,
}

fn samples_for<'a>(
    embs: &'a EmbeddingSet,
    targets: &BTreeMap<String, ColorDistribution>,
    objects: &[&'a str],
) -> Samples<'a> {
    let mut s = Samples {
        inputs: Vec::new(),
        targets: Vec::new(),
    };
    for o in objects {
        let t = targets[*o];
        for (_, v) in embs.for_object(o) {
            s.inputs.push(v);
            s.targets.push(t);
        }
    }
    s
}

fn mix_seed(seed: u64, size: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (size as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluation of a trained probe: mean JS over all eval samples and the mean
/// per-object average correlation of the best-template prediction.
fn evaluate_probe(
    probe: &Probe,
    embs: &EmbeddingSet,
    targets: &BTreeMap<String, ColorDistribution>,
    eval: &[&str],
) -> Result<(f64, Option<f64>)> {
    let mut js_total = 0.0;
    let mut count = 0usize;
    let mut corr = Vec::new();
    for o in eval {
        let gt = &targets[*o];
        let mut per_template = BTreeMap::new();
        for (t, v) in embs.for_object(o) {
            let p = probe.predict(v)?;
            js_total += js_divergence(&p, gt);
            count += 1;
            per_template.insert(t.to_owned(), p);
        }
        if let Ok((_, best, _)) = best_template(o, &per_template, gt) {
            if let Some(a) = avg_correlation(spearman(best, gt), kendall(best, gt)) {
                corr.push(100.0 * a);
            }
        }
    }
    Ok((js_total / count as f64, Stat::of(&corr).map(|s| s.mean)))
}

/// Trains one probe per (seed, size) on nested prefixes of a per-seed
/// shuffle of the training objects, and evaluates each on the held-out
/// objects.
pub fn loss_data_curve(
    embs: &EmbeddingSet,
    targets: &BTreeMap<String, ColorDistribution>,
    train_objects: &[String],
    eval_objects: &[String],
    schedule: &[usize],
    cfg: &ProbeConfig,
) -> Result<ProbingRun> {
    cfg.validate()?;
    let train: BTreeSet<&str> = train_objects.iter().map(String::as_str).collect();
    let eval: BTreeSet<&str> = eval_objects.iter().map(String::as_str).collect();
    let overlap: Vec<String> = train.intersection(&eval).map(|s| s.to_string()).collect();
    if !overlap.is_empty() {
        return Err(Error::SplitOverlap(overlap));
    }
    if eval.is_empty() {
        return Err(Error::Empty("no evaluation objects"));
    }
    let with_vectors = embs.objects();
    let missing: Vec<String> = train
        .iter()
        .chain(eval.iter())
        .filter(|o| !with_vectors.contains(*o) || !targets.contains_key(**o))
        .map(|o| o.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::CoverageGap(missing));
    }
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::Config("schedule must be positive and strictly increasing".into()));
    }
    let n_max = *schedule.last().expect("non-empty");
    if n_max > train.len() {
        return Err(Error::Config(format!(
            "schedule needs {n_max} training objects, only {} available",
            train.len()
        )));
    }

    let eval: Vec<&str> = eval.into_iter().collect();
    let eval_samples = samples_for(embs, targets, &eval);
    let uniform = ColorDistribution::uniform();
    let prior_loss = eval_samples
        .targets
        .iter()
        .map(|t| js_divergence(&uniform, t))
        .sum::<f64>()
        / eval_samples.targets.len() as f64;

    let orders: Vec<Vec<&str>> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            let mut order: Vec<&str> = train.iter().copied().collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            order
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..cfg.seeds.len())
        .flat_map(|s| (0..schedule.len()).map(move |i| (s, i)))
        .collect();
    let results: Vec<Result<(f64, Option<f64>)>> = tasks
        .par_iter()
        .map(|&(s, i)| {
            let subset = &orders[s][..schedule[i]];
            let data = samples_for(embs, targets, subset);
            let probe = train_probe(&data.inputs, &data.targets, cfg, mix_seed(cfg.seeds[s], schedule[i]))?;
            evaluate_probe(&probe, embs, targets, &eval)
        })
        .collect();

    let mut losses = vec![vec![0.0; schedule.len()]; cfg.seeds.len()];
    let mut avg_corr = vec![vec![None; schedule.len()]; cfg.seeds.len()];
    for (&(s, i), r) in tasks.iter().zip(results) {
        let (loss, corr) = r?;
        losses[s][i] = loss;
        avg_corr[s][i] = corr;
    }
    Ok(ProbingRun {
        curve: LossDataCurve {
            sizes: schedule.to_vec(),
            losses,
            prior_loss,
        },
        avg_corr,
        eval_objects: eval.len(),
        eval_samples: eval_samples.inputs.len(),
    })
}

/// One (model, n) row of the representation-quality table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReprRow {
    pub model: String,
    pub n: usize,
    pub epsilon: f64,
    pub d_js: f64,
    pub mdl: f64,
    pub sdl: Sdl,
    pub esc: Esc,
    pub avg_corr: Option<f64>,
}

/// One point of the plot data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub model: String,
    pub n: usize,
    pub mean_loss: f64,
    pub std_loss: f64,
    pub mean_avg_corr: Option<f64>,
}

/// Default table sizes: 13 when scheduled (else the fifth size), and n_max.
pub fn default_report_sizes(schedule: &[usize]) -> Vec<usize> {
    let mut sizes = Vec::new();
    if schedule.contains(&13) {
        sizes.push(13);
    } else if schedule.len() > 4 {
        sizes.push(schedule[4]);
    }
    if let Some(&last) = schedule.last() {
        if !sizes.contains(&last) {
            sizes.push(last);
        }
    }
    sizes
}

/// Table rows at each requested size (measures computed on the curve
/// truncated at that size) and the full plot series, for every model.
pub fn repr_report(
    runs: &[(String, ProbingRun)],
    epsilon: f64,
    report_sizes: &[usize],
) -> Result<(Vec<ReprRow>, Vec<CurvePoint>)> {
    if runs.is_empty() {
        return Err(Error::Empty("representation report needs at least one run"));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (model, run) in runs {
        let mean = run.curve.mean_losses();
        let std = run.curve.std_losses();
        let corr = run.mean_avg_corr();
        for &n in report_sizes {
            let i = run
                .curve
                .sizes
                .iter()
                .position(|&s| s == n)
                .ok_or_else(|| Error::Config(format!("report size {n} is not in the schedule")))?;
            let curve = run.curve.truncate(n)?;
            rows.push(ReprRow {
                model: model.clone(),
                n,
                epsilon,
                d_js: mean[i],
                mdl: mdl(&curve),
                sdl: sdl(&curve, epsilon),
                esc: esc(&curve, epsilon),
                avg_corr: corr[i],
            });
        }
        for (i, &n) in run.curve.sizes.iter().enumerate() {
            points.push(CurvePoint {
                model: model.clone(),
                n,
                mean_loss: mean[i],
                std_loss: std[i],
                mean_avg_corr: corr[i],
            });
        }
    }
    Ok((rows, points))
}

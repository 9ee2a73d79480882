//! Zero-shot probing: template expansion, score normalization, and the
//! per-object / per-group metric suite.
//!
//! Correlations are reported on the ×100 scale throughout this module's
//! report types. Undefined coefficients stay `None` and the affected objects
//! are counted rather than scored as zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{Group, ObjectRecord};
use crate::color::{js_divergence, Color, ColorDistribution, NUM_COLORS};
use crate::error::{Error, Result};
use crate::rank::{kendall_tau_b, spearman as spearman_raw};

pub const OBJECT_SLOT: &str = "<OBJ>";
pub const COLOR_SLOT: &str = "<C>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Decoder,
    Encoder,
    Clip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Singular,
    Plural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub text: String,
    pub number: Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub family: Family,
    pub templates: Vec<Template>,
}

impl TemplateSet {
    pub fn from_json(text: &str) -> Result<Self> {
        let set: TemplateSet = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        set.validate()?;
        Ok(set)
    }

    pub fn default_for(family: Family) -> Self {
        let text = match family {
            Family::Decoder => include_str!("../templates/decoder.json"),
            Family::Encoder => include_str!("../templates/encoder.json"),
            Family::Clip => include_str!("../templates/clip.json"),
        };
        Self::from_json(text).expect("bundled templates are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for t in &self.templates {
            let err = |reason: &str| Error::Template {
                id: t.id.clone(),
                reason: reason.to_owned(),
            };
            if !ids.insert(t.id.as_str()) {
                return Err(err("duplicate template id"));
            }
            if t.text.matches(OBJECT_SLOT).count() != 1 {
                return Err(err("must contain exactly one object slot"));
            }
            let colors = t.text.matches(COLOR_SLOT).count();
            match self.family {
                Family::Clip if colors != 0 => return Err(err("clip templates take no color slot")),
                Family::Decoder | Family::Encoder if colors != 1 => {
                    return Err(err("must contain exactly one color slot"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One expanded prompt, as consumed by the model adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub object: String,
    pub template: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub color: Option<Color>,
}

fn starts_with_vowel(word: &str) -> bool {
    word.chars()
        .next()
        .is_some_and(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'))
}

/// Substitutes the object, fixing an `a`/`an` article right before the slot.
fn fill_object(text: &str, surface: &str) -> String {
    let (prefix, suffix) = text.split_once(OBJECT_SLOT).expect("validated template");
    let mut prefix = prefix.to_owned();
    let trimmed = prefix.trim_end();
    let word_start = trimmed.rfind(' ').map_or(0, |i| i + 1);
    let article = &trimmed[word_start..];
    if matches!(article.to_ascii_lowercase().as_str(), "a" | "an") {
        let mut fixed = if starts_with_vowel(surface) { "an" } else { "a" }.to_owned();
        if article.starts_with('A') {
            fixed[..1].make_ascii_uppercase();
        }
        let tail = prefix[trimmed.len()..].to_owned();
        prefix.truncate(word_start);
        prefix.push_str(&fixed);
        prefix.push_str(&tail);
    }
    let mut out = format!("{prefix}{surface}{suffix}");
    if let Some(first) = out.chars().next() {
        if first.is_lowercase() {
            let upper: String = first.to_uppercase().collect();
            out.replace_range(..first.len_utf8(), &upper);
        }
    }
    out
}

/// Instantiates every template for every object. Decoder templates also get
/// eleven full sentences, one per color.
pub fn expand(objects: &[ObjectRecord], ts: &TemplateSet) -> Result<Vec<Prompt>> {
    let mut prompts = Vec::new();
    for o in objects {
        for t in &ts.templates {
            let surface = match t.number {
                Number::Singular => &o.singular,
                Number::Plural => &o.plural,
            };
            if surface.trim().is_empty() {
                return Err(Error::MissingField {
                    object: o.object_id.clone(),
                    what: match t.number {
                        Number::Singular => "singular form",
                        Number::Plural => "plural form",
                    },
                });
            }
            let text = fill_object(&t.text, surface);
            if ts.family == Family::Decoder {
                for c in Color::ALL {
                    prompts.push(Prompt {
                        object: o.object_id.clone(),
                        template: t.id.clone(),
                        text: text.replace(COLOR_SLOT, c.name()),
                        color: Some(c),
                    });
                }
            }
            prompts.push(Prompt {
                object: o.object_id.clone(),
                template: t.id.clone(),
                text,
                color: None,
            });
        }
    }
    Ok(prompts)
}

/// Softmax over the 11 color scores (log-probabilities or logits).
pub fn to_distribution(scores: &[f64; NUM_COLORS], family: Family) -> Result<ColorDistribution> {
    if family == Family::Clip {
        return Err(Error::Config("clip-family models are not scored zero-shot".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore {
            object: String::new(),
            template: String::new(),
        });
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = scores.map(|s| (s - max).exp());
    let total: f64 = exp.iter().sum();
    Ok(ColorDistribution::new(exp.map(|e| e / total)).expect("softmax output"))
}

/// Spearman's rho between two distributions, on [-1, 1].
pub fn spearman(p: &ColorDistribution, q: &ColorDistribution) -> Option<f64> {
    spearman_raw(p.weights(), q.weights())
}

/// Kendall's tau-b between two distributions, on [-1, 1].
pub fn kendall(p: &ColorDistribution, q: &ColorDistribution) -> Option<f64> {
    kendall_tau_b(p.weights(), q.weights())
}

pub fn acc_at_1(pred: &ColorDistribution, gt: &ColorDistribution) -> bool {
    pred.argmax() == gt.argmax()
}

/// Picks the template whose distribution has the highest Kendall tau against
/// the ground truth. Candidates are scanned in template-id order and only a
/// strictly larger tau replaces the incumbent.
pub fn best_template<'a>(
    object: &str,
    candidates: &'a BTreeMap<String, ColorDistribution>,
    gt: &ColorDistribution,
) -> Result<(&'a str, &'a ColorDistribution, f64)> {
    if candidates.is_empty() {
        return Err(Error::Empty("best_template needs at least one template"));
    }
    let mut best: Option<(&str, &ColorDistribution, f64)> = None;
    for (id, dist) in candidates {
        if let Some(tau) = kendall(dist, gt) {
            if best.is_none_or(|(_, _, b)| tau > b) {
                best = Some((id, dist, tau));
            }
        }
    }
    best.ok_or_else(|| Error::AllCorrelationsUndefined(object.to_owned()))
}

/// Model-minus-baseline correlation on the ×100 scale. Inputs are raw
/// coefficients in [-1, 1].
pub fn delta_correlation(model: f64, baseline: f64) -> f64 {
    100.0 * (model - baseline)
}

pub fn avg_correlation(rho: Option<f64>, tau: Option<f64>) -> Option<f64> {
    Some((rho? + tau?) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub object: String,
    pub template: String,
    pub color: String,
    pub score: f64,
}

/// Color scores keyed by (object, template); every key carries all 11 colors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    scores: BTreeMap<(String, String), [f64; NUM_COLORS]>,
}

impl PredictionSet {
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = PredictionEntry>,
    {
        let mut partial: BTreeMap<(String, String), [Option<f64>; NUM_COLORS]> = BTreeMap::new();
        for e in entries {
            let color = Color::from_name(&e.color)?;
            if !e.score.is_finite() {
                return Err(Error::NonFiniteScore {
                    object: e.object,
                    template: e.template,
                });
            }
            let slot = &mut partial.entry((e.object.clone(), e.template.clone())).or_default()[color.index()];
            if slot.is_some() {
                return Err(Error::Duplicate(format!("{}/{}/{}", e.object, e.template, e.color)));
            }
            *slot = Some(e.score);
        }
        let mut scores = BTreeMap::new();
        for ((object, template), s) in partial {
            let found = s.iter().filter(|x| x.is_some()).count();
            if found != NUM_COLORS {
                return Err(Error::IncompletePrediction { object, template, found });
            }
            scores.insert((object, template), s.map(|x| x.expect("complete")));
        }
        Ok(Self { scores })
    }

    pub fn insert(&mut self, object: &str, template: &str, scores: [f64; NUM_COLORS]) {
        self.scores.insert((object.to_owned(), template.to_owned()), scores);
    }

    pub fn objects(&self) -> BTreeSet<&str> {
        self.scores.keys().map(|(o, _)| o.as_str()).collect()
    }

    pub fn templates_for<'a>(&'a self, object: &'a str) -> impl Iterator<Item = (&'a str, &'a [f64; NUM_COLORS])> + 'a {
        self.scores
            .range((object.to_owned(), String::new())..)
            .take_while(move |((o, _), _)| o == object)
            .map(|((_, t), s)| (t.as_str(), s))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Metrics for one object. Correlations are on the ×100 scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectMetrics {
    pub object: String,
    pub group: Option<Group>,
    pub template: Option<String>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub hit: bool,
    pub js: f64,
    pub baseline_spearman: Option<f64>,
    pub baseline_kendall: Option<f64>,
    pub delta_rho: Option<f64>,
    pub delta_tau: Option<f64>,
    pub avg_corr: Option<f64>,
}

/// Mean and sample standard deviation over the objects where a metric is
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    /// `single`, `multi`, `any`, or `all`.
    pub group: String,
    pub n_objects: usize,
    pub spearman: Option<Stat>,
    pub kendall: Option<Stat>,
    /// Percentage of objects whose modal color is recovered.
    pub acc_at_1: Option<Stat>,
    pub js: Option<Stat>,
    pub delta_rho: Option<Stat>,
    pub delta_tau: Option<Stat>,
    pub avg_corr: Option<Stat>,
    pub undefined_correlation: usize,
    pub excluded_from_delta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub objects: Vec<ObjectMetrics>,
    pub groups: Vec<GroupSummary>,
    /// Objects without a usable baseline distribution (only counted when a
    /// baseline is supplied).
    pub excluded_no_baseline: usize,
}

impl MetricReport {
    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.group == name)
    }
}

/// Scores a single predicted distribution against the ground truth and an
/// optional baseline distribution.
pub fn score_object(
    object: &ObjectRecord,
    template: Option<String>,
    pred: &ColorDistribution,
    baseline: Option<&ColorDistribution>,
) -> ObjectMetrics {
    let gt = &object.ground_truth;
    let rho = spearman(pred, gt);
    let tau = kendall(pred, gt);
    let b_rho = baseline.and_then(|b| spearman(b, gt));
    let b_tau = baseline.and_then(|b| kendall(b, gt));
    let delta = |m: Option<f64>, b: Option<f64>| Some(delta_correlation(m?, b?));
    let scale = |x: Option<f64>| x.map(|v| 100.0 * v);
    ObjectMetrics {
        object: object.object_id.clone(),
        group: object.group,
        template,
        spearman: scale(rho),
        kendall: scale(tau),
        hit: acc_at_1(pred, gt),
        js: js_divergence(pred, gt),
        baseline_spearman: scale(b_rho),
        baseline_kendall: scale(b_tau),
        delta_rho: delta(rho, b_rho),
        delta_tau: delta(tau, b_tau),
        avg_corr: scale(avg_correlation(rho, tau)),
    }
}

fn summarize(name: &str, rows: &[&ObjectMetrics], with_baseline: bool) -> GroupSummary {
    let collect = |f: &dyn Fn(&ObjectMetrics) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(|r| f(r)).collect() };
    let hits: Vec<f64> = rows.iter().map(|r| if r.hit { 100.0 } else { 0.0 }).collect();
    GroupSummary {
        group: name.to_owned(),
        n_objects: rows.len(),
        spearman: Stat::of(&collect(&|r| r.spearman)),
        kendall: Stat::of(&collect(&|r| r.kendall)),
        acc_at_1: Stat::of(&hits),
        js: Stat::of(&collect(&|r| Some(r.js))),
        delta_rho: Stat::of(&collect(&|r| r.delta_rho)),
        delta_tau: Stat::of(&collect(&|r| r.delta_tau)),
        avg_corr: Stat::of(&collect(&|r| r.avg_corr)),
        undefined_correlation: rows.iter().filter(|r| r.spearman.is_none() || r.kendall.is_none()).count(),
        excluded_from_delta: if with_baseline {
            rows.iter().filter(|r| r.delta_rho.is_none() || r.delta_tau.is_none()).count()
        } else {
            0
        },
    }
}

/// Aggregates per-object metrics into per-group rows plus an `all` row.
pub fn report_from_objects(mut objects: Vec<ObjectMetrics>, baseline_supplied: bool) -> MetricReport {
    objects.sort_by(|a, b| a.object.cmp(&b.object));
    let mut groups = Vec::new();
    for g in Group::ALL {
        let rows: Vec<&ObjectMetrics> = objects.iter().filter(|o| o.group == Some(g)).collect();
        if !rows.is_empty() {
            groups.push(summarize(g.name(), &rows, baseline_supplied));
        }
    }
    let all: Vec<&ObjectMetrics> = objects.iter().collect();
    groups.push(summarize("all", &all, baseline_supplied));
    let excluded_no_baseline = if baseline_supplied {
        objects.iter().filter(|o| o.baseline_kendall.is_none() && o.baseline_spearman.is_none()).count()
    } else {
        0
    };
    MetricReport {
        objects,
        groups,
        excluded_no_baseline,
    }
}

/// Full zero-shot evaluation: per object, softmax each template's scores,
/// keep the template with the best Kendall tau, and score it.
///
/// `baseline` maps objects to their n-gram distribution; objects missing
/// from it (or mapped to `None`) are left out of the delta metrics.
pub fn evaluate(
    preds: &PredictionSet,
    family: Family,
    dataset: &[ObjectRecord],
    baseline: Option<&BTreeMap<String, Option<ColorDistribution>>>,
) -> Result<MetricReport> {
    let covered = preds.objects();
    let gaps: Vec<String> = dataset
        .iter()
        .filter(|o| !covered.contains(o.object_id.as_str()))
        .map(|o| o.object_id.clone())
        .collect();
    if !gaps.is_empty() {
        return Err(Error::CoverageGap(gaps));
    }

    let rows: Result<Vec<ObjectMetrics>> = dataset
        .par_iter()
        .map(|o| {
            let mut dists = BTreeMap::new();
            for (template, scores) in preds.templates_for(&o.object_id) {
                let d = to_distribution(scores, family).map_err(|e| match e {
                    Error::NonFiniteScore { .. } => Error::NonFiniteScore {
                        object: o.object_id.clone(),
                        template: template.to_owned(),
                    },
                    e => e,
                })?;
                dists.insert(template.to_owned(), d);
            }
            let (template, pred) = match best_template(&o.object_id, &dists, &o.ground_truth) {
                Ok((t, d, _)) => (t.to_owned(), *d),
                Err(Error::AllCorrelationsUndefined(_)) => {
                    let (t, d) = dists.iter().next().expect("covered object has a template");
                    (t.clone(), *d)
                }
                Err(e) => return Err(e),
            };
            let base = baseline.and_then(|b| b.get(&o.object_id)).and_then(|d| d.as_ref());
            Ok(score_object(o, Some(template), &pred, base))
        })
        .collect();
    Ok(report_from_objects(rows?, baseline.is_some()))
}

/// Scores fixed per-object distributions (for example n-gram derived ones)
/// against the ground truth. Objects without a distribution are skipped and
/// returned by id.
pub fn evaluate_distributions(
    dists: &BTreeMap<String, Option<ColorDistribution>>,
    dataset: &[ObjectRecord],
) -> (MetricReport, Vec<String>) {
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for o in dataset {
        match dists.get(&o.object_id).and_then(|d| d.as_ref()) {
            Some(d) => rows.push(score_object(o, None, d, None)),
            None => missing.push(o.object_id.clone()),
        }
    }
    (report_from_objects(rows, false), missing)
}

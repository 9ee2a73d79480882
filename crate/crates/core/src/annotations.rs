//! Crowdsourced rating aggregation: HIT-level control gate, per-object
//! iterative Kendall filter, dataset assembly and stratified splits.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{normalize, Color, ColorDistribution, NUM_COLORS};
use crate::error::{Error, Result};
use crate::rank::kendall_tau_b;

pub const DEFAULT_CONTROL_OBJECT: &str = "spinach";
pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;

/// Share of green the control object must strictly exceed.
pub const CONTROL_GREEN_THRESHOLD: f64 = 0.5;

/// Eleven ratings in `1..=5`, aligned to the canonical color order.
///
/// A rating of 1 is the bottom of the scale ("never this color") and carries
/// zero probability mass; rating `r` maps to weight `r - 1` before
/// normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Ratings([u8; NUM_COLORS]);

impl Ratings {
    pub fn new(values: [u8; NUM_COLORS]) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(MIN_RATING..=MAX_RATING).contains(*v)) {
            return Err(Error::Config(format!("rating {v} outside {MIN_RATING}..={MAX_RATING}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u8; NUM_COLORS] {
        &self.0
    }

    /// Normalized color distribution; all-minimum ratings are degenerate.
    pub fn distribution(&self) -> Result<ColorDistribution> {
        normalize(&self.0.map(|r| f64::from(r - MIN_RATING)))
    }
}

impl<'de> Deserialize<'de> for Ratings {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = <[u8; NUM_COLORS]>::deserialize(deserializer)?;
        Ratings::new(values).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub worker_id: String,
    pub object_id: String,
    /// `None` when the worker pressed skip.
    pub ratings: Option<Ratings>,
    pub seconds: Option<f64>,
}

impl AnnotationRecord {
    pub fn is_skipped(&self) -> bool {
        self.ratings.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitSubmission {
    pub worker_id: String,
    pub control_object_id: String,
    pub records: Vec<AnnotationRecord>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    object: String,
    ratings: Option<Ratings>,
    #[serde(default)]
    seconds: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RawHit {
    worker_id: String,
    #[serde(default = "default_control")]
    control: String,
    records: Vec<RawRecord>,
}

fn default_control() -> String {
    DEFAULT_CONTROL_OBJECT.to_owned()
}

impl HitSubmission {
    /// Parses one line of the raw-annotation JSON Lines format.
    pub fn from_json(line: &str) -> serde_json::Result<Self> {
        let raw: RawHit = serde_json::from_str(line)?;
        let records = raw
            .records
            .into_iter()
            .map(|r| AnnotationRecord {
                worker_id: raw.worker_id.clone(),
                object_id: r.object,
                ratings: r.ratings,
                seconds: r.seconds,
            })
            .collect();
        Ok(Self {
            worker_id: raw.worker_id,
            control_object_id: raw.control,
            records,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    NoControl,
    DuplicateControl,
    DegenerateControl,
    ControlFailed { green_share: f64 },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NoControl => f.write_str("no control"),
            RejectReason::DuplicateControl => f.write_str("duplicate control"),
            RejectReason::DegenerateControl => f.write_str("degenerate control rating"),
            RejectReason::ControlFailed { green_share } => {
                write!(f, "control green share {green_share:.4} not above {CONTROL_GREEN_THRESHOLD}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HitVerdict {
    Accept,
    Reject(RejectReason),
}

/// Accepts a HIT iff its control record puts strictly more than half of its
/// mass on green.
pub fn validate_hit(sub: &HitSubmission) -> HitVerdict {
    let mut controls = sub.records.iter().filter(|r| r.object_id == sub.control_object_id);
    let control = match (controls.next(), controls.next()) {
        (None, _) => return HitVerdict::Reject(RejectReason::NoControl),
        (Some(_), Some(_)) => return HitVerdict::Reject(RejectReason::DuplicateControl),
        (Some(c), None) => c,
    };
    let Some(ratings) = control.ratings else {
        return HitVerdict::Reject(RejectReason::NoControl);
    };
    let Ok(dist) = ratings.distribution() else {
        return HitVerdict::Reject(RejectReason::DegenerateControl);
    };
    let green_share = dist.get(Color::Green);
    if green_share > CONTROL_GREEN_THRESHOLD {
        HitVerdict::Accept
    } else {
        HitVerdict::Reject(RejectReason::ControlFailed { green_share })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Removal {
    /// Index into the annotation list passed to [`aggregate_object`].
    pub index: usize,
    /// 1-based filtering round in which the annotation was dropped.
    pub round: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub ground_truth: ColorDistribution,
    pub retained: Vec<usize>,
    pub removed: Vec<Removal>,
    pub skipped: Vec<usize>,
    /// Non-skipped annotations whose ratings carry no mass (all at the
    /// scale minimum).
    pub degenerate: Vec<usize>,
    pub rounds: usize,
}

/// Averages normalized annotations, iteratively dropping every annotation
/// whose Kendall tau-b against the current mean is negative.
///
/// Each round removes all offenders at once, so the result does not depend
/// on annotation order. An annotation whose tau is undefined (a flat rating
/// vector) is kept.
pub fn aggregate_object(object_id: &str, anns: &[AnnotationRecord]) -> Result<Aggregate> {
    let mut skipped = Vec::new();
    let mut degenerate = Vec::new();
    let mut live: Vec<(usize, ColorDistribution)> = Vec::new();
    for (i, a) in anns.iter().enumerate() {
        match a.ratings.map(|r| r.distribution()) {
            None => skipped.push(i),
            Some(Err(_)) => degenerate.push(i),
            Some(Ok(d)) => live.push((i, d)),
        }
    }
    if live.is_empty() {
        return Err(Error::ObjectUnusable(object_id.to_owned()));
    }

    let mut removed = Vec::new();
    let mut rounds = 0;
    loop {
        let mean = ColorDistribution::mean(live.iter().map(|(_, d)| d)).expect("non-empty");
        rounds += 1;
        let mut keep = Vec::with_capacity(live.len());
        for (i, d) in live.drain(..) {
            match kendall_tau_b(d.weights(), mean.weights()) {
                Some(tau) if tau < 0.0 => removed.push(Removal { index: i, round: rounds, tau }),
                _ => keep.push((i, d)),
            }
        }
        let dropped_any = removed.last().is_some_and(|r| r.round == rounds);
        live = keep;
        if live.is_empty() {
            return Err(Error::ObjectUnusable(object_id.to_owned()));
        }
        if !dropped_any {
            return Ok(Aggregate {
                ground_truth: mean,
                retained: live.iter().map(|(i, _)| *i).collect(),
                removed,
                skipped,
                degenerate,
                rounds,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Single,
    Multi,
    Any,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Single, Group::Multi, Group::Any];

    pub fn name(self) -> &'static str {
        match self {
            Group::Single => "single",
            Group::Multi => "multi",
            Group::Any => "any",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?}")))
    }
}

/// Singular and plural surface forms of an object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceForms {
    pub singular: String,
    pub plural: String,
}

pub type Lexicon = BTreeMap<String, SurfaceForms>;

/// One line of the object lexicon file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub object: String,
    pub singular: String,
    pub plural: String,
}

/// One object of the dataset, as written to the dataset JSON Lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    #[serde(rename = "object")]
    pub object_id: String,
    pub singular: String,
    pub plural: String,
    #[serde(skip)]
    pub annotations: Vec<AnnotationRecord>,
    #[serde(rename = "gt")]
    pub ground_truth: ColorDistribution,
    pub group: Option<Group>,
    pub split: Option<Split>,
    pub n_annotations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedHit {
    pub hit_index: usize,
    pub worker_id: String,
    #[serde(flatten)]
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovedAnnotation {
    pub object: String,
    pub worker_id: String,
    pub reason: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QcReport {
    pub hits_total: usize,
    pub hits_accepted: usize,
    pub rejected_hits: Vec<RejectedHit>,
    pub removed_annotations: Vec<RemovedAnnotation>,
    pub skipped_annotations: usize,
    /// Objects whose every annotation was skipped, degenerate or filtered.
    pub unusable_objects: Vec<String>,
}

/// Runs the control gate over all HITs, then aggregates each object.
///
/// Control records from accepted HITs count as ordinary annotations of the
/// control object when the lexicon contains it, and are dropped otherwise.
pub fn assemble_dataset(hits: &[HitSubmission], lexicon: &Lexicon) -> Result<(Vec<ObjectRecord>, QcReport)> {
    let mut report = QcReport {
        hits_total: hits.len(),
        ..QcReport::default()
    };
    let mut per_object: BTreeMap<&str, Vec<AnnotationRecord>> = BTreeMap::new();

    for (hit_index, hit) in hits.iter().enumerate() {
        for r in &hit.records {
            if r.object_id != hit.control_object_id && !lexicon.contains_key(&r.object_id) {
                return Err(Error::UnknownObject(r.object_id.clone()));
            }
        }
        match validate_hit(hit) {
            HitVerdict::Reject(reason) => {
                report.rejected_hits.push(RejectedHit {
                    hit_index,
                    worker_id: hit.worker_id.clone(),
                    reason,
                });
                continue;
            }
            HitVerdict::Accept => report.hits_accepted += 1,
        }
        for r in &hit.records {
            if let Some((id, _)) = lexicon.get_key_value(&r.object_id) {
                per_object.entry(id.as_str()).or_default().push(r.clone());
            }
        }
    }

    let results: Vec<(&str, Vec<AnnotationRecord>, Result<Aggregate>)> = per_object
        .into_par_iter()
        .map(|(id, anns)| {
            let agg = aggregate_object(id, &anns);
            (id, anns, agg)
        })
        .collect();

    let mut dataset = Vec::with_capacity(results.len());
    for (id, anns, agg) in results {
        report.skipped_annotations += anns.iter().filter(|a| a.is_skipped()).count();
        let agg = match agg {
            Ok(agg) => agg,
            Err(Error::ObjectUnusable(_)) => {
                report.unusable_objects.push(id.to_owned());
                continue;
            }
            Err(e) => return Err(e),
        };
        for &i in &agg.degenerate {
            report.removed_annotations.push(RemovedAnnotation {
                object: id.to_owned(),
                worker_id: anns[i].worker_id.clone(),
                reason: "degenerate ratings",
                round: None,
                tau: None,
            });
        }
        for r in &agg.removed {
            report.removed_annotations.push(RemovedAnnotation {
                object: id.to_owned(),
                worker_id: anns[r.index].worker_id.clone(),
                reason: "negative kendall tau",
                round: Some(r.round),
                tau: Some(r.tau),
            });
        }
        let forms = &lexicon[id];
        let retained: Vec<AnnotationRecord> = agg.retained.iter().map(|&i| anns[i].clone()).collect();
        dataset.push(ObjectRecord {
            object_id: id.to_owned(),
            singular: forms.singular.clone(),
            plural: forms.plural.clone(),
            n_annotations: retained.len(),
            annotations: retained,
            ground_truth: agg.ground_truth,
            group: None,
            split: None,
        });
    }
    Ok((dataset, report))
}

/// Per-group (train, val, test) counts of the reference dataset.
pub const REFERENCE_SPLITS: [(Group, [usize; 3]); 3] = [
    (Group::Single, [118, 39, 41]),
    (Group::Multi, [124, 41, 43]),
    (Group::Any, [69, 23, 23]),
];

/// Largest-remainder allocation of `n` objects in the reference proportions
/// of `group`. Exact for the reference group sizes.
pub fn split_counts(group: Group, n: usize) -> [usize; 3] {
    let reference = REFERENCE_SPLITS
        .iter()
        .find(|(g, _)| *g == group)
        .map(|(_, c)| *c)
        .expect("every group has reference counts");
    let total: usize = reference.iter().sum();
    let mut counts = [0usize; 3];
    let mut remainders = [(0usize, 0usize); 3];
    for (s, r) in reference.iter().enumerate() {
        counts[s] = n * r / total;
        remainders[s] = ((n * r) % total, s);
    }
    let mut left = n - counts.iter().sum::<usize>();
    // larger remainder first, then canonical split order
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, s) in remainders.iter() {
        if left == 0 {
            break;
        }
        counts[s] += 1;
        left -= 1;
    }
    counts
}

/// Stratified random split per group, deterministic for a given seed.
pub fn make_splits(objects: &[ObjectRecord], seed: u64) -> Result<BTreeMap<String, Split>> {
    let mut by_group: BTreeMap<Group, Vec<&str>> = BTreeMap::new();
    for o in objects {
        let group = o.group.ok_or_else(|| Error::MissingField {
            object: o.object_id.clone(),
            what: "group",
        })?;
        by_group.entry(group).or_default().push(&o.object_id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    for group in Group::ALL {
        let Some(mut ids) = by_group.remove(&group) else {
            continue;
        };
        ids.sort_unstable();
        ids.dedup();
        let n = ids.len();
        let counts = split_counts(group, n);
        if counts.contains(&0) {
            let needed = (n..).find(|&m| !split_counts(group, m).contains(&0)).expect("finite");
            return Err(Error::SplitTooSmall {
                group: group.to_string(),
                available: n,
                needed,
            });
        }
        ids.shuffle(&mut rng);
        let mut it = ids.into_iter();
        for (split, count) in Split::ALL.into_iter().zip(counts) {
            for id in it.by_ref().take(count) {
                assignment.insert(id.to_owned(), split);
            }
        }
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(worker: &str, object: &str, ratings: Option<[u8; NUM_COLORS]>) -> AnnotationRecord {
        AnnotationRecord {
            worker_id: worker.into(),
            object_id: object.into(),
            ratings: ratings.map(|r| Ratings::new(r).unwrap()),
            seconds: None,
        }
    }

    /// Ratings with green at `g` and the other colors at `rest`.
    fn spinach(g: u8, rest: [u8; 10]) -> [u8; NUM_COLORS] {
        let mut r = [0u8; NUM_COLORS];
        let mut it = rest.into_iter();
        for (i, slot) in r.iter_mut().enumerate() {
            *slot = if i == Color::Green.index() { g } else { it.next().unwrap() };
        }
        r
    }

    fn hit(worker: &str, control: Option<[u8; NUM_COLORS]>) -> HitSubmission {
        let mut records = vec![rec(worker, "banana", Some([1, 1, 5, 3, 1, 1, 1, 1, 1, 1, 2]))];
        if let Some(c) = control {
            records.push(rec(worker, "spinach", Some(c)));
        }
        HitSubmission {
            worker_id: worker.into(),
            control_object_id: "spinach".into(),
            records,
        }
    }

    #[test]
    fn rating_range_enforced() {
        assert!(Ratings::new([0; NUM_COLORS]).is_err());
        assert!(Ratings::new([6; NUM_COLORS]).is_err());
        assert!(Ratings::new([1; NUM_COLORS]).unwrap().distribution().is_err());
        let d = Ratings::new([3; NUM_COLORS]).unwrap().distribution().unwrap();
        assert_eq!(d, ColorDistribution::uniform());
    }

    #[test]
    fn control_gate_threshold() {
        // green weight 3 (rating 4), other mass 2 → share 0.60
        let accept = hit("a", Some(spinach(4, [2, 2, 1, 1, 1, 1, 1, 1, 1, 1])));
        assert_eq!(validate_hit(&accept), HitVerdict::Accept);

        // green weight 2 (rating 3), other mass 2 → share exactly 0.50
        let at_threshold = hit("b", Some(spinach(3, [2, 2, 1, 1, 1, 1, 1, 1, 1, 1])));
        assert!(matches!(
            validate_hit(&at_threshold),
            HitVerdict::Reject(RejectReason::ControlFailed { green_share }) if green_share == 0.5
        ));

        let mut skipped = hit("c", None);
        skipped.records.push(rec("c", "spinach", None));
        assert_eq!(validate_hit(&skipped), HitVerdict::Reject(RejectReason::NoControl));
        assert_eq!(validate_hit(&hit("d", None)), HitVerdict::Reject(RejectReason::NoControl));

        let flat = hit("e", Some([1; NUM_COLORS]));
        assert_eq!(validate_hit(&flat), HitVerdict::Reject(RejectReason::DegenerateControl));
    }

    #[test]
    fn single_annotation_is_its_own_ground_truth() {
        let r = [5, 1, 2, 1, 1, 1, 1, 1, 1, 1, 1];
        let agg = aggregate_object("x", &[rec("w", "x", Some(r))]).unwrap();
        assert_eq!(agg.ground_truth, Ratings::new(r).unwrap().distribution().unwrap());
        assert!(agg.removed.is_empty());
        assert_eq!(agg.retained, vec![0]);
    }

    #[test]
    fn stop_sign_confusion_removed() {
        // consensus: red, then white and black, other colors low, yellow and green lowest
        let sign = [5, 2, 1, 1, 2, 2, 2, 3, 4, 2, 2];
        let sign2 = [5, 2, 1, 1, 2, 2, 2, 2, 4, 2, 2];
        let light = [5, 1, 5, 5, 1, 1, 1, 1, 1, 1, 1];
        let mut anns: Vec<_> = (0..4).map(|i| rec(&format!("w{i}"), "stop sign", Some(sign))).collect();
        anns.push(rec("w4", "stop sign", Some(sign2)));
        anns.push(rec("d", "stop sign", Some(light)));
        let agg = aggregate_object("stop sign", &anns).unwrap();
        assert_eq!(agg.removed.iter().map(|r| r.index).collect::<Vec<_>>(), vec![5]);
        assert!(agg.removed[0].tau < 0.0);
        assert_eq!(agg.retained, vec![0, 1, 2, 3, 4]);
        assert_eq!(agg.ground_truth.argmax(), Color::Red);
    }

    #[test]
    fn all_skipped_is_unusable() {
        let anns = [rec("a", "x", None), rec("b", "x", None)];
        assert!(matches!(aggregate_object("x", &anns), Err(Error::ObjectUnusable(_))));
        assert!(matches!(aggregate_object("x", &[]), Err(Error::ObjectUnusable(_))));
    }

    #[test]
    fn skipped_and_degenerate_excluded() {
        let anns = [
            rec("a", "x", None),
            rec("b", "x", Some([1; NUM_COLORS])),
            rec("c", "x", Some([5, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1])),
        ];
        let agg = aggregate_object("x", &anns).unwrap();
        assert_eq!(agg.skipped, vec![0]);
        assert_eq!(agg.degenerate, vec![1]);
        assert_eq!(agg.retained, vec![2]);
    }

    fn lexicon() -> Lexicon {
        ["banana", "spinach"]
            .into_iter()
            .map(|o| {
                (
                    o.to_owned(),
                    SurfaceForms {
                        singular: o.into(),
                        plural: format!("{o}s"),
                    },
                )
            })
            .collect()
    }

    #[test]
    fn assemble_empty() {
        let (ds, report) = assemble_dataset(&[], &lexicon()).unwrap();
        assert!(ds.is_empty());
        assert_eq!(report, QcReport::default());
    }

    #[test]
    fn assemble_drops_rejected_hit() {
        let good = hit("good", Some(spinach(5, [1; 10])));
        let bad = hit("bad", Some(spinach(1, [5; 10])));
        let (ds, report) = assemble_dataset(&[good, bad], &lexicon()).unwrap();
        assert_eq!(report.hits_accepted, 1);
        assert_eq!(report.rejected_hits.len(), 1);
        assert_eq!(report.rejected_hits[0].worker_id, "bad");
        assert_eq!(ds.len(), 2);
        assert!(ds.iter().all(|o| o.n_annotations == 1 && o.annotations[0].worker_id == "good"));
    }

    #[test]
    fn assemble_unknown_object() {
        let mut h = hit("a", Some(spinach(5, [1; 10])));
        h.records.push(rec("a", "zeppelin", Some([3; NUM_COLORS])));
        match assemble_dataset(&[h], &lexicon()) {
            Err(Error::UnknownObject(id)) => assert_eq!(id, "zeppelin"),
            other => panic!("expected unknown object, got {other:?}"),
        }
    }

    #[test]
    fn split_counts_match_reference_sizes() {
        assert_eq!(split_counts(Group::Single, 198), [118, 39, 41]);
        assert_eq!(split_counts(Group::Multi, 208), [124, 41, 43]);
        assert_eq!(split_counts(Group::Any, 115), [69, 23, 23]);
        for g in Group::ALL {
            for n in 0..400 {
                assert_eq!(split_counts(g, n).iter().sum::<usize>(), n);
            }
        }
    }

    fn grouped(n_per_group: [usize; 3]) -> Vec<ObjectRecord> {
        let mut out = Vec::new();
        for (g, n) in Group::ALL.into_iter().zip(n_per_group) {
            for i in 0..n {
                out.push(ObjectRecord {
                    object_id: format!("{g}-{i:03}"),
                    singular: String::new(),
                    plural: String::new(),
                    annotations: vec![],
                    ground_truth: ColorDistribution::uniform(),
                    group: Some(g),
                    split: None,
                    n_annotations: 1,
                });
            }
        }
        out
    }

    #[test]
    fn splits_reference_totals_and_determinism() {
        let objects = grouped([198, 208, 115]);
        let a = make_splits(&objects, 13).unwrap();
        let totals = Split::ALL.map(|s| a.values().filter(|x| **x == s).count());
        assert_eq!(totals, [311, 103, 107]);
        assert_eq!(a, make_splits(&objects, 13).unwrap());
        assert_ne!(a, make_splits(&objects, 14).unwrap());
        let mut reversed = objects.clone();
        reversed.reverse();
        assert_eq!(a, make_splits(&reversed, 13).unwrap());
    }

    #[test]
    fn splits_errors() {
        assert!(matches!(make_splits(&grouped([2, 0, 0]), 0), Err(Error::SplitTooSmall { .. })));
        let mut objects = grouped([10, 10, 10]);
        objects[4].group = None;
        assert!(matches!(make_splits(&objects, 0), Err(Error::MissingField { .. })));
    }
}

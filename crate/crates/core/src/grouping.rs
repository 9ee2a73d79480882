//! k-means over sorted color profiles under the Jensen-Shannon distance,
//! and the Single/Multi/Any labeling of the resulting clusters.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::annotations::{Group, ObjectRecord};
use crate::color::{js_distance, sorted_profile, ColorDistribution, NUM_COLORS};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<ColorDistribution>,
    pub assignments: BTreeMap<String, usize>,
    /// Group label per cluster index, once [`label_clusters`] has run.
    pub labels: Option<Vec<Group>>,
    pub iterations: usize,
    pub converged: bool,
    /// Within-cluster sum of squared distances after each assignment step.
    pub objective_trace: Vec<f64>,
}

impl ClusterModel {
    /// Nearest centroid; ties go to the lowest cluster index.
    pub fn nearest(&self, profile: &ColorDistribution) -> usize {
        nearest(profile, &self.centroids).0
    }

    pub fn label_of(&self, profile: &ColorDistribution) -> Option<Group> {
        let labels = self.labels.as_ref()?;
        Some(labels[self.nearest(profile)])
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in self.assignments.values() {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn groups(&self) -> Option<BTreeMap<String, Group>> {
        let labels = self.labels.as_ref()?;
        Some(self.assignments.iter().map(|(id, &c)| (id.clone(), labels[c])).collect())
    }
}

/// Sorted profiles of every object's ground truth, keyed by object id.
pub fn profiles_of(objects: &[ObjectRecord]) -> BTreeMap<String, ColorDistribution> {
    objects
        .iter()
        .map(|o| (o.object_id.clone(), sorted_profile(&o.ground_truth)))
        .collect()
}

fn nearest(p: &ColorDistribution, centroids: &[ColorDistribution]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = js_distance(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn distinct_count(points: &[&ColorDistribution]) -> usize {
    let mut seen: Vec<[u64; NUM_COLORS]> = points.iter().map(|p| p.weights().map(f64::to_bits)).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

fn seed_centroids(points: &[&ColorDistribution], k: usize, rng: &mut ChaCha8Rng) -> Vec<ColorDistribution> {
    let mut centroids = vec![*points[rng.random_range(0..points.len())]];
    while centroids.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| nearest(p, &centroids).1.powi(2))
            .collect();
        let total: f64 = weights.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if *w > 0.0 && acc >= target {
                chosen = Some(i);
                break;
            }
        }
        // floating-point slack at the top end: take the last point with mass
        let chosen = chosen.unwrap_or_else(|| weights.iter().rposition(|w| *w > 0.0).expect("distinct points"));
        centroids.push(*points[chosen]);
    }
    centroids
}

/// Lloyd iteration with k-means++ seeding. Centroids are arithmetic means of
/// member profiles; an empty cluster is re-seeded to the point farthest from
/// its current centroid.
pub fn cluster_objects(profiles: &BTreeMap<String, ColorDistribution>, k: usize, seed: u64) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let ids: Vec<&String> = profiles.keys().collect();
    let points: Vec<&ColorDistribution> = profiles.values().collect();
    let distinct = distinct_count(&points);
    if distinct < k {
        return Err(Error::TooFewProfiles { needed: k, got: distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(&points, k, &mut rng);
    let mut assignment: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let nearest_all: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(p, &centroids)).collect();
        trace.push(nearest_all.iter().map(|(_, d)| d * d).sum());
        let next: Vec<usize> = nearest_all.iter().map(|(c, _)| *c).collect();
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
        centroids = update_centroids(&points, &assignment, &nearest_all, &centroids);
    }

    Ok(ClusterModel {
        k,
        centroids,
        assignments: ids.into_iter().cloned().zip(assignment).collect(),
        labels: None,
        iterations,
        converged,
        objective_trace: trace,
    })
}

fn update_centroids(
    points: &[&ColorDistribution],
    assignment: &[usize],
    nearest_all: &[(usize, f64)],
    previous: &[ColorDistribution],
) -> Vec<ColorDistribution> {
    let k = previous.len();
    let mut sums = vec![[0.0; NUM_COLORS]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, w) in sums[c].iter_mut().zip(p.weights()) {
            *s += w;
        }
    }
    let mut taken = vec![false; points.len()];
    let mut centroids = Vec::with_capacity(k);
    for c in 0..k {
        if counts[c] > 0 {
            let mean = sums[c].map(|s| s / counts[c] as f64);
            centroids.push(ColorDistribution::new(mean).expect("mean of distributions"));
        } else {
            let far = (0..points.len())
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if nearest_all[b].1 >= nearest_all[i].1 => Some(b),
                    _ => Some(i),
                })
                .expect("more points than clusters");
            taken[far] = true;
            centroids.push(*points[far]);
        }
    }
    centroids
}

/// Marks the cluster with the most peaked centroid Single, the flattest
/// Any, and the remaining one Multi.
pub fn label_clusters(mut model: ClusterModel) -> Result<ClusterModel> {
    if model.k != 3 || model.centroids.len() != 3 {
        return Err(Error::UnsupportedK(model.k));
    }
    let lead: Vec<f64> = model.centroids.iter().map(|c| c.weights()[0]).collect();
    if lead[0] == lead[1] || lead[1] == lead[2] || lead[0] == lead[2] {
        return Err(Error::AmbiguousExtremes);
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| lead[b].total_cmp(&lead[a]));
    let mut labels = vec![Group::Multi; 3];
    labels[order[0]] = Group::Single;
    labels[order[2]] = Group::Any;
    model.labels = Some(labels);
    Ok(model)
}

/// Adjusted Rand index between two flat clusterings of the same items.
///
/// Two trivial partitions that agree score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions of different sizes");
    let comb2 = |n: u64| n * n.saturating_sub(1) / 2;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: u64 = table.values().map(|&n| comb2(n)).sum();
    let sum_a: u64 = rows.values().map(|&n| comb2(n)).sum();
    let sum_b: u64 = cols.values().map(|&n| comb2(n)).sum();
    let total = comb2(a.len() as u64);
    if total == 0 {
        return 1.0;
    }
    let expected = sum_a as f64 * sum_b as f64 / total as f64;
    let max = 0.5 * (sum_a + sum_b) as f64;
    if max == expected {
        return if index as f64 == expected { 1.0 } else { 0.0 };
    }
    (index as f64 - expected) / (max - expected)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedPair {
    pub seed_a: u64,
    pub seed_b: u64,
    pub ari: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub k: usize,
    pub seeds: Vec<u64>,
    /// False when the profiles cannot support `k` clusters.
    pub separable: bool,
    pub pairwise: Vec<SeedPair>,
    pub min_ari: Option<f64>,
    pub cluster_sizes: Vec<Vec<usize>>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.separable && self.min_ari == Some(1.0)
    }
}

/// Clusters once per seed and compares every pair of runs by ARI, which is
/// invariant to how the runs number their clusters.
pub fn stability_check(
    profiles: &BTreeMap<String, ColorDistribution>,
    k: usize,
    seeds: &[u64],
) -> Result<StabilityReport> {
    if seeds.len() < 2 {
        return Err(Error::Config("stability check needs at least two seeds".into()));
    }
    let runs: Vec<Result<ClusterModel>> = seeds.iter().map(|&s| cluster_objects(profiles, k, s)).collect();
    let mut models = Vec::with_capacity(runs.len());
    for r in runs {
        match r {
            Ok(m) => models.push(m),
            Err(Error::TooFewProfiles { .. }) => {
                return Ok(StabilityReport {
                    k,
                    seeds: seeds.to_vec(),
                    separable: false,
                    pairwise: vec![],
                    min_ari: None,
                    cluster_sizes: vec![],
                })
            }
            Err(e) => return Err(e),
        }
    }
    let flat: Vec<Vec<usize>> = models.iter().map(|m| m.assignments.values().copied().collect()).collect();
    let mut pairwise = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            pairwise.push(SeedPair {
                seed_a: seeds[i],
                seed_b: seeds[j],
                ari: adjusted_rand_index(&flat[i], &flat[j]),
            });
        }
    }
    let min_ari = pairwise.iter().map(|p| p.ari).reduce(f64::min);
    Ok(StabilityReport {
        k,
        seeds: seeds.to_vec(),
        separable: true,
        pairwise,
        min_ari,
        cluster_sizes: models.iter().map(|m| m.cluster_sizes()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::normalize;

    fn profile(w: &[f64]) -> ColorDistribution {
        let mut raw = [0.0; NUM_COLORS];
        raw[..w.len()].copy_from_slice(w);
        sorted_profile(&normalize(&raw).unwrap())
    }

    fn three_families() -> BTreeMap<String, ColorDistribution> {
        let mut m = BTreeMap::new();
        for i in 0..5 {
            let e = i as f64 * 0.01;
            m.insert(format!("delta-{i}"), profile(&[0.9 - e, 0.05 + e, 0.05]));
            m.insert(format!("three-{i}"), profile(&[0.35 + e, 0.33, 0.32 - e]));
            m.insert(format!("flat-{i}"), profile(&[1.0 + e; NUM_COLORS]));
        }
        m
    }

    #[test]
    fn k1_centroid_is_mean() {
        let profiles = three_families();
        let model = cluster_objects(&profiles, 1, 3).unwrap();
        let mean = ColorDistribution::mean(profiles.values()).unwrap();
        for (a, b) in model.centroids[0].weights().iter().zip(mean.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(model.converged);
    }

    #[test]
    fn labels_follow_peakedness() {
        let profiles = three_families();
        let model = label_clusters(cluster_objects(&profiles, 3, 11).unwrap()).unwrap();
        let groups = model.groups().unwrap();
        for (id, g) in groups {
            let expected = match id.split('-').next().unwrap() {
                "delta" => Group::Single,
                "three" => Group::Multi,
                _ => Group::Any,
            };
            assert_eq!(g, expected, "{id}");
        }
        // lemon: 73% yellow
        let lemon = profile(&[0.05, 0.73, 0.1, 0.05, 0.07]);
        assert_eq!(model.label_of(&lemon), Some(Group::Single));
        // wine: 90% over four colors, 10% yellow
        let wine = profile(&[0.35, 0.25, 0.2, 0.1, 0.1]);
        assert_eq!(model.label_of(&wine), Some(Group::Multi));
        assert_eq!(model.label_of(&ColorDistribution::uniform()), Some(Group::Any));
    }

    #[test]
    fn labeling_is_permutation_invariant() {
        let model = cluster_objects(&three_families(), 3, 5).unwrap();
        let labeled = label_clusters(model.clone()).unwrap();
        let perm = [2usize, 0, 1];
        let mut permuted = model;
        permuted.centroids = perm.iter().map(|&i| permuted.centroids[i]).collect();
        for c in permuted.assignments.values_mut() {
            *c = perm.iter().position(|&p| p == *c).unwrap();
        }
        let relabeled = label_clusters(permuted).unwrap();
        assert_eq!(labeled.groups(), relabeled.groups());
    }

    #[test]
    fn label_errors() {
        let model = cluster_objects(&three_families(), 2, 0).unwrap();
        assert!(matches!(label_clusters(model), Err(Error::UnsupportedK(2))));
        let mut model = cluster_objects(&three_families(), 3, 0).unwrap();
        model.centroids[1] = model.centroids[0];
        assert!(matches!(label_clusters(model), Err(Error::AmbiguousExtremes)));
    }

    #[test]
    fn too_few_profiles() {
        let mut m = BTreeMap::new();
        m.insert("a".to_owned(), ColorDistribution::uniform());
        m.insert("b".to_owned(), ColorDistribution::uniform());
        assert!(matches!(cluster_objects(&m, 2, 0), Err(Error::TooFewProfiles { needed: 2, got: 1 })));
        let report = stability_check(&m, 2, &[1, 2]).unwrap();
        assert!(!report.separable);
        assert!(!report.is_stable());
    }

    #[test]
    fn stability_on_separated_families() {
        let report = stability_check(&three_families(), 3, &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(report.pairwise.len(), 10);
        assert!(report.is_stable());
        assert!(stability_check(&three_families(), 3, &[1]).is_err());
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[2, 2, 2]), 1.0);
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        assert!(ari < 0.0);
    }

    #[test]
    fn objective_never_increases_on_fixture() {
        let model = cluster_objects(&three_families(), 3, 9).unwrap();
        assert!(model.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

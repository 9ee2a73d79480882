//! Seeded generators for probing fixtures where the recoverable signal is
//! known by construction.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::color::{Color, ColorDistribution, NUM_COLORS};
use crate::loss_data::EmbeddingSet;

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    /// Object ids in generation order.
    pub objects: Vec<String>,
    pub targets: BTreeMap<String, ColorDistribution>,
    pub embeddings: EmbeddingSet,
}

impl SyntheticTask {
    /// Splits ids into the first `n_train` and the rest.
    pub fn split(&self, n_train: usize) -> (Vec<String>, Vec<String>) {
        let (a, b) = self.objects.split_at(n_train.min(self.objects.len()));
        (a.to_vec(), b.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTaskConfig {
    pub objects: usize,
    pub dim: usize,
    pub templates: usize,
    /// Std of each entry of the color map; also the std of every logit.
    pub weight_scale: f64,
    /// Std of the per-template perturbation, relative to a latent component.
    pub template_noise: f64,
}

impl Default for LinearTaskConfig {
    fn default() -> Self {
        Self {
            objects: 414,
            dim: 16,
            templates: 2,
            weight_scale: 1.5,
            template_noise: 0.05,
        }
    }
}

const RANDOM_TAG: u64 = 0x5EED_0F00_D00D_0001;

pub fn object_id(i: usize) -> String {
    format!("obj-{i:04}")
}

fn template_id(j: usize) -> String {
    format!("t{j}")
}

fn softmax(logits: &[f64; NUM_COLORS]) -> ColorDistribution {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = logits.map(|l| (l - max).exp());
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    ColorDistribution::new(w).expect("softmax output is a distribution")
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, std: f64) -> Vec<f64> {
    let n = Normal::new(0.0, std).expect("positive std");
    (0..dim).map(|_| n.sample(rng)).collect()
}

/// Latent `z ~ N(0, I_d / d)` (unit expected norm), target `softmax(W z)`,
/// and each template's vector is `z` plus small isotropic noise.
pub fn linear_task(cfg: &LinearTaskConfig, seed: u64) -> SyntheticTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<Vec<f64>> = (0..NUM_COLORS)
        .map(|_| gaussian_vec(&mut rng, cfg.dim, cfg.weight_scale))
        .collect();
    let component = 1.0 / (cfg.dim as f64).sqrt();
    let mut task = SyntheticTask {
        objects: Vec::with_capacity(cfg.objects),
        targets: BTreeMap::new(),
        embeddings: EmbeddingSet::new(),
    };
    for i in 0..cfg.objects {
        let id = object_id(i);
        let z = gaussian_vec(&mut rng, cfg.dim, component);
        let logits: [f64; NUM_COLORS] =
            std::array::from_fn(|c| w[c].iter().zip(&z).map(|(a, b)| a * b).sum());
        task.targets.insert(id.clone(), softmax(&logits));
        for j in 0..cfg.templates {
            let v = if cfg.template_noise > 0.0 {
                let noise = gaussian_vec(&mut rng, cfg.dim, cfg.template_noise * component);
                z.iter().zip(noise).map(|(a, b)| a + b).collect()
            } else {
                z.clone()
            };
            task.embeddings
                .insert(&id, &template_id(j), v)
                .expect("generator keeps dimensions consistent");
        }
        task.objects.push(id);
    }
    task
}

/// Delta targets on a random color, embedded as the one-hot of that color.
pub fn one_hot_task(objects: usize, templates: usize, seed: u64) -> SyntheticTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut task = SyntheticTask {
        objects: Vec::with_capacity(objects),
        targets: BTreeMap::new(),
        embeddings: EmbeddingSet::new(),
    };
    for i in 0..objects {
        let id = object_id(i);
        let c = rng.random_range(0..NUM_COLORS);
        let mut one_hot = vec![0.0; NUM_COLORS];
        one_hot[c] = 1.0;
        task.targets.insert(id.clone(), ColorDistribution::delta(Color::from_index(c).expect("index in range")));
        for j in 0..templates {
            task.embeddings
                .insert(&id, &template_id(j), one_hot.clone())
                .expect("fixed dimension");
        }
        task.objects.push(id);
    }
    task
}

/// Targets of the linear task paired with embeddings drawn independently of
/// them, at the same scale.
pub fn random_task(cfg: &LinearTaskConfig, seed: u64) -> SyntheticTask {
    let base = linear_task(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RANDOM_TAG);
    let mut embeddings = EmbeddingSet::new();
    for id in &base.objects {
        for j in 0..cfg.templates {
            embeddings
                .insert(id, &template_id(j), gaussian_vec(&mut rng, cfg.dim, 1.0 / (cfg.dim as f64).sqrt()))
                .expect("fixed dimension");
        }
    }
    SyntheticTask { embeddings, ..base }
}

/// Shape family of a generated ground-truth distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Shape {
    NearDelta,
    ThreeColor,
    NearUniform,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::NearDelta, Shape::ThreeColor, Shape::NearUniform];

    fn base(self) -> [f64; NUM_COLORS] {
        match self {
            Shape::NearDelta => [0.86, 0.05, 0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.005, 0.005],
            Shape::ThreeColor => [0.32, 0.28, 0.24, 0.03, 0.03, 0.02, 0.02, 0.02, 0.02, 0.01, 0.01],
            Shape::NearUniform => [1.0 / NUM_COLORS as f64; NUM_COLORS],
        }
    }
}

/// `per_family` distributions of each family, with multiplicative noise of
/// relative size `noise` and the colors randomly permuted per object.
/// Ids are `fam{f}-{i:03}`.
pub fn family_profiles(per_family: usize, noise: f64, seed: u64) -> Vec<(String, ColorDistribution, Shape)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * per_family);
    for (f, family) in Shape::ALL.into_iter().enumerate() {
        for i in 0..per_family {
            let mut w = family.base();
            for v in w.iter_mut() {
                *v *= 1.0 + noise * rng.random_range(-1.0..1.0);
            }
            let mut order: Vec<usize> = (0..NUM_COLORS).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut permuted = [0.0; NUM_COLORS];
            for (src, &dst) in order.iter().enumerate() {
                permuted[dst] = w[src];
            }
            let dist = crate::color::normalize(&permuted).expect("positive weights");
            out.push((format!("fam{f}-{i:03}"), dist, family));
        }
    }
    out
}

//! Two-layer ReLU probe trained with Adam on soft cross-entropy.
//!
//! Training is single-threaded and fully determined by the seed and the
//! sample order, so the same inputs always give bitwise-identical weights.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::{ColorDistribution, NUM_COLORS};
use crate::error::{Error, Result};

const BETA1: f32 = 0.9;
const BETA2: f32 = 0.999;
const ADAM_EPS: f32 = 1e-8;
const MAX_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub hidden_width: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// `None` means `min(256, n_samples)`.
    pub batch_size: Option<usize>,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden_width: 512,
            steps: 4000,
            learning_rate: 1e-4,
            batch_size: None,
            seeds: vec![0, 1, 2, 3, 4],
            epsilon: 0.1,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be > 0".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be > 0".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be > 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn batch_for(&self, n_samples: usize) -> usize {
        self.batch_size.unwrap_or_else(|| n_samples.min(MAX_BATCH))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    w1: Array2<f32>,
    b1: Array2<f32>,
    w2: Array2<f32>,
    b2: Array2<f32>,
}

impl Probe {
    fn init(dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut uniform = |fan_in: usize, shape: (usize, usize)| {
            let bound = 1.0 / (fan_in as f32).sqrt();
            Array2::from_shape_fn(shape, |_| rng.random_range(-bound..bound))
        };
        let w1 = uniform(dim, (dim, hidden));
        let b1 = uniform(dim, (1, hidden));
        let w2 = uniform(hidden, (hidden, NUM_COLORS));
        let b2 = uniform(hidden, (1, NUM_COLORS));
        Self { w1, b1, w2, b2 }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.ncols()
    }

    fn logits(&self, x: ArrayView2<f32>) -> Array2<f32> {
        let h = (x.dot(&self.w1) + &self.b1).mapv(|v| v.max(0.0));
        h.dot(&self.w2) + &self.b2
    }

    pub fn predict(&self, input: &[f64]) -> Result<ColorDistribution> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let x = Array2::from_shape_fn((1, input.len()), |(_, j)| input[j] as f32);
        let logits = self.logits(x.view());
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let exp: [f64; NUM_COLORS] = std::array::from_fn(|i| (logits[[0, i]] as f64 - max).exp());
        let total: f64 = exp.iter().sum();
        ColorDistribution::new(exp.map(|e| e / total))
    }
}

struct Adam {
    m: Array2<f32>,
    v: Array2<f32>,
}

impl Adam {
    fn like(shape: (usize, usize)) -> Self {
        Self {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    fn step(&mut self, param: &mut Array2<f32>, grad: &Array2<f32>, lr: f32, t: i32) {
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        ndarray::Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            });
    }
}

/// Trains a fresh probe on (input, target) samples.
///
/// Each step draws a minibatch with replacement from the samples.
pub fn train_probe(inputs: &[&[f64]], targets: &[ColorDistribution], cfg: &ProbeConfig, seed: u64) -> Result<Probe> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("a probe needs at least one training sample"));
    }
    assert_eq!(inputs.len(), targets.len(), "one target per input");
    let dim = inputs[0].len();
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let n = inputs.len();
    let x = Array2::from_shape_fn((n, dim), |(i, j)| inputs[i][j] as f32);
    let t = Array2::from_shape_fn((n, NUM_COLORS), |(i, j)| targets[i].weights()[j] as f32);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = Probe::init(dim, cfg.hidden_width, &mut rng);
    let hidden = cfg.hidden_width;
    let mut opt_w1 = Adam::like((dim, hidden));
    let mut opt_b1 = Adam::like((1, hidden));
    let mut opt_w2 = Adam::like((hidden, NUM_COLORS));
    let mut opt_b2 = Adam::like((1, NUM_COLORS));

    let batch = cfg.batch_for(n);
    let lr = cfg.learning_rate as f32;
    let mut idx = vec![0usize; batch];
    for step in 1..=cfg.steps {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        let xb = x.select(Axis(0), &idx);
        let tb = t.select(Axis(0), &idx);

        let z1 = xb.dot(&probe.w1) + &probe.b1;
        let h = z1.mapv(|v| v.max(0.0));
        let mut g = h.dot(&probe.w2) + &probe.b2;
        for mut row in g.rows_mut() {
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        // d(mean soft cross-entropy)/d(logits) = (p - t) / batch
        g -= &tb;
        g /= batch as f32;

        let d_w2 = h.t().dot(&g);
        let d_b2 = g.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d_h = g.dot(&probe.w2.t());
        ndarray::Zip::from(&mut d_h).and(&z1).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let d_w1 = xb.t().dot(&d_h);
        let d_b1 = d_h.sum_axis(Axis(0)).insert_axis(Axis(0));

        let t_step = step as i32;
        opt_w1.step(&mut probe.w1, &d_w1, lr, t_step);
        opt_w2.step(&mut probe.w2, &d_w2, lr, t_step);
        opt_b1.step(&mut probe.b1, &d_b1, lr, t_step);
        opt_b2.step(&mut probe.b2, &d_b2, lr, t_step);
    }
    Ok(probe)
}

/// Mean soft cross-entropy `-Σ t ln p` of a probe over samples, in nats.
pub fn cross_entropy(probe: &Probe, inputs: &[&[f64]], targets: &[ColorDistribution]) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let p = probe.predict(x)?;
        total -= t
            .weights()
            .iter()
            .zip(p.weights())
            .filter(|(ti, _)| **ti > 0.0)
            .map(|(ti, pi)| ti * pi.max(f64::MIN_POSITIVE).ln())
            .sum::<f64>();
    }
    Ok(total / inputs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::{js_divergence, Color};

    fn small_cfg() -> ProbeConfig {
        ProbeConfig {
            hidden_width: 32,
            steps: 300,
            learning_rate: 1e-2,
            ..ProbeConfig::default()
        }
    }

    #[test]
    fn memorizes_a_single_point() {
        let x = [0.5, -1.0, 2.0];
        let target = ColorDistribution::delta(Color::Blue);
        let cfg = ProbeConfig {
            steps: 200,
            ..ProbeConfig::default()
        };
        let probe = train_probe(&[&x], &[target], &cfg, 3).unwrap();
        let prior = js_divergence(&ColorDistribution::uniform(), &target);
        let loss = js_divergence(&probe.predict(&x).unwrap(), &target);
        assert!(loss < prior, "{loss} >= {prior}");
    }

    #[test]
    fn same_seed_same_weights() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0, (i % 3) as f64]).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let ts: Vec<ColorDistribution> = (0..20)
            .map(|i| ColorDistribution::delta(Color::from_index(i % 11).unwrap()))
            .collect();
        let a = train_probe(&refs, &ts, &small_cfg(), 9).unwrap();
        let b = train_probe(&refs, &ts, &small_cfg(), 9).unwrap();
        assert_eq!(a, b);
        let c = train_probe(&refs, &ts, &small_cfg(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dimension_checks() {
        let t = ColorDistribution::uniform();
        let err = train_probe(&[&[1.0, 2.0], &[1.0]], &[t, t], &small_cfg(), 0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
        let probe = train_probe(&[&[1.0, 2.0]], &[t], &small_cfg(), 0).unwrap();
        assert!(probe.predict(&[1.0]).is_err());
        assert!(train_probe(&[], &[], &small_cfg(), 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ProbeConfig::default().validate().is_ok());
        for bad in [
            ProbeConfig { steps: 0, ..ProbeConfig::default() },
            ProbeConfig { hidden_width: 0, ..ProbeConfig::default() },
            ProbeConfig { learning_rate: 0.0, ..ProbeConfig::default() },
            ProbeConfig { seeds: vec![], ..ProbeConfig::default() },
            ProbeConfig { epsilon: -1.0, ..ProbeConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!(ProbeConfig::default().batch_for(10), 10);
        assert_eq!(ProbeConfig::default().batch_for(1000), 256);
    }

    #[test]
    fn training_lowers_cross_entropy() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64, 1.0]).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let ts: Vec<ColorDistribution> = (0..30)
            .map(|i| ColorDistribution::delta(Color::from_index(i % 3).unwrap()))
            .collect();
        let short = train_probe(&refs, &ts, &ProbeConfig { steps: 1, ..small_cfg() }, 1).unwrap();
        let long = train_probe(&refs, &ts, &small_cfg(), 1).unwrap();
        assert!(cross_entropy(&long, &refs, &ts).unwrap() < cross_entropy(&short, &refs, &ts).unwrap());
    }
}

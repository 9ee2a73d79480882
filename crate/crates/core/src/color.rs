//! The fixed 11-term color vocabulary and probability distributions over it.
//!
//! Every file and vector in the toolkit uses the canonical order of
//! [`Color::ALL`]. Divergences are measured in nats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_COLORS: usize = 11;

/// Sum tolerance under which a weight vector is accepted as-is.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Sum tolerance under which a weight vector is silently re-normalized on load.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Orange,
    Yellow,
    Green,
    Blue,
    Purple,
    Pink,
    Black,
    White,
    Grey,
    Brown,
}

impl Color {
    pub const ALL: [Color; NUM_COLORS] = [
        Color::Red,
        Color::Orange,
        Color::Yellow,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Pink,
        Color::Black,
        Color::White,
        Color::Grey,
        Color::Brown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Color> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Orange => "orange",
            Color::Yellow => "yellow",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Pink => "pink",
            Color::Black => "black",
            Color::White => "white",
            Color::Grey => "grey",
            Color::Brown => "brown",
        }
    }

    /// Exact lookup; only the 11 canonical lowercase names are accepted.
    pub fn from_name(name: &str) -> Result<Color> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownColor(name.to_owned()))
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Color::from_name(s)
    }
}

/// A probability distribution over the 11 colors.
///
/// Weights are non-negative and sum to one within [`SUM_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ColorDistribution([f64; NUM_COLORS]);

impl ColorDistribution {
    /// Validates an already-normalized weight vector.
    ///
    /// Vectors whose sum is off by more than [`SUM_TOLERANCE`] but no more
    /// than [`RENORMALIZE_TOLERANCE`] are re-normalized; anything further
    /// off is rejected.
    pub fn new(weights: [f64; NUM_COLORS]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {w} is negative or non-finite")));
        }
        let sum: f64 = weights.iter().sum();
        let off = (sum - 1.0).abs();
        if off <= SUM_TOLERANCE {
            Ok(Self(weights))
        } else if off <= RENORMALIZE_TOLERANCE {
            Ok(Self(weights.map(|w| w / sum)))
        } else {
            Err(Error::InvalidDistribution(format!("weights sum to {sum}")))
        }
    }

    pub fn from_slice(weights: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_COLORS] = weights.try_into().map_err(|_| {
            Error::InvalidDistribution(format!("expected {NUM_COLORS} weights, got {}", weights.len()))
        })?;
        Self::new(arr)
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_COLORS as f64; NUM_COLORS])
    }

    pub fn delta(color: Color) -> Self {
        let mut w = [0.0; NUM_COLORS];
        w[color.index()] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64; NUM_COLORS] {
        &self.0
    }

    pub fn get(&self, color: Color) -> f64 {
        self.0[color.index()]
    }

    /// Most probable color; ties go to the lowest canonical index.
    pub fn argmax(&self) -> Color {
        Color::from_index(argmax(&self.0)).expect("index in range")
    }

    /// Arithmetic mean of several distributions.
    pub fn mean<'a, I>(dists: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a ColorDistribution>,
    {
        let mut acc = [0.0; NUM_COLORS];
        let mut n = 0usize;
        for d in dists {
            for (a, w) in acc.iter_mut().zip(d.0.iter()) {
                *a += w;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let mean = acc.map(|a| a / n as f64);
        Some(Self::new(mean).unwrap_or_else(|_| normalize(&mean).expect("mean of distributions")))
    }
}

impl<'de> Deserialize<'de> for ColorDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let weights = <[f64; NUM_COLORS]>::deserialize(deserializer)?;
        ColorDistribution::new(weights).map_err(serde::de::Error::custom)
    }
}

/// Index of the largest value, first occurrence on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Scales a non-negative weight vector to sum to one.
pub fn normalize(raw: &[f64; NUM_COLORS]) -> Result<ColorDistribution> {
    if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::DegenerateRatings);
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateRatings);
    }
    Ok(ColorDistribution(raw.map(|w| w / sum)))
}

fn kl_to_midpoint(p: &[f64; NUM_COLORS], m: &[f64; NUM_COLORS]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).ln())
        .sum()
}

/// Jensen-Shannon divergence in nats, bounded by `ln 2`.
pub fn js_divergence(p: &ColorDistribution, q: &ColorDistribution) -> f64 {
    let mut m = [0.0; NUM_COLORS];
    for i in 0..NUM_COLORS {
        m[i] = 0.5 * (p.0[i] + q.0[i]);
    }
    let js = 0.5 * kl_to_midpoint(&p.0, &m) + 0.5 * kl_to_midpoint(&q.0, &m);
    js.clamp(0.0, std::f64::consts::LN_2)
}

/// Square root of the Jensen-Shannon divergence; a metric.
pub fn js_distance(p: &ColorDistribution, q: &ColorDistribution) -> f64 {
    js_divergence(p, q).sqrt()
}

/// Weights sorted in descending order with color identity dropped.
///
/// A sorted profile is itself a valid distribution (over rank positions),
/// so it is returned as one.
pub fn sorted_profile(p: &ColorDistribution) -> ColorDistribution {
    let mut w = p.0;
    w.sort_by(|a, b| b.total_cmp(a));
    ColorDistribution(w)
}

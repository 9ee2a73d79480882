//! Brute-force reference implementations, written without reference to the
//! library code they check.
#![allow(dead_code)]

pub const COLORS: [&str; 11] = [
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "black", "white", "grey", "brown",
];

/// Rank of each entry: 1 + number of smaller values + half the other ties.
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

pub fn brute_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    brute_pearson(&brute_ranks(x), &brute_ranks(y))
}

/// Tau-b from an explicit scan over all pairs.
pub fn brute_kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1;
            }
            if dy == 0.0 {
                tie_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    let denom = (((pairs - tie_x) * (pairs - tie_y)) as f64).sqrt();
    if denom == 0.0 {
        None
    } else {
        Some((conc - disc) as f64 / denom)
    }
}

/// Ratings 1..5 to a distribution with weights r - 1.
pub fn rating_dist(r: &[u8; 11]) -> [f64; 11] {
    let total: f64 = r.iter().map(|&v| (v - 1) as f64).sum();
    r.map(|v| (v - 1) as f64 / total)
}

/// Iterative filter by repeated full scans; returns (removed, ground truth).
pub fn brute_filter(table: &[[u8; 11]]) -> (Vec<usize>, [f64; 11]) {
    let dists: Vec<[f64; 11]> = table.iter().map(rating_dist).collect();
    let mut alive: Vec<usize> = (0..table.len()).collect();
    let mut removed = Vec::new();
    loop {
        let mut mean = [0.0; 11];
        for &i in &alive {
            for c in 0..11 {
                mean[c] += dists[i][c] / alive.len() as f64;
            }
        }
        let drop: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&i| brute_kendall(&dists[i], &mean).is_some_and(|t| t < 0.0))
            .collect();
        if drop.is_empty() {
            return (removed, mean);
        }
        alive.retain(|i| !drop.contains(i));
        removed.extend(drop);
    }
}

/// Counts of `form` and of each `color form` across tokenized sentences.
pub fn naive_counts(sentences: &[Vec<String>], form: &[&str]) -> (u64, [u64; 11]) {
    let mut phi = 0;
    let mut by_color = [0u64; 11];
    for s in sentences {
        for start in 0..s.len() {
            if start + form.len() <= s.len() && s[start..start + form.len()].iter().zip(form).all(|(a, b)| a == b) {
                phi += 1;
                if start > 0 {
                    if let Some(c) = COLORS.iter().position(|c| *c == s[start - 1]) {
                        by_color[c] += 1;
                    }
                }
            }
        }
    }
    (phi, by_color)
}

/// Percentile by the (n - 1)q position rule, interpolating between
/// neighbours of a fresh sort.
pub fn sort_and_index(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = pos.ceil() as usize;
    let frac = pos - below as f64;
    v[below] * (1.0 - frac) + v[above] * frac
}

/// True when two labelings agree on every pair being together or apart.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (i + 1..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

pub fn js(p: &[f64; 11], q: &[f64; 11]) -> f64 {
    let kl = |a: &[f64; 11], m: &[f64; 11]| -> f64 {
        (0..11).filter(|&i| a[i] > 0.0).map(|i| a[i] * (a[i] / m[i]).ln()).sum()
    };
    let m: [f64; 11] = std::array::from_fn(|i| (p[i] + q[i]) / 2.0);
    (kl(p, &m) + kl(q, &m)) / 2.0
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

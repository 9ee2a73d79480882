mod common;

use std::collections::BTreeMap;

use chroma_core::annotations::{Group, ObjectRecord, Split};
use chroma_core::zeroshot::{best_template, evaluate, kendall, to_distribution, Family, PredictionSet};
use chroma_core::{Color, ColorDistribution};
use common::{brute_kendall, brute_spearman, js, mean_std};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dist(w: [f64; 11]) -> ColorDistribution {
    let s: f64 = w.iter().sum();
    ColorDistribution::new(w.map(|v| v / s)).unwrap()
}

fn object(id: &str, gt: ColorDistribution, group: Group) -> ObjectRecord {
    ObjectRecord {
        object_id: id.into(),
        singular: id.into(),
        plural: format!("{id}s"),
        annotations: vec![],
        ground_truth: gt,
        group: Some(group),
        split: Some(Split::Test),
        n_annotations: 3,
    }
}

struct Fixture {
    dataset: Vec<ObjectRecord>,
    preds: PredictionSet,
    /// The distribution each object's scores softmax to.
    pred_dists: BTreeMap<String, [f64; 11]>,
    baseline: BTreeMap<String, Option<ColorDistribution>>,
}

/// Twelve objects, four per group, one template each. Scores are log
/// weights so the softmax recovers the intended distribution.
fn fixture() -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut f = Fixture {
        dataset: vec![],
        preds: PredictionSet::default(),
        pred_dists: BTreeMap::new(),
        baseline: BTreeMap::new(),
    };
    for (g, group) in Group::ALL.into_iter().enumerate() {
        for i in 0..4 {
            let id = format!("{}-{i}", group.name());
            let gt: [f64; 11] = std::array::from_fn(|_| rng.random_range(0.01..1.0));
            let pred: [f64; 11] = std::array::from_fn(|c| if (c + i + g) % 3 == 0 { gt[c] } else { rng.random_range(0.01..1.0) });
            let gt = dist(gt);
            let pred = dist(pred);
            f.preds.insert(&id, "t0", pred.weights().map(f64::ln));
            f.pred_dists.insert(id.clone(), *pred.weights());
            let base = if i == 3 { None } else { Some(dist(std::array::from_fn(|_| rng.random_range(0.01..1.0)))) };
            f.baseline.insert(id.clone(), base);
            f.dataset.push(object(&id, gt, group));
        }
    }
    f
}

#[test]
fn twelve_object_report_matches_recount() {
    let f = fixture();
    let report = evaluate(&f.preds, Family::Decoder, &f.dataset, Some(&f.baseline)).unwrap();
    assert_eq!(report.excluded_no_baseline, 3);
    for group in ["single", "multi", "any", "all"] {
        let members: Vec<&ObjectRecord> = f
            .dataset
            .iter()
            .filter(|o| group == "all" || o.group.unwrap().name() == group)
            .collect();
        let mut rho = vec![];
        let mut tau = vec![];
        let mut hit = vec![];
        let mut jsd = vec![];
        let mut d_rho = vec![];
        let mut d_tau = vec![];
        let mut avg = vec![];
        for o in &members {
            let p = &f.pred_dists[&o.object_id];
            let gt = o.ground_truth.weights();
            let r = brute_spearman(p, gt).unwrap();
            let t = brute_kendall(p, gt).unwrap();
            rho.push(100.0 * r);
            tau.push(100.0 * t);
            avg.push(100.0 * (r + t) / 2.0);
            let top = |w: &[f64; 11]| (0..11).fold(0, |b, c| if w[c] > w[b] { c } else { b });
            hit.push(if top(p) == top(gt) { 100.0 } else { 0.0 });
            jsd.push(js(p, gt));
            if let Some(b) = &f.baseline[&o.object_id] {
                d_rho.push(100.0 * (r - brute_spearman(b.weights(), gt).unwrap()));
                d_tau.push(100.0 * (t - brute_kendall(b.weights(), gt).unwrap()));
            }
        }
        let row = report.group(group).unwrap();
        assert_eq!(row.n_objects, members.len());
        let check = |stat: Option<chroma_core::zeroshot::Stat>, values: &[f64]| {
            let s = stat.unwrap();
            let (m, sd) = mean_std(values);
            assert_eq!(s.n, values.len());
            assert!((s.mean - m).abs() < 1e-9, "{group}: {} vs {m}", s.mean);
            assert!((s.std - sd).abs() < 1e-9, "{group}: {} vs {sd}", s.std);
        };
        check(row.spearman, &rho);
        check(row.kendall, &tau);
        check(row.acc_at_1, &hit);
        check(row.js, &jsd);
        check(row.delta_rho, &d_rho);
        check(row.delta_tau, &d_tau);
        check(row.avg_corr, &avg);
    }
}

#[test]
fn best_template_is_exhaustive_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let gt = dist(std::array::from_fn(|_| rng.random_range(0..4) as f64 + 0.5));
        let mut dists = BTreeMap::new();
        for t in 0..rng.random_range(1..8) {
            let w: [f64; 11] = std::array::from_fn(|_| rng.random_range(0..3) as f64 + 0.1);
            dists.insert(format!("t{t:02}"), dist(w));
        }
        let Ok((chosen, _, tau)) = best_template("o", &dists, &gt) else {
            assert!(dists.values().all(|d| brute_kendall(d.weights(), gt.weights()).is_none()));
            continue;
        };
        // first id (in sorted order) reaching the maximum tau
        let mut best: Option<(&str, f64)> = None;
        for (id, d) in &dists {
            if let Some(t) = brute_kendall(d.weights(), gt.weights()) {
                if best.is_none_or(|(_, b)| t > b) {
                    best = Some((id, t));
                }
            }
        }
        let (id, t) = best.unwrap();
        assert_eq!(chosen, id);
        assert!((tau - t).abs() < 1e-12);
    }
}

#[test]
fn uniform_prediction_has_no_correlation() {
    let gt = ColorDistribution::delta(Color::Red);
    let u = to_distribution(&[0.0; 11], Family::Decoder).unwrap();
    assert_eq!(u, ColorDistribution::uniform());
    assert_eq!(kendall(&u, &gt), None);
    let mut preds = PredictionSet::default();
    preds.insert("o", "t0", [0.0; 11]);
    let report = evaluate(&preds, Family::Encoder, &[object("o", gt, Group::Single)], None).unwrap();
    let row = report.group("all").unwrap();
    assert_eq!(row.undefined_correlation, 1);
    assert_eq!(row.kendall, None);
    // argmax tie on a uniform prediction falls to red
    assert_eq!(row.acc_at_1.unwrap().mean, 100.0);
}

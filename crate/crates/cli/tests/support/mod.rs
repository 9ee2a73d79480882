#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chroma_core::annotations::{Group, ObjectRecord, Split};
use chroma_core::loss_data::EmbeddingEntry;
use chroma_core::synthetic::{family_profiles, SyntheticTask};
use chroma_core::zeroshot::PredictionEntry;
use chroma_core::{Color, ColorDistribution};
use serde::Serialize;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn chroma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chroma"))
        .args(args)
        .env_remove("CHROMA_THREADS")
        .output()
        .expect("spawn chroma")
}

pub fn chroma_ok(args: &[&str]) -> Output {
    let out = chroma(args);
    assert!(
        out.status.success(),
        "chroma {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) {
    let mut f = fs::File::create(path).unwrap();
    for r in rows {
        serde_json::to_writer(&mut f, &r).unwrap();
        f.write_all(b"\n").unwrap();
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            header.iter().map(str::to_owned).zip(rec.iter().map(str::to_owned)).collect()
        })
        .collect()
}

/// Every output file of a run except the manifest.
pub fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().into_owned();
        if name != "manifest.json" {
            out.insert(name, fs::read(e.path()).unwrap());
        }
    }
    out
}

/// Alphabetic surface word for object `i`, so it survives tokenization.
pub fn word(i: usize) -> String {
    let mut n = i;
    let mut w = String::from("zorb");
    for _ in 0..3 {
        w.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
    }
    w
}

pub fn record(id: &str, singular: &str, gt: ColorDistribution, group: Option<Group>, split: Option<Split>) -> ObjectRecord {
    ObjectRecord {
        object_id: id.to_owned(),
        singular: singular.to_owned(),
        plural: format!("{singular}s"),
        annotations: Vec::new(),
        ground_truth: gt,
        group,
        split,
        n_annotations: 1,
    }
}

/// Three-family dataset (no groups or splits yet), its lexicon, and a raw
/// text corpus whose color mentions follow each ground truth.
pub struct ProfileFixture {
    pub dataset: PathBuf,
    pub lexicon: PathBuf,
    pub corpus: PathBuf,
}

pub fn profile_fixture(dir: &Path, per_family: usize, seed: u64) -> ProfileFixture {
    let profiles = family_profiles(per_family, 0.05, seed);
    let mut records = Vec::new();
    let mut lexicon = Vec::new();
    let mut text = String::new();
    for (i, (id, gt, _)) in profiles.iter().enumerate() {
        let w = word(i);
        records.push(record(id, &w, *gt, None, None));
        lexicon.push(serde_json::json!({"object": id, "singular": w, "plural": format!("{w}s")}));
        text.push_str(&format!("I saw the {w} today.\n"));
        for c in Color::ALL {
            let k = (gt.get(c) * 200.0).round() as usize;
            for j in 0..k {
                if j % 2 == 0 {
                    text.push_str(&format!("A {} {w}. ", c.name()));
                } else {
                    text.push_str(&format!("Many {} {w}s!\n", c.name()));
                }
            }
        }
        text.push('\n');
    }
    let fx = ProfileFixture {
        dataset: dir.join("profiles.jsonl"),
        lexicon: dir.join("profiles_lexicon.jsonl"),
        corpus: dir.join("profiles_corpus.txt"),
    };
    write_jsonl(&fx.dataset, &records);
    write_jsonl(&fx.lexicon, &lexicon);
    fs::write(&fx.corpus, text).unwrap();
    fx
}

/// Scores whose softmax reproduces each ground truth (zeros become a
/// shared tiny mass), for every (object, template) pair in a prompt file.
pub fn gt_predictions(dataset: &Path, prompts: &Path, out: &Path) {
    let gts: BTreeMap<String, ColorDistribution> = read_jsonl::<ObjectRecord>(dataset)
        .into_iter()
        .map(|o| (o.object_id, o.ground_truth))
        .collect();
    let pairs: BTreeSet<(String, String)> = read_jsonl::<serde_json::Value>(prompts)
        .into_iter()
        .map(|p| (p["object"].as_str().unwrap().to_owned(), p["template"].as_str().unwrap().to_owned()))
        .collect();
    let mut rows = Vec::new();
    for (object, template) in pairs {
        let gt = gts[&object];
        for c in Color::ALL {
            rows.push(PredictionEntry {
                object: object.clone(),
                template: template.clone(),
                color: c.name().to_owned(),
                score: (gt.get(c) + 1e-9).ln(),
            });
        }
    }
    write_jsonl(out, rows);
}

/// Writes a synthetic probing task as a dataset (first `n_train` objects in
/// train, the rest in test) plus an embedding file.
pub fn write_task(task: &SyntheticTask, n_train: usize, dataset: &Path, embeddings: &Path) {
    let records: Vec<ObjectRecord> = task
        .objects
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < n_train { Split::Train } else { Split::Test };
            record(id, &word(i), task.targets[id], Some(Group::Single), Some(split))
        })
        .collect();
    write_jsonl(dataset, &records);
    let entries: Vec<EmbeddingEntry> = task
        .objects
        .iter()
        .flat_map(|o| {
            task.embeddings.for_object(o).map(|(t, v)| EmbeddingEntry {
                object: o.clone(),
                template: t.to_owned(),
                vector: v.to_vec(),
            })
        })
        .collect();
    write_jsonl(embeddings, entries);
}

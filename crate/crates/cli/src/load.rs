use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Result};
use chroma_core::annotations::{HitSubmission, Lexicon, LexiconEntry, ObjectRecord, Split, SurfaceForms};
use chroma_core::corpus::CorpusRecord;
use chroma_core::loss_data::{EmbeddingEntry, EmbeddingSet};
use chroma_core::zeroshot::{PredictionEntry, PredictionSet};
use chroma_core::{ColorDistribution, Error};
use serde::Serialize;

use crate::io::{input_error, lines, read_jsonl};

/// `NAME=PATH`, or a bare path named by its file stem.
#[derive(Debug, Clone, Serialize)]
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

impl FromStr for NamedPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('=') {
            Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok(Self {
                name: name.to_owned(),
                path: path.into(),
            }),
            Some(_) => Err(format!("expected NAME=PATH, got {s:?}")),
            None => {
                let path = PathBuf::from(s);
                let name = path
                    .file_stem()
                    .map(|n| n.to_string_lossy().into_owned())
                    .ok_or_else(|| format!("no file name in {s:?}"))?;
                Ok(Self { name, path })
            }
        }
    }
}

impl fmt::Display for NamedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, self.path.display())
    }
}

pub fn unique_names(items: &[NamedPath]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for i in items {
        if !seen.insert(&i.name) {
            return Err(Error::Duplicate(format!("model name {:?}", i.name)).into());
        }
    }
    Ok(())
}

pub fn dataset(path: &Path) -> Result<Vec<ObjectRecord>> {
    let records: Vec<ObjectRecord> = read_jsonl(path)?;
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.object_id.as_str()) {
            return Err(Error::Duplicate(format!("object {:?} in {}", r.object_id, path.display())).into());
        }
    }
    Ok(records)
}

/// Dataset objects restricted to one split (all objects when `split` is
/// `None`).
pub fn select(objects: Vec<ObjectRecord>, split: Option<Split>) -> Result<Vec<ObjectRecord>> {
    let Some(split) = split else {
        return Ok(objects);
    };
    let mut out = Vec::new();
    for o in objects {
        match o.split {
            Some(s) if s == split => out.push(o),
            Some(_) => {}
            None => {
                return Err(Error::MissingField {
                    object: o.object_id,
                    what: "split",
                }
                .into())
            }
        }
    }
    if out.is_empty() {
        bail!("no objects in split {split}");
    }
    Ok(out)
}

pub fn lexicon(path: &Path) -> Result<Lexicon> {
    let entries: Vec<LexiconEntry> = read_jsonl(path)?;
    let mut lex = Lexicon::new();
    for e in entries {
        let forms = SurfaceForms {
            singular: e.singular,
            plural: e.plural,
        };
        if lex.insert(e.object.clone(), forms).is_some() {
            return Err(Error::Duplicate(format!("lexicon entry {:?}", e.object)).into());
        }
    }
    Ok(lex)
}

pub fn hits(path: &Path) -> Result<Vec<HitSubmission>> {
    lines(path)?
        .into_iter()
        .map(|(n, line)| {
            HitSubmission::from_json(&line).map_err(|e| input_error(format!("{}: line {n}: {e}", path.display())))
        })
        .collect()
}

pub fn predictions(path: &Path) -> Result<PredictionSet> {
    let entries: Vec<PredictionEntry> = read_jsonl(path)?;
    PredictionSet::from_entries(entries).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

pub fn corpus(path: &Path) -> Result<BTreeMap<String, CorpusRecord>> {
    let records: Vec<CorpusRecord> = read_jsonl(path)?;
    Ok(records.into_iter().map(|r| (r.object.clone(), r)).collect())
}

/// Per-object n-gram distributions (`None` where the object has no color
/// mentions).
pub fn baseline(corpus: &BTreeMap<String, CorpusRecord>) -> BTreeMap<String, Option<ColorDistribution>> {
    corpus.iter().map(|(k, r)| (k.clone(), r.dist)).collect()
}

pub fn embeddings(path: &Path) -> Result<EmbeddingSet> {
    let mut set = EmbeddingSet::new();
    for (n, line) in lines(path)? {
        let e: EmbeddingEntry =
            serde_json::from_str(&line).map_err(|e| input_error(format!("{}: line {n}: {e}", path.display())))?;
        set.insert(&e.object, &e.template, e.vector)
            .map_err(|e| input_error(format!("{}: line {n}: {e}", path.display())))?;
    }
    if set.is_empty() {
        return Err(input_error(format!("{}: no embeddings", path.display())));
    }
    Ok(set)
}

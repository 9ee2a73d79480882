//! N-gram ingestion and the color/object collocation statistics built on it.
//!
//! Three input formats are understood:
//!
//! * `google_ngram`: `ngram TAB year TAB match_count TAB volume_count`, summed
//!   over years. The newer layout with one `year,match_count,volume_count`
//!   field per year is accepted as well. Part-of-speech tagged tokens
//!   (containing `_`) are skipped.
//! * `plain_tsv`: `ngram TAB count`.
//! * `raw_text`: running text, lowercased, split on whitespace, with leading
//!   and trailing non-alphanumeric characters stripped. A token ending in
//!   `.`, `!` or `?` closes its sentence, as does a blank line; n-grams never
//!   cross a sentence boundary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::Lexicon;
use crate::color::{Color, ColorDistribution, NUM_COLORS};
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 3;
/// Objects rarer than this are left out of summary statistics by default.
pub const DEFAULT_MIN_OBJECT_COUNT: u64 = 25;
const MALFORMED_EXAMPLES: usize = 10;

/// Counts of lowercase 1- to 3-token sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NgramTable {
    counts: HashMap<String, u64>,
}

impl NgramTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<S: AsRef<str>>(&mut self, tokens: &[S], count: u64) {
        debug_assert!((1..=MAX_ORDER).contains(&tokens.len()));
        *self.counts.entry(join(tokens)).or_default() += count;
    }

    pub fn get<S: AsRef<str>>(&self, tokens: &[S]) -> u64 {
        self.counts.get(&join(tokens)).copied().unwrap_or(0)
    }

    /// Entrywise addition.
    pub fn merge(&mut self, other: NgramTable) {
        if self.counts.is_empty() {
            self.counts = other.counts;
            return;
        }
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries as (space-joined n-gram, count).
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

fn join<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut key = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            key.push(' ');
        }
        key.push_str(t.as_ref());
    }
    key
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    GoogleNgram,
    PlainTsv,
    RawText,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "google_ngram" => Ok(Self::GoogleNgram),
            "plain_tsv" => Ok(Self::PlainTsv),
            "raw_text" => Ok(Self::RawText),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestStats {
    pub lines: u64,
    pub malformed: u64,
    /// First few malformed lines as (1-based line number, reason).
    pub malformed_examples: Vec<(u64, String)>,
    pub pos_tagged_skipped: u64,
    pub out_of_range_skipped: u64,
}

impl IngestStats {
    fn malformed(&mut self, line: u64, reason: impl Into<String>) {
        self.malformed += 1;
        if self.malformed_examples.len() < MALFORMED_EXAMPLES {
            self.malformed_examples.push((line, reason.into()));
        }
    }
}

/// Lowercases and strips leading/trailing non-alphanumeric characters.
/// Returns the cleaned token (possibly empty) and whether the stripped tail
/// ends a sentence.
pub fn clean_token(raw: &str) -> (String, bool) {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    let start = raw.len() - raw.trim_start_matches(|c: char| !c.is_alphanumeric()).len();
    let tail = if trimmed.is_empty() { raw } else { &raw[start + trimmed.len()..] };
    let ends = tail.contains(['.', '!', '?']);
    (trimmed.to_lowercase(), ends)
}

fn count_sentence(table: &mut NgramTable, sentence: &[String]) {
    for n in 1..=MAX_ORDER {
        for w in sentence.windows(n) {
            table.add(w, 1);
        }
    }
}

fn ngram_tokens(ngram: &str, stats: &mut IngestStats, line_no: u64) -> Option<Vec<String>> {
    let tokens: Vec<String> = ngram.split_whitespace().map(str::to_lowercase).collect();
    if tokens.is_empty() {
        stats.malformed(line_no, "empty n-gram");
        return None;
    }
    if tokens.len() > MAX_ORDER {
        stats.out_of_range_skipped += 1;
        return None;
    }
    Some(tokens)
}

fn parse_google(line: &str, line_no: u64, stats: &mut IngestStats) -> Option<(Vec<String>, u64)> {
    let mut fields = line.split('\t');
    let ngram = fields.next()?;
    let rest: Vec<&str> = fields.collect();
    if rest.is_empty() {
        stats.malformed(line_no, "missing count fields");
        return None;
    }
    let count = if rest.iter().all(|f| f.contains(',')) {
        // year,match_count,volume_count per field
        let mut total = 0u64;
        for f in &rest {
            let parts: Vec<&str> = f.split(',').collect();
            match (parts.len(), parts.get(1).and_then(|m| m.trim().parse::<u64>().ok())) {
                (3, Some(m)) if parts[0].trim().parse::<i32>().is_ok() => total += m,
                _ => {
                    stats.malformed(line_no, format!("bad year record {f:?}"));
                    return None;
                }
            }
        }
        total
    } else if rest.len() == 3 {
        match (rest[0].trim().parse::<i32>(), rest[1].trim().parse::<u64>(), rest[2].trim().parse::<u64>()) {
            (Ok(_), Ok(m), Ok(_)) => m,
            _ => {
                stats.malformed(line_no, "non-numeric year or count");
                return None;
            }
        }
    } else {
        stats.malformed(line_no, format!("expected 4 tab-separated fields, got {}", rest.len() + 1));
        return None;
    };
    if ngram.contains('_') {
        stats.pos_tagged_skipped += 1;
        return None;
    }
    Some((ngram_tokens(ngram, stats, line_no)?, count))
}

fn parse_tsv(line: &str, line_no: u64, stats: &mut IngestStats) -> Option<(Vec<String>, u64)> {
    let Some((ngram, count)) = line.split_once('\t') else {
        stats.malformed(line_no, "expected ngram TAB count");
        return None;
    };
    let Ok(count) = count.trim().parse::<u64>() else {
        stats.malformed(line_no, format!("bad count {count:?}"));
        return None;
    };
    Some((ngram_tokens(ngram, stats, line_no)?, count))
}

/// Counts one stream. Malformed lines are skipped and reported; read errors
/// abort.
pub fn ingest_reader<R: BufRead>(reader: R, format: CorpusFormat) -> Result<(NgramTable, IngestStats)> {
    let mut table = NgramTable::new();
    let mut stats = IngestStats::default();
    let mut sentence: Vec<String> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i as u64 + 1;
        stats.lines += 1;
        match format {
            CorpusFormat::RawText => {
                if line.trim().is_empty() {
                    count_sentence(&mut table, &sentence);
                    sentence.clear();
                    continue;
                }
                for raw in line.split_whitespace() {
                    let (token, ends) = clean_token(raw);
                    if !token.is_empty() {
                        sentence.push(token);
                    }
                    if ends {
                        count_sentence(&mut table, &sentence);
                        sentence.clear();
                    }
                }
            }
            CorpusFormat::GoogleNgram | CorpusFormat::PlainTsv => {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = if format == CorpusFormat::GoogleNgram {
                    parse_google(&line, line_no, &mut stats)
                } else {
                    parse_tsv(&line, line_no, &mut stats)
                };
                if let Some((tokens, count)) = parsed {
                    table.add(&tokens, count);
                }
            }
        }
    }
    count_sentence(&mut table, &sentence);
    Ok((table, stats))
}

/// Opens a file, transparently decompressing gzip.
pub fn open_shard(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Ingests shards concurrently and merges them in input order.
pub fn ingest_shards(shards: &[(PathBuf, CorpusFormat)]) -> Result<(NgramTable, Vec<IngestStats>)> {
    let per_shard: Vec<Result<(NgramTable, IngestStats)>> = shards
        .par_iter()
        .map(|(path, format)| ingest_reader(open_shard(path)?, *format))
        .collect();
    let mut table = NgramTable::new();
    let mut stats = Vec::with_capacity(shards.len());
    for r in per_shard {
        let (t, s) = r?;
        table.merge(t);
        stats.push(s);
    }
    Ok((table, stats))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectColorCounts {
    pub object_id: String,
    pub phi_o: u64,
    pub phi_co: [u64; NUM_COLORS],
    /// The object never occurs in the table.
    pub absent: bool,
}

fn surface_tokens(object: &str, form: &str) -> Result<Vec<String>> {
    let tokens: Vec<String> = form.split_whitespace().map(str::to_lowercase).collect();
    if tokens.is_empty() || tokens.len() > MAX_ORDER - 1 {
        return Err(Error::Config(format!(
            "surface form {form:?} of object {object:?} must be 1 or 2 tokens"
        )));
    }
    Ok(tokens)
}

/// Looks up each object's unigram/bigram count and its color-prefixed
/// counts, summed over singular and plural forms (counted once when the two
/// forms coincide).
pub fn attribute_colors(table: &NgramTable, lexicon: &Lexicon) -> Result<Vec<ObjectColorCounts>> {
    let mut out = Vec::with_capacity(lexicon.len());
    for (id, forms) in lexicon {
        let mut surfaces = vec![surface_tokens(id, &forms.singular)?];
        let plural = surface_tokens(id, &forms.plural)?;
        if plural != surfaces[0] {
            surfaces.push(plural);
        }
        let mut phi_o = 0;
        let mut phi_co = [0u64; NUM_COLORS];
        for s in &surfaces {
            phi_o += table.get(s);
            for c in Color::ALL {
                let mut gram = Vec::with_capacity(s.len() + 1);
                gram.push(c.name().to_owned());
                gram.extend(s.iter().cloned());
                phi_co[c.index()] += table.get(&gram);
            }
        }
        out.push(ObjectColorCounts {
            object_id: id.clone(),
            phi_o,
            phi_co,
            absent: phi_o == 0,
        });
    }
    Ok(out)
}

/// Percentage of an object's occurrences preceded by a color term;
/// `None` when the object never occurs.
pub fn color_freq(c: &ObjectColorCounts) -> Option<f64> {
    if c.phi_o == 0 {
        return None;
    }
    let colored: u64 = c.phi_co.iter().sum();
    Some(100.0 / c.phi_o as f64 * colored as f64)
}

/// Relative frequency of each color among color-prefixed occurrences;
/// `None` when there are none.
pub fn color_distribution(c: &ObjectColorCounts) -> Option<ColorDistribution> {
    let total: u64 = c.phi_co.iter().sum();
    if total == 0 {
        return None;
    }
    let weights = c.phi_co.map(|n| n as f64 / total as f64);
    Some(ColorDistribution::new(weights).expect("relative frequencies"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Linear-interpolation percentile (Hyndman-Fan type 7) of sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn frequency_percentiles(values: &[f64]) -> Result<Percentiles> {
    if values.is_empty() {
        return Err(Error::Empty("frequency percentiles need at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Percentiles {
        p25: percentile_sorted(&sorted, 0.25),
        p50: percentile_sorted(&sorted, 0.50),
        p75: percentile_sorted(&sorted, 0.75),
    })
}

/// One line of the corpus distribution file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub object: String,
    pub phi_o: u64,
    pub phi_co: [u64; NUM_COLORS],
    pub freq: Option<f64>,
    pub dist: Option<ColorDistribution>,
}

impl From<&ObjectColorCounts> for CorpusRecord {
    fn from(c: &ObjectColorCounts) -> Self {
        Self {
            object: c.object_id.clone(),
            phi_o: c.phi_o,
            phi_co: c.phi_co,
            freq: color_freq(c),
            dist: color_distribution(c),
        }
    }
}

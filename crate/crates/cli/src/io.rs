use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Marks a failure caused by malformed input (exit code 2).
#[derive(Debug)]
pub struct InputFormat(pub String);

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputFormat {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputFormat(msg.into()).into()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

/// Non-blank lines of a text file, with 1-based line numbers.
pub fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader = std::io::BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| input_error(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Parses every non-blank line as JSON, naming the first bad line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    lines(path)?
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str(&line).map_err(|e| input_error(format!("{}: line {n}: {e}", path.display())))
        })
        .collect()
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    Ok(text)
}

/// Writes output files into one directory and remembers what was written.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_owned(),
            written: Vec::new(),
        })
    }

    fn writer(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(name.to_owned());
        Ok(BufWriter::new(file))
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = self.writer(name)?;
        for row in rows {
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.writer(name)?);
        w.write_record(header)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `manifest.json`; the only output allowed to differ across reruns.
    pub fn manifest<C: Serialize>(mut self, subcommand: &str, config: &C, inputs: &[&Path]) -> Result<()> {
        let digests = inputs
            .iter()
            .map(|p| {
                Ok(serde_json::json!({
                    "path": p.display().to_string(),
                    "sha256": sha256_file(p)?,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let outputs = std::mem::take(&mut self.written);
        let manifest = serde_json::json!({
            "tool": "chroma",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "config": config,
            "inputs": digests,
            "outputs": outputs,
            "created_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        });
        self.json("manifest.json", &manifest)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// CSV cell for an optional number.
pub fn cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Fixed six-decimal rendering, so reruns format identically.
pub fn num(v: f64) -> String {
    format!("{v:.6}")
}

//! JSON Lines and CSV formats owned by the command line: assignments,
//! ground truth, segments, patch reports, traces and metrics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use catm::model::ForgottenTruth;
use catm::sampler::DocInference;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Failure, Outcome};

/// Ground truth of one generated document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthLine {
    pub doc_id: String,
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forgotten: Option<ForgottenTruth>,
}

pub fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Outcome {
    let file = File::create(path)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| Failure::Input(format!("cannot write {}: {e}", path.display()));
    for item in items {
        let line = serde_json::to_string(item)
            .map_err(|e| Failure::Internal(format!("serialize: {e}")))?;
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Outcome<Vec<T>> {
    let file = File::open(path)
        .map_err(|e| Failure::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|e| Failure::Input(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Failure::Input(format!("{}: line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Internal(format!("serialize: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Outcome {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

/// Orders `items` like `doc_ids`. Every id must appear exactly once.
pub fn align<T>(
    doc_ids: &[&str],
    items: Vec<T>,
    id: impl Fn(&T) -> &str,
    what: &str,
) -> Outcome<Vec<T>> {
    let mut by_id: BTreeMap<String, T> = BTreeMap::new();
    for item in items {
        let key = id(&item).to_string();
        if by_id.insert(key.clone(), item).is_some() {
            return Err(Failure::Input(format!("{what}: duplicate document {key}")));
        }
    }
    let mut out = Vec::with_capacity(doc_ids.len());
    for d in doc_ids {
        out.push(
            by_id
                .remove(*d)
                .ok_or_else(|| Failure::Input(format!("{what}: no entry for document {d}")))?,
        );
    }
    if let Some(extra) = by_id.keys().next() {
        return Err(Failure::Input(format!(
            "{what}: document {extra} is not in the corpus"
        )));
    }
    Ok(out)
}

pub fn read_assignments(path: &Path, doc_ids: &[&str]) -> Outcome<Vec<DocInference>> {
    let rows: Vec<DocInference> = read_lines(path)?;
    align(doc_ids, rows, |r| &r.doc_id, &path.display().to_string())
}

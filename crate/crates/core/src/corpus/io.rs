//! JSON Lines readers and writers for corpora, features, dictionaries and
//! joint streams.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Clip, Corpus, Dictionary, FeatureClip, SkeletonStream, VideoDoc, N_JOINTS};
use crate::error::{CatmError, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    n_human_words: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_object_words: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ClipLine {
    h: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    o: Option<usize>,
    t: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocLine {
    doc_id: String,
    clips: Vec<ClipLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<[u64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt: Option<Vec<usize>>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CatmError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CatmError::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(CatmError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })),
        })
}

fn parse<'a, T: Deserialize<'a>>(line_no: usize, text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CatmError::Parse {
        line: line_no,
        msg: e.to_string(),
    })
}

/// Reads a corpus from any reader.
pub fn read_corpus<R: Read>(reader: R) -> Result<Corpus> {
    let mut it = lines(BufReader::new(reader));
    let (line_no, text) = it.next().transpose()?.ok_or(CatmError::Parse {
        line: 1,
        msg: "missing header line".into(),
    })?;
    let header: Header = parse(line_no, &text)?;
    let has_objects = header.n_object_words.is_some();
    let n_object_words = header.n_object_words.unwrap_or(1);

    let mut docs = Vec::new();
    for item in it {
        let (line_no, text) = item?;
        let line: DocLine = parse(line_no, &text)?;
        let clips = line
            .clips
            .iter()
            .map(|c| {
                if !has_objects && c.o.is_some_and(|o| o != 0) {
                    return Err(CatmError::Parse {
                        line: line_no,
                        msg: "object word given but header declares no object dictionary".into(),
                    });
                }
                Ok(Clip {
                    human_word: c.h,
                    object_word: c.o.unwrap_or(0),
                    t: c.t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let doc = VideoDoc {
            doc_id: line.doc_id,
            clips,
            frame_spans: line
                .frames
                .map(|f| f.into_iter().map(|[s, e]| (s, e)).collect()),
            gt_labels: line.gt,
        };
        doc.validate(header.n_human_words, n_object_words)?;
        docs.push(doc);
    }
    Corpus::new(docs, header.n_human_words, n_object_words)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    read_corpus(open(path.as_ref())?)
}

/// Writes a corpus. Object words are always written so that a round trip
/// is lossless.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    let header = Header {
        n_human_words: corpus.n_human_words,
        n_object_words: Some(corpus.n_object_words),
    };
    let mut emit = |value: String| -> Result<()> {
        writeln!(writer, "{value}").map_err(|e| CatmError::io("<corpus>", e))
    };
    emit(serde_json::to_string(&header).expect("header serializes"))?;
    for doc in &corpus.docs {
        let line = DocLine {
            doc_id: doc.doc_id.clone(),
            clips: doc
                .clips
                .iter()
                .map(|c| ClipLine {
                    h: c.human_word,
                    o: Some(c.object_word),
                    t: c.t,
                })
                .collect(),
            frames: doc
                .frame_spans
                .as_ref()
                .map(|f| f.iter().map(|&(s, e)| [s, e]).collect()),
            gt: doc.gt_labels.clone(),
        };
        emit(serde_json::to_string(&line).expect("doc serializes"))?;
    }
    writer.flush().map_err(|e| CatmError::io("<corpus>", e))
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_corpus(corpus, create(path.as_ref())?)
}

#[derive(Serialize, Deserialize)]
struct FeatureLine {
    doc_id: String,
    t: f64,
    hf: Vec<f64>,
    #[serde(default)]
    of: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<[u64; 2]>,
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureClip>> {
    let mut out = Vec::new();
    for item in lines(open(path.as_ref())?) {
        let (line_no, text) = item?;
        let f: FeatureLine = parse(line_no, &text)?;
        if !(f.t > 0.0 && f.t < 1.0) {
            return Err(CatmError::Parse {
                line: line_no,
                msg: format!("timestamp {} outside (0, 1)", f.t),
            });
        }
        out.push(FeatureClip {
            doc_id: f.doc_id,
            human_feat: f.hf,
            object_feat: f.of,
            t: f.t,
            frame_span: f.frames.map(|[s, e]| (s, e)),
        });
    }
    super::validate_features(&out)?;
    Ok(out)
}

pub fn save_features(features: &[FeatureClip], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for f in features {
        let line = FeatureLine {
            doc_id: f.doc_id.clone(),
            t: f.t,
            hf: f.human_feat.clone(),
            of: f.object_feat.clone(),
            frames: f.frame_span.map(|(s, e)| [s, e]),
        };
        writeln!(
            w,
            "{}",
            serde_json::to_string(&line).expect("feature serializes")
        )
        .map_err(|e| CatmError::io(path, e))?;
    }
    w.flush().map_err(|e| CatmError::io(path, e))
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let path = path.as_ref();
    let dict: Dictionary = serde_json::from_reader(open(path)?).map_err(|e| CatmError::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    dict.validate()?;
    Ok(dict)
}

pub fn save_dictionary(dict: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, dict).map_err(|e| CatmError::io(path, e.into()))?;
    writeln!(w).map_err(|e| CatmError::io(path, e))?;
    w.flush().map_err(|e| CatmError::io(path, e))
}

#[derive(Deserialize)]
struct JointLine {
    doc_id: String,
    frame: u64,
    joints: Vec<[f64; 3]>,
}

/// Reads a joints file into one skeleton stream per document, frames sorted
/// by frame number. Every stream gets `edges`.
pub fn load_joints(
    path: impl AsRef<Path>,
    edges: &[(usize, usize)],
) -> Result<Vec<(String, SkeletonStream)>> {
    let mut per_doc: Vec<(String, Vec<(u64, [[f64; 3]; N_JOINTS])>)> = Vec::new();
    for item in lines(open(path.as_ref())?) {
        let (line_no, text) = item?;
        let j: JointLine = parse(line_no, &text)?;
        let joints: [[f64; 3]; N_JOINTS] =
            j.joints
                .try_into()
                .map_err(|v: Vec<[f64; 3]>| CatmError::Parse {
                    line: line_no,
                    msg: format!("expected {N_JOINTS} joints, found {}", v.len()),
                })?;
        match per_doc.iter_mut().find(|(id, _)| *id == j.doc_id) {
            Some((_, frames)) => frames.push((j.frame, joints)),
            None => per_doc.push((j.doc_id, vec![(j.frame, joints)])),
        }
    }
    per_doc
        .into_iter()
        .map(|(id, mut frames)| {
            frames.sort_by_key(|(f, _)| *f);
            if frames.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(CatmError::doc(&id, "duplicate frame number"));
            }
            let stream =
                SkeletonStream::new(frames.into_iter().map(|(_, j)| j).collect(), edges.to_vec())?;
            Ok((id, stream))
        })
        .collect()
}

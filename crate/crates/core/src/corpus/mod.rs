//! Documents, clips and the front half of the pipeline: frames to clips,
//! clips to feature vectors, feature vectors to words.

mod io;
mod kmeans;
mod skeleton;

pub use io::{
    load_corpus, load_dictionary, load_features, load_joints, read_corpus, save_corpus,
    save_dictionary, save_features, write_corpus,
};
pub use kmeans::{build_dictionary, quantize, Dictionary, KMeansOptions};
pub use skeleton::{
    clipify, kinect_v2_edges, skeleton_features, ClipWindow, Frame, SkeletonStream, N_JOINTS,
};

use crate::error::{CatmError, Result};

/// One token of a video document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip {
    pub human_word: usize,
    pub object_word: usize,
    /// Timestamp normalized by the video length, strictly inside (0, 1).
    pub t: f64,
}

/// A video as an ordered sequence of clips.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDoc {
    pub doc_id: String,
    pub clips: Vec<Clip>,
    /// Inclusive frame range covered by each clip, when known.
    pub frame_spans: Option<Vec<(u64, u64)>>,
    /// Ground-truth action class per clip. Only used by evaluation.
    pub gt_labels: Option<Vec<usize>>,
}

impl VideoDoc {
    pub fn new(doc_id: impl Into<String>, clips: Vec<Clip>) -> Self {
        VideoDoc {
            doc_id: doc_id.into(),
            clips,
            frame_spans: None,
            gt_labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.clips.iter().map(|c| c.t).collect()
    }

    /// Checks the per-document invariants against the given dictionary sizes.
    pub fn validate(&self, n_human_words: usize, n_object_words: usize) -> Result<()> {
        if self.clips.is_empty() {
            return Err(CatmError::doc(&self.doc_id, "document has no clips"));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, c) in self.clips.iter().enumerate() {
            if !(c.t > 0.0 && c.t < 1.0) {
                return Err(CatmError::doc(
                    &self.doc_id,
                    format!("clip {i}: timestamp {} outside (0, 1)", c.t),
                ));
            }
            if c.t <= prev {
                return Err(CatmError::doc(
                    &self.doc_id,
                    format!("clip {i}: timestamps must be strictly ascending"),
                ));
            }
            prev = c.t;
            if c.human_word >= n_human_words {
                return Err(CatmError::doc(
                    &self.doc_id,
                    format!(
                        "clip {i}: human word {} out of range (dictionary size {n_human_words})",
                        c.human_word
                    ),
                ));
            }
            if c.object_word >= n_object_words {
                return Err(CatmError::doc(
                    &self.doc_id,
                    format!(
                        "clip {i}: object word {} out of range (dictionary size {n_object_words})",
                        c.object_word
                    ),
                ));
            }
        }
        if let Some(spans) = &self.frame_spans {
            if spans.len() != self.clips.len() {
                return Err(CatmError::doc(
                    &self.doc_id,
                    format!("{} frame spans for {} clips", spans.len(), self.clips.len()),
                ));
            }
            if let Some(i) = spans.iter().position(|(s, e)| s > e) {
                return Err(CatmError::doc(
                    &self.doc_id,
                    format!("clip {i}: frame span start after end"),
                ));
            }
        }
        if let Some(gt) = &self.gt_labels {
            if gt.len() != self.clips.len() {
                return Err(CatmError::doc(
                    &self.doc_id,
                    format!(
                        "{} ground-truth labels for {} clips",
                        gt.len(),
                        self.clips.len()
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// A collection of documents sharing one pair of dictionaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub docs: Vec<VideoDoc>,
    pub n_human_words: usize,
    pub n_object_words: usize,
}

impl Corpus {
    pub fn new(docs: Vec<VideoDoc>, n_human_words: usize, n_object_words: usize) -> Result<Self> {
        let corpus = Corpus {
            docs,
            n_human_words,
            n_object_words,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_human_words == 0 || self.n_object_words == 0 {
            return Err(CatmError::InvalidInput(
                "dictionary sizes must be positive".into(),
            ));
        }
        for doc in &self.docs {
            doc.validate(self.n_human_words, self.n_object_words)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.len()).sum()
    }

    pub fn doc(&self, doc_id: &str) -> Option<&VideoDoc> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }
}

/// A clip before quantization: raw feature vectors plus its timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureClip {
    pub doc_id: String,
    pub human_feat: Vec<f64>,
    /// Empty when the corpus carries no object features.
    pub object_feat: Vec<f64>,
    pub t: f64,
    pub frame_span: Option<(u64, u64)>,
}

/// Checks uniform dimensions and finiteness across a feature list.
pub fn validate_features(features: &[FeatureClip]) -> Result<()> {
    let Some(first) = features.first() else {
        return Ok(());
    };
    let (dh, d_o) = (first.human_feat.len(), first.object_feat.len());
    for (i, f) in features.iter().enumerate() {
        if f.human_feat.len() != dh {
            return Err(CatmError::DimensionMismatch {
                expected: dh,
                got: f.human_feat.len(),
            });
        }
        if f.object_feat.len() != d_o {
            return Err(CatmError::DimensionMismatch {
                expected: d_o,
                got: f.object_feat.len(),
            });
        }
        if f.human_feat
            .iter()
            .chain(&f.object_feat)
            .any(|x| !x.is_finite())
        {
            return Err(CatmError::doc(
                &f.doc_id,
                format!("feature clip {i} has a non-finite entry"),
            ));
        }
    }
    Ok(())
}

/// Groups feature clips by document, preserving first-appearance order of
/// documents and the order of clips within each.
pub fn group_features(features: &[FeatureClip]) -> Vec<(String, Vec<&FeatureClip>)> {
    let mut groups: Vec<(String, Vec<&FeatureClip>)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for f in features {
        let slot = *index.entry(f.doc_id.clone()).or_insert_with(|| {
            groups.push((f.doc_id.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(f);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(h: usize, t: f64) -> Clip {
        Clip {
            human_word: h,
            object_word: 0,
            t,
        }
    }

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        let doc = VideoDoc::new("a", vec![clip(0, 0.5), clip(1, 0.4)]);
        assert!(doc.validate(2, 1).is_err());
        let doc = VideoDoc::new("a", vec![clip(0, 0.2), clip(2, 0.4)]);
        let err = doc.validate(2, 1).unwrap_err().to_string();
        assert!(err.contains("document a"), "{err}");
        let doc = VideoDoc::new("a", vec![]);
        assert!(doc.validate(2, 1).is_err());
    }

    #[test]
    fn empty_corpus_is_valid() {
        assert!(Corpus::new(vec![], 3, 1).is_ok());
    }

    #[test]
    fn grouping_keeps_order() {
        let mk = |d: &str, t: f64| FeatureClip {
            doc_id: d.into(),
            human_feat: vec![t],
            object_feat: vec![],
            t,
            frame_span: None,
        };
        let feats = vec![mk("b", 0.1), mk("a", 0.2), mk("b", 0.3)];
        let g = group_features(&feats);
        assert_eq!(g[0].0, "b");
        assert_eq!(g[0].1.len(), 2);
        assert_eq!(g[1].0, "a");
    }
}

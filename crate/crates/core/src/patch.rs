//! Segmentation of assigned documents and detection of forgotten actions.
//!
//! A query document is segmented into runs of equal action-topic. If some
//! topics are absent, every (absent action-topic, object-topic, boundary)
//! triple is scored by how plausible a clip of that kind would be at that
//! boundary; training segments matching the best triples are candidates,
//! and the candidate whose features best bridge the two query segments
//! around the boundary is reported when its patch score reaches the
//! threshold.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FeatureClip, VideoDoc};
use crate::error::{CatmError, Result};
use crate::model::{log_stick_breaking, ObjectMode, PriorMode};
use crate::sampler::{DocInference, InferenceModel, TimeParams};

/// Hypotheses kept per query document.
pub const TOP_HYPOTHESES: usize = 3;
/// Fraction of a segment's length used for its front, middle and tail windows.
pub const WINDOW_FRACTION: f64 = 0.2;

/// A maximal run of clips sharing one action-topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    /// First clip, inclusive.
    pub start_clip: usize,
    /// Last clip, inclusive.
    pub end_clip: usize,
    pub action_topic: usize,
    /// Mean assignment probability of the segment's clips.
    pub mean_prob: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_clip - self.start_clip + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Splits a document into maximal runs of equal `z1`.
pub fn segment_doc(doc: &VideoDoc, z1: &[usize], probs: &[f64]) -> Result<Vec<Segment>> {
    if z1.len() != doc.len() || probs.len() != doc.len() {
        return Err(CatmError::doc(
            &doc.doc_id,
            format!(
                "{} clips but {} assignments and {} probabilities",
                doc.len(),
                z1.len(),
                probs.len()
            ),
        ));
    }
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=z1.len() {
        if i == z1.len() || z1[i] != z1[start] {
            out.push(Segment {
                doc_id: doc.doc_id.clone(),
                start_clip: start,
                end_clip: i - 1,
                action_topic: z1[start],
                mean_prob: probs[start..i].iter().sum::<f64>() / (i - start) as f64,
                t_start: doc.clips[start].t,
                t_end: doc.clips[i - 1].t,
            });
            start = i;
        }
    }
    Ok(out)
}

/// Candidate insertion points: midpoints between consecutive segments, or
/// when there is only one segment, points halfway from each end of the
/// document to its first and last clip.
pub fn segmentation_points(segments: &[Segment]) -> Vec<f64> {
    match segments {
        [] => Vec::new(),
        [only] => vec![only.t_start / 2.0, (only.t_end + 1.0) / 2.0],
        _ => segments
            .windows(2)
            .map(|w| 0.5 * (w[0].t_end + w[1].t_start))
            .collect(),
    }
}

/// A guess at what was forgotten and where.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchHypothesis {
    pub k: usize,
    pub p: usize,
    pub t_s: f64,
    pub log_score: f64,
}

/// Options for [`enumerate_hypotheses`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisOptions {
    pub top: usize,
    /// Include the marginal word-likelihood term in the score.
    pub word_term: bool,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        HypothesisOptions {
            top: TOP_HYPOTHESES,
            word_term: true,
        }
    }
}

/// Log topic proportions of a query document.
fn doc_log_proportions(model: &InferenceModel, inf: &DocInference) -> (Vec<f64>, Vec<f64>) {
    let c = model.config();
    let (k, p) = (c.n_action_topics, c.effective_object_topics());
    match c.prior_mode {
        PriorMode::Correlated => (
            log_stick_breaking(&inf.v[..k - 1]),
            log_stick_breaking(&inf.v[k - 1..]),
        ),
        PriorMode::Dirichlet {
            alpha_action,
            alpha_object,
        } => {
            let props = |z: &[usize], m: usize, alpha: f64| {
                let mut counts = vec![0.0; m];
                z.iter().for_each(|&x| counts[x] += 1.0);
                let total = z.len() as f64 + m as f64 * alpha;
                counts
                    .iter()
                    .map(|c| ((c + alpha) / total).ln())
                    .collect::<Vec<_>>()
            };
            (
                props(&inf.z1, k, alpha_action),
                props(&inf.z2, p, alpha_object),
            )
        }
    }
}

/// Log density of a hypothetical topic-`k` clip at `t_s` given the
/// document's existing clips. The hypothetical clip forms its own segment.
fn hypothetical_time(
    model: &InferenceModel,
    doc: &VideoDoc,
    z1: &[usize],
    k: usize,
    t_s: f64,
) -> f64 {
    match model.gibbs().time() {
        TimeParams::None => 0.0,
        TimeParams::Absolute(a) => a.log_pdf(k, t_s),
        TimeParams::Relative(r) => doc
            .clips
            .iter()
            .zip(z1)
            .map(|(c, &l)| {
                r.get(l, k).log_pdf_cross(c.t - t_s) + r.get(k, l).log_pdf_cross(t_s - c.t)
            })
            .sum(),
    }
}

/// `ln(sum_w omega(k, w) * sum_w omega(k, p, w))`, which is 0 up to rounding
/// since both are normalized distributions.
fn marginal_word_term(model: &InferenceModel, k: usize, p: usize) -> f64 {
    let g = model.gibbs();
    let c = &g.config;
    let counts = &g.counts;
    let h: f64 = (0..counts.n_human_words())
        .map(|w| counts.word_prob_h(k, w, c.beta1, None).unwrap_or(0.0))
        .sum();
    let o: f64 = if c.object_mode == ObjectMode::On {
        (0..counts.n_object_words())
            .map(|w| counts.word_prob_o(k, p, w, c.beta12, None).unwrap_or(0.0))
            .sum()
    } else {
        1.0
    };
    (h * o).ln()
}

/// Ranks (missing action-topic, object-topic, insertion point) triples for
/// a query document and keeps the best `opts.top`. Empty when every
/// action-topic already occurs in the document.
pub fn enumerate_hypotheses(
    doc: &VideoDoc,
    segments: &[Segment],
    inf: &DocInference,
    model: &InferenceModel,
    opts: &HypothesisOptions,
) -> Result<Vec<PatchHypothesis>> {
    let c = model.config();
    let (k_all, p_all) = (c.n_action_topics, c.effective_object_topics());
    if inf.z1.len() != doc.len() {
        return Err(CatmError::doc(
            &doc.doc_id,
            "assignment length differs from clip count",
        ));
    }
    let present: BTreeSet<usize> = segments.iter().map(|s| s.action_topic).collect();
    if present.len() == k_all {
        return Ok(Vec::new());
    }
    let (lp1, lp2) = doc_log_proportions(model, inf);
    let mut out = Vec::new();
    for t_s in segmentation_points(segments) {
        for k in (0..k_all).filter(|k| !present.contains(k)) {
            let time = hypothetical_time(model, doc, &inf.z1, k, t_s);
            for p in 0..p_all {
                let mut log_score = lp1[k] + time;
                if c.object_mode == ObjectMode::On {
                    log_score += lp2[p];
                }
                if opts.word_term {
                    log_score += marginal_word_term(model, k, p);
                }
                out.push(PatchHypothesis {
                    k,
                    p,
                    t_s,
                    log_score,
                });
            }
        }
    }
    // stable: equal scores keep enumeration order
    out.sort_by(|a, b| b.log_score.total_cmp(&a.log_score));
    out.truncate(opts.top);
    Ok(out)
}

/// A training segment with its modal object-topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedSegment {
    pub segment: Segment,
    /// Position of the segment within its document.
    pub index: usize,
    pub object_topic: usize,
}

/// Segments of the training corpus under its final assignments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingIndex {
    pub segments: Vec<IndexedSegment>,
}

impl TrainingIndex {
    /// `z1`, `z2` and `probs` are indexed like `corpus.docs`.
    pub fn new(
        corpus: &Corpus,
        z1: &[Vec<usize>],
        z2: &[Vec<usize>],
        probs: &[Vec<f64>],
    ) -> Result<Self> {
        if z1.len() != corpus.len() || z2.len() != corpus.len() || probs.len() != corpus.len() {
            return Err(CatmError::DimensionMismatch {
                expected: corpus.len(),
                got: z1.len().min(z2.len()).min(probs.len()),
            });
        }
        let mut segments = Vec::new();
        for (d, doc) in corpus.docs.iter().enumerate() {
            if z2[d].len() != doc.len() {
                return Err(CatmError::doc(
                    &doc.doc_id,
                    "object assignments differ from clip count",
                ));
            }
            for (index, s) in segment_doc(doc, &z1[d], &probs[d])?.into_iter().enumerate() {
                let object_topic = modal(&z2[d][s.start_clip..=s.end_clip]);
                segments.push(IndexedSegment {
                    segment: s,
                    index,
                    object_topic,
                });
            }
        }
        Ok(TrainingIndex { segments })
    }
}

/// Most frequent value; ties go to the smallest.
fn modal(xs: &[usize]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    xs.iter().for_each(|&x| *counts.entry(x).or_default() += 1);
    counts
        .iter()
        .rev()
        .max_by_key(|(_, &n)| n)
        .map_or(0, |(&x, _)| x)
}

/// A training segment matched to one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Index into [`TrainingIndex::segments`].
    pub segment: usize,
    /// Index into the hypothesis list.
    pub hypothesis: usize,
}

/// Training segments whose action-topic and modal object-topic match a
/// hypothesis, in hypothesis order then index order.
pub fn candidate_set(hypotheses: &[PatchHypothesis], index: &TrainingIndex) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (h, hyp) in hypotheses.iter().enumerate() {
        for (i, s) in index.segments.iter().enumerate() {
            if s.segment.action_topic == hyp.k && s.object_topic == hyp.p {
                out.push(Candidate {
                    segment: i,
                    hypothesis: h,
                });
            }
        }
    }
    out
}

/// Per-clip feature vectors, keyed by document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureStore {
    docs: BTreeMap<String, Vec<Vec<f64>>>,
}

impl FeatureStore {
    /// Aligns feature clips with each document's clips by timestamp. Human
    /// and object features are concatenated.
    pub fn new(features: &[FeatureClip], corpus: &Corpus) -> Result<Self> {
        crate::corpus::validate_features(features)?;
        let mut by_doc: BTreeMap<&str, Vec<&FeatureClip>> = BTreeMap::new();
        for f in features {
            by_doc.entry(f.doc_id.as_str()).or_default().push(f);
        }
        let mut docs = BTreeMap::new();
        for doc in &corpus.docs {
            let Some(fs) = by_doc.get(doc.doc_id.as_str()) else {
                continue;
            };
            let mut rows = Vec::with_capacity(doc.len());
            for (i, clip) in doc.clips.iter().enumerate() {
                let f = fs
                    .iter()
                    .find(|f| (f.t - clip.t).abs() < 1e-9)
                    .ok_or_else(|| {
                        CatmError::MissingFeatures(format!(
                            "{}: clip {i} has no feature vector",
                            doc.doc_id
                        ))
                    })?;
                rows.push(f.human_feat.iter().chain(&f.object_feat).copied().collect());
            }
            docs.insert(doc.doc_id.clone(), rows);
        }
        Ok(FeatureStore { docs })
    }

    pub fn from_map(docs: BTreeMap<String, Vec<Vec<f64>>>) -> Self {
        FeatureStore { docs }
    }

    pub fn get(&self, doc_id: &str) -> Result<&[Vec<f64>]> {
        self.docs.get(doc_id).map(Vec::as_slice).ok_or_else(|| {
            CatmError::MissingFeatures(format!(
                "no features for {doc_id}; supply feature files or run in word-only mode"
            ))
        })
    }

    fn segment<'a>(&'a self, s: &Segment) -> Result<&'a [Vec<f64>]> {
        let rows = self.get(&s.doc_id)?;
        rows.get(s.start_clip..=s.end_clip).ok_or_else(|| {
            CatmError::MissingFeatures(format!("{}: features shorter than its segments", s.doc_id))
        })
    }
}

fn window_len(n: usize) -> usize {
    ((n as f64 * WINDOW_FRACTION).round() as usize).clamp(1, n.max(1))
}

fn front(x: &[Vec<f64>]) -> &[Vec<f64>] {
    &x[..window_len(x.len())]
}

fn tail(x: &[Vec<f64>]) -> &[Vec<f64>] {
    &x[x.len() - window_len(x.len())..]
}

fn middle(x: &[Vec<f64>]) -> &[Vec<f64>] {
    let w = window_len(x.len());
    let s = (x.len() - w) / 2;
    &x[s..s + w]
}

/// Mean pairwise Euclidean distance between two sets of vectors.
pub fn window_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for x in a {
        for y in b {
            total += x
                .iter()
                .zip(y)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
        }
    }
    total / (a.len() * b.len()) as f64
}

/// How well a candidate segment fills the gap between the query segments
/// before and after the insertion point: its middle should differ from
/// both, while its front matches the tail before and its tail matches the
/// front after. With one side missing only that side is compared.
pub fn patch_score(
    candidate: &[Vec<f64>],
    before: Option<&[Vec<f64>]>,
    after: Option<&[Vec<f64>]>,
) -> Result<f64> {
    if candidate.is_empty()
        || before.is_some_and(<[_]>::is_empty)
        || after.is_some_and(<[_]>::is_empty)
    {
        return Err(CatmError::MissingFeatures(
            "patch score needs non-empty segments".into(),
        ));
    }
    let (pf, pm, pt) = (front(candidate), middle(candidate), tail(candidate));
    match (before.map(tail), after.map(front)) {
        (Some(qt), Some(qf)) => Ok(0.5 * (window_distance(pm, qf) + window_distance(pm, qt))
            - window_distance(pf, qt).max(window_distance(pt, qf))),
        (Some(qt), None) => Ok(window_distance(pm, qt) - window_distance(pf, qt)),
        (None, Some(qf)) => Ok(window_distance(pm, qf) - window_distance(pt, qf)),
        (None, None) => Err(CatmError::InvalidInput(
            "patch score needs a neighboring segment".into(),
        )),
    }
}

/// The query segments immediately before and after `t_s`.
fn neighbors(segments: &[Segment], t_s: f64) -> (Option<&Segment>, Option<&Segment>) {
    let before = segments.iter().rev().find(|s| s.t_end < t_s);
    let after = segments.iter().find(|s| s.t_start > t_s);
    (before, after)
}

/// Mean patch score of every interior training segment against its own
/// neighbors. Zero, with a warning, when there are none.
pub fn patch_threshold(index: &TrainingIndex, features: &FeatureStore) -> Result<f64> {
    let mut by_doc: BTreeMap<&str, Vec<&Segment>> = BTreeMap::new();
    for s in &index.segments {
        by_doc
            .entry(s.segment.doc_id.as_str())
            .or_default()
            .push(&s.segment);
    }
    let (mut total, mut n) = (0.0, 0usize);
    for segs in by_doc.values() {
        for w in segs.windows(3) {
            let cand = features.segment(w[1])?;
            let before = features.segment(w[0])?;
            let after = features.segment(w[2])?;
            total += patch_score(cand, Some(before), Some(after))?;
            n += 1;
        }
    }
    if n == 0 {
        log::warn!("no interior training segments; patch threshold set to 0");
        return Ok(0.0);
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    NoActionForgotten,
    Forgotten,
}

/// The training segment retrieved to patch a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenPatch {
    pub train_doc: String,
    /// Position of the segment within its training document.
    pub segment: usize,
    pub start_clip: usize,
    pub end_clip: usize,
    pub k: usize,
    pub p: usize,
    pub t_s: f64,
    /// Feature patch score, or the hypothesis log-score in word-only mode.
    pub patch_score: f64,
}

/// Outcome of forgotten-action detection for one query document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchResult {
    pub doc_id: String,
    pub decision: Decision,
    pub hypotheses: Vec<PatchHypothesis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen: Option<ChosenPatch>,
    /// `None` in word-only mode.
    pub threshold: Option<f64>,
}

/// Frozen inputs shared by every query.
#[derive(Debug, Clone, Copy)]
pub struct PatchContext<'a> {
    pub model: &'a InferenceModel,
    pub index: &'a TrainingIndex,
    /// Training and query features; `None` selects word-only mode.
    pub features: Option<&'a FeatureStore>,
    pub threshold: f64,
    pub hypotheses: HypothesisOptions,
}

/// Decides whether an action is missing from `doc`, given its inferred
/// assignments. In word-only mode the best-ranked hypothesis with a
/// non-empty candidate set is reported without thresholding.
pub fn detect_forgotten(
    doc: &VideoDoc,
    inf: &DocInference,
    ctx: &PatchContext<'_>,
) -> Result<PatchResult> {
    let segments = segment_doc(doc, &inf.z1, &inf.prob)?;
    let hypotheses = enumerate_hypotheses(doc, &segments, inf, ctx.model, &ctx.hypotheses)?;
    let mut result = PatchResult {
        doc_id: doc.doc_id.clone(),
        decision: Decision::NoActionForgotten,
        hypotheses,
        chosen: None,
        threshold: ctx.features.map(|_| ctx.threshold),
    };
    let candidates = candidate_set(&result.hypotheses, ctx.index);
    if candidates.is_empty() {
        return Ok(result);
    }
    let choose = |c: &Candidate, score: f64| {
        let s = &ctx.index.segments[c.segment];
        let h = &result.hypotheses[c.hypothesis];
        ChosenPatch {
            train_doc: s.segment.doc_id.clone(),
            segment: s.index,
            start_clip: s.segment.start_clip,
            end_clip: s.segment.end_clip,
            k: h.k,
            p: h.p,
            t_s: h.t_s,
            patch_score: score,
        }
    };
    let Some(store) = ctx.features else {
        let c = &candidates[0];
        let chosen = choose(c, result.hypotheses[c.hypothesis].log_score);
        result.decision = Decision::Forgotten;
        result.chosen = Some(chosen);
        return Ok(result);
    };
    let query = store.get(&doc.doc_id)?;
    if query.len() != doc.len() {
        return Err(CatmError::MissingFeatures(format!(
            "{}: {} feature vectors for {} clips",
            doc.doc_id,
            query.len(),
            doc.len()
        )));
    }
    let mut best: Option<(f64, &Candidate)> = None;
    for c in &candidates {
        let (before, after) = neighbors(&segments, result.hypotheses[c.hypothesis].t_s);
        let slice = |s: &Segment| &query[s.start_clip..=s.end_clip];
        let cand = store.segment(&ctx.index.segments[c.segment].segment)?;
        let score = patch_score(cand, before.map(slice), after.map(slice))?;
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, c));
        }
    }
    let (score, c) = best.expect("non-empty candidate set");
    if score >= ctx.threshold {
        result.chosen = Some(choose(c, score));
        result.decision = Decision::Forgotten;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Clip;

    fn doc(n: usize) -> VideoDoc {
        let clips = (0..n)
            .map(|i| Clip {
                human_word: 0,
                object_word: 0,
                t: (i as f64 + 0.5) / n as f64,
            })
            .collect();
        VideoDoc::new("q", clips)
    }

    #[test]
    fn segments_of_runs() {
        let d = doc(6);
        let s = segment_doc(&d, &[1, 1, 2, 2, 2, 1], &[1.0; 6]).unwrap();
        let r: Vec<_> = s
            .iter()
            .map(|s| (s.start_clip, s.end_clip, s.action_topic))
            .collect();
        assert_eq!(r, vec![(0, 1, 1), (2, 4, 2), (5, 5, 1)]);
        assert_eq!(segment_doc(&d, &[3; 6], &[1.0; 6]).unwrap().len(), 1);
        assert_eq!(
            segment_doc(&d, &[0, 1, 0, 1, 0, 1], &[1.0; 6])
                .unwrap()
                .len(),
            6
        );
        assert!(segment_doc(&d, &[0; 5], &[1.0; 5]).is_err());
    }

    #[test]
    fn boundary_points() {
        let d = doc(4);
        let s = segment_doc(&d, &[0, 0, 1, 1], &[1.0; 4]).unwrap();
        assert_eq!(segmentation_points(&s), vec![0.5]);
        let one = segment_doc(&d, &[0; 4], &[1.0; 4]).unwrap();
        assert_eq!(segmentation_points(&one), vec![0.0625, 0.9375]);
    }

    fn rows(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn matching_edges_leave_middle_distance() {
        let cand = rows(&[1.0, 1.0, 5.0, 5.0, 5.0, 9.0, 9.0, 9.0, 9.0, 2.0]);
        // 20% windows of 10 clips are 2 clips
        let before = rows(&[0.0, 0.0, 1.0, 1.0]);
        let after = rows(&[9.0, 2.0, 7.0]);
        let s = patch_score(&cand, Some(&before), Some(&after)).unwrap();
        // front [1,1] vs tail [1]: 0; tail [9,2] vs front [9]: 3.5; middle [5,9] vs [9] = 2, vs [1] = 6
        assert!((s - (0.5 * (2.0 + 6.0) - 3.5)).abs() < 1e-12);
    }

    #[test]
    fn self_similar_candidate_scores_zero() {
        let seg = rows(&[3.0, 3.0, 3.0, 3.0, 3.0]);
        assert_eq!(patch_score(&seg, Some(&seg), Some(&seg)).unwrap(), 0.0);
    }

    #[test]
    fn one_sided_score() {
        let cand = rows(&[0.0, 4.0, 8.0, 4.0, 1.0]);
        let after = rows(&[1.0, 1.0]);
        let s = patch_score(&cand, None, Some(&after)).unwrap();
        assert_eq!(s, 7.0 - 0.0);
    }

    #[test]
    fn modal_ties() {
        assert_eq!(modal(&[2, 1, 2, 1]), 1);
        assert_eq!(modal(&[3, 3, 0]), 3);
    }

    #[test]
    fn report_json_shape() {
        let r = PatchResult {
            doc_id: "q".into(),
            decision: Decision::NoActionForgotten,
            hypotheses: vec![],
            chosen: None,
            threshold: Some(0.5),
        };
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(
            j,
            r#"{"doc_id":"q","decision":"no_action_forgotten","hypotheses":[],"threshold":0.5}"#
        );
    }
}

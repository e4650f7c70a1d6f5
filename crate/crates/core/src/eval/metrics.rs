//! Frame, segment and patching metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CatmError, Result};
use crate::model::ForgottenTruth;

/// Default intersection-over-union needed to detect a segment.
pub const SEG_OVERLAP: f64 = 0.4;

/// Per-frame labels of a document. With `frame_spans`, each frame takes the
/// most common label among the clips covering it (ties to the smallest
/// label) and uncovered frames are skipped; without, every clip is a frame.
pub fn frame_labels(labels: &[usize], frame_spans: Option<&[(u64, u64)]>) -> Result<Vec<usize>> {
    let Some(spans) = frame_spans else {
        return Ok(labels.to_vec());
    };
    if spans.len() != labels.len() {
        return Err(CatmError::DimensionMismatch {
            expected: labels.len(),
            got: spans.len(),
        });
    }
    let Some(first) = spans.iter().map(|s| s.0).min() else {
        return Ok(Vec::new());
    };
    let last = spans.iter().map(|s| s.1).max().unwrap_or(first);
    let mut out = Vec::new();
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for f in first..=last {
        votes.clear();
        for (&(s, e), &l) in spans.iter().zip(labels) {
            if s <= f && f <= e {
                *votes.entry(l).or_default() += 1;
            }
        }
        // max_by_key keeps the last maximum; iterate in reverse for the smallest label
        if let Some((&l, _)) = votes.iter().rev().max_by_key(|(_, &n)| n) {
            out.push(l);
        }
    }
    Ok(out)
}

/// `m[k][c]` is the fraction of class `c`'s
/// frames labeled with topic `k`. Returns the matrix and the sorted list of
/// classes that index its columns.
pub fn overlap_matrix(
    topics: &[usize],
    classes: &[usize],
    n_topics: usize,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if topics.len() != classes.len() {
        return Err(CatmError::DimensionMismatch {
            expected: classes.len(),
            got: topics.len(),
        });
    }
    if let Some(&k) = topics.iter().find(|&&k| k >= n_topics) {
        return Err(CatmError::InvalidInput(format!(
            "topic {k} outside {n_topics} topics"
        )));
    }
    let present: Vec<usize> = classes
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col: BTreeMap<usize, usize> = present.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut m = vec![vec![0.0; present.len()]; n_topics];
    let mut totals = vec![0.0; present.len()];
    for (&k, c) in topics.iter().zip(classes) {
        let j = col[c];
        m[k][j] += 1.0;
        totals[j] += 1.0;
    }
    for row in &mut m {
        for (x, t) in row.iter_mut().zip(&totals) {
            *x /= t;
        }
    }
    Ok((m, present))
}

fn per_class_recall(pred: &[usize], gt: &[usize]) -> Result<BTreeMap<usize, f64>> {
    if pred.len() != gt.len() {
        return Err(CatmError::DimensionMismatch {
            expected: gt.len(),
            got: pred.len(),
        });
    }
    if gt.is_empty() {
        return Err(CatmError::InvalidInput("no ground-truth frames".into()));
    }
    let mut hits: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&p, &g) in pred.iter().zip(gt) {
        let e = hits.entry(g).or_default();
        e.1 += 1;
        if p == g {
            e.0 += 1;
        }
    }
    Ok(hits
        .into_iter()
        .map(|(c, (h, n))| (c, h as f64 / n as f64))
        .collect())
}

/// Per-class frame accuracy (recall), averaged over the classes present in
/// the ground truth.
pub fn frame_acc(pred: &[usize], gt: &[usize]) -> Result<f64> {
    let r = per_class_recall(pred, gt)?;
    Ok(r.values().sum::<f64>() / r.len() as f64)
}

/// Frame accuracy of each ground-truth class.
pub fn frame_acc_per_class(pred: &[usize], gt: &[usize]) -> Result<BTreeMap<usize, f64>> {
    per_class_recall(pred, gt)
}

/// Fraction of all frames labeled correctly.
pub fn frame_acc_micro(pred: &[usize], gt: &[usize]) -> Result<f64> {
    per_class_recall(pred, gt)?;
    let hits = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gt.len() as f64)
}

/// A labeled interval of frames (inclusive) in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub doc_id: String,
    pub start: u64,
    pub end: u64,
    pub class: usize,
    /// Ranking score; mean assignment probability for predictions.
    pub score: f64,
}

/// Maximal runs of equal labels as frame intervals. Without spans the clip
/// index is the frame; `scores` (per clip) are averaged over each run.
pub fn segments_from_labels(
    doc_id: &str,
    labels: &[usize],
    frame_spans: Option<&[(u64, u64)]>,
    scores: Option<&[f64]>,
) -> Result<Vec<LabeledSegment>> {
    for len in [frame_spans.map(<[_]>::len), scores.map(<[_]>::len)]
        .into_iter()
        .flatten()
    {
        if len != labels.len() {
            return Err(CatmError::DimensionMismatch {
                expected: labels.len(),
                got: len,
            });
        }
    }
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            let (s, e) = match frame_spans {
                Some(sp) => (sp[start].0, sp[i - 1].1),
                None => (start as u64, (i - 1) as u64),
            };
            let score = scores.map_or(1.0, |sc| {
                sc[start..i].iter().sum::<f64>() / (i - start) as f64
            });
            out.push(LabeledSegment {
                doc_id: doc_id.to_string(),
                start: s,
                end: e,
                class: labels[start],
                score,
            });
            start = i;
        }
    }
    Ok(out)
}

/// Intersection over union of two inclusive frame intervals.
pub fn overlap_iou(a: (u64, u64), b: (u64, u64)) -> f64 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if hi < lo {
        return 0.0;
    }
    let inter = (hi - lo + 1) as f64;
    let union = (a.1 - a.0 + 1) as f64 + (b.1 - b.0 + 1) as f64 - inter;
    inter / union
}

fn detects(p: &LabeledSegment, g: &LabeledSegment, thresh: f64) -> bool {
    p.doc_id == g.doc_id
        && p.class == g.class
        && overlap_iou((p.start, p.end), (g.start, g.end)) >= thresh
}

/// Per-class fraction of ground-truth segments detected by some predicted
/// segment of the same class and document.
pub fn seg_acc_per_class(
    pred: &[LabeledSegment],
    gt: &[LabeledSegment],
    thresh: f64,
) -> BTreeMap<usize, f64> {
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for g in gt {
        let e = tally.entry(g.class).or_default();
        e.1 += 1;
        if pred.iter().any(|p| detects(p, g, thresh)) {
            e.0 += 1;
        }
    }
    tally
        .into_iter()
        .map(|(c, (h, n))| (c, h as f64 / n as f64))
        .collect()
}

/// Mean over ground-truth classes of [`seg_acc_per_class`]; 0 without
/// ground-truth segments.
pub fn seg_acc(pred: &[LabeledSegment], gt: &[LabeledSegment], thresh: f64) -> f64 {
    mean(seg_acc_per_class(pred, gt, thresh).values())
}

/// Average precision of each ground-truth class. Predictions are ranked by
/// score (stable for ties); each ground-truth segment can be matched once.
pub fn seg_ap_per_class(
    pred: &[LabeledSegment],
    gt: &[LabeledSegment],
    thresh: f64,
) -> BTreeMap<usize, f64> {
    let classes: BTreeSet<usize> = gt.iter().map(|g| g.class).collect();
    let mut out = BTreeMap::new();
    for c in classes {
        let gts: Vec<&LabeledSegment> = gt.iter().filter(|g| g.class == c).collect();
        let mut preds: Vec<&LabeledSegment> = pred.iter().filter(|p| p.class == c).collect();
        preds.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut matched = vec![false; gts.len()];
        let (mut tp, mut ap) = (0usize, 0.0);
        for (rank, p) in preds.iter().enumerate() {
            let hit = gts
                .iter()
                .enumerate()
                .filter(|(i, g)| !matched[*i] && detects(p, g, thresh))
                .max_by(|a, b| {
                    let ia = overlap_iou((p.start, p.end), (a.1.start, a.1.end));
                    let ib = overlap_iou((p.start, p.end), (b.1.start, b.1.end));
                    ia.total_cmp(&ib).then(b.0.cmp(&a.0))
                })
                .map(|(i, _)| i);
            if let Some(i) = hit {
                matched[i] = true;
                tp += 1;
                ap += tp as f64 / (rank + 1) as f64;
            }
        }
        out.insert(c, ap / gts.len() as f64);
    }
    out
}

/// Mean over ground-truth classes of [`seg_ap_per_class`].
pub fn seg_ap(pred: &[LabeledSegment], gt: &[LabeledSegment], thresh: f64) -> f64 {
    mean(seg_ap_per_class(pred, gt, thresh).values())
}

fn mean<'a>(xs: impl Iterator<Item = &'a f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// A patching decision in ground-truth class space: the mapped class and
/// insertion point of the detected forgotten action, or `None` when the
/// document was judged complete.
pub type PatchCall = Option<(usize, f64)>;

/// Whether one patching decision agrees with the truth.
pub fn patch_correct(call: PatchCall, truth: Option<&ForgottenTruth>) -> bool {
    match (call, truth) {
        (None, None) => true,
        (Some((class, t_s)), Some(f)) => class == f.class && f.t_lo <= t_s && t_s <= f.t_hi,
        _ => false,
    }
}

/// Fraction of documents whose patching decision is correct.
pub fn pa_acc(calls: &[PatchCall], truth: &[Option<ForgottenTruth>]) -> Result<f64> {
    if calls.len() != truth.len() {
        return Err(CatmError::DimensionMismatch {
            expected: truth.len(),
            got: calls.len(),
        });
    }
    if calls.is_empty() {
        return Err(CatmError::InvalidInput(
            "no patching decisions to score".into(),
        ));
    }
    let ok = calls
        .iter()
        .zip(truth)
        .filter(|(c, t)| patch_correct(**c, t.as_ref()))
        .count();
    Ok(ok as f64 / calls.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(doc: &str, s: u64, e: u64, class: usize, score: f64) -> LabeledSegment {
        LabeledSegment {
            doc_id: doc.into(),
            start: s,
            end: e,
            class,
            score,
        }
    }

    #[test]
    fn iou_worked_example() {
        assert!((overlap_iou((10, 20), (12, 24)) - 0.6).abs() < 1e-12);
        assert_eq!(overlap_iou((0, 5), (6, 9)), 0.0);
        assert_eq!(overlap_iou((3, 9), (3, 9)), 1.0);
    }

    #[test]
    fn frame_acc_class_average() {
        assert_eq!(frame_acc(&[0, 0, 1], &[0, 0, 1]).unwrap(), 1.0);
        assert_eq!(frame_acc(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(frame_acc_micro(&[0, 0, 0], &[0, 0, 1]).unwrap(), 2.0 / 3.0);
        assert!(frame_acc(&[], &[]).is_err());
    }

    #[test]
    fn two_point_ap() {
        let gt = vec![seg("a", 0, 9, 0, 0.0)];
        let good = seg("a", 0, 9, 0, 0.9);
        let bad = seg("a", 20, 29, 0, 0.5);
        assert_eq!(seg_ap(&[good.clone(), bad.clone()], &gt, SEG_OVERLAP), 1.0);
        let mut good_low = good;
        good_low.score = 0.1;
        assert_eq!(seg_ap(&[good_low, bad], &gt, SEG_OVERLAP), 0.5);
    }

    #[test]
    fn no_double_matching() {
        let gt = vec![seg("a", 0, 9, 0, 0.0)];
        let p = vec![seg("a", 0, 9, 0, 0.9), seg("a", 0, 9, 0, 0.8)];
        assert_eq!(seg_ap(&p, &gt, SEG_OVERLAP), 1.0);
        assert_eq!(seg_acc(&p, &gt, SEG_OVERLAP), 1.0);
    }

    #[test]
    fn segments_respect_documents() {
        let gt = vec![seg("a", 0, 9, 0, 0.0)];
        assert_eq!(seg_acc(&[seg("b", 0, 9, 0, 1.0)], &gt, SEG_OVERLAP), 0.0);
    }

    #[test]
    fn runs_to_segments() {
        let s = segments_from_labels("d", &[1, 1, 2], None, Some(&[0.5, 1.0, 0.2])).unwrap();
        assert_eq!(s, vec![seg("d", 0, 1, 1, 0.75), seg("d", 2, 2, 2, 0.2)]);
        let spans = [(0, 19), (10, 29), (20, 39)];
        let s = segments_from_labels("d", &[1, 1, 2], Some(&spans), None).unwrap();
        assert_eq!(
            (s[0].start, s[0].end, s[1].start, s[1].end),
            (0, 29, 20, 39)
        );
    }

    #[test]
    fn majority_vote_frames() {
        let f = frame_labels(&[3, 5], Some(&[(0, 3), (2, 4)])).unwrap();
        // frames 2 and 3 are tied between 3 and 5
        assert_eq!(f, vec![3, 3, 3, 3, 5]);
    }

    #[test]
    fn normalized_overlap() {
        let (m, classes) = overlap_matrix(&[0, 0, 1, 1], &[4, 4, 4, 7], 2).unwrap();
        assert_eq!(classes, vec![4, 7]);
        assert_eq!(m, vec![vec![2.0 / 3.0, 0.0], vec![1.0 / 3.0, 1.0]]);
    }

    #[test]
    fn pa_cases() {
        let f = ForgottenTruth {
            class: 2,
            t_lo: 0.3,
            t_hi: 0.5,
        };
        assert_eq!(pa_acc(&[None, None], &[None, None]).unwrap(), 1.0);
        assert_eq!(
            pa_acc(&[Some((2, 0.4)), None], &[Some(f), Some(f)]).unwrap(),
            0.5
        );
        assert!(!patch_correct(Some((2, 0.6)), Some(&f)));
        assert!(!patch_correct(Some((1, 0.4)), Some(&f)));
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lp::{map_topics_lp, TopicMapping};
use super::metrics::{
    frame_acc_micro, frame_acc_per_class, frame_labels, overlap_matrix, seg_acc_per_class,
    seg_ap_per_class, segments_from_labels, LabeledSegment, SEG_OVERLAP,
};
use crate::corpus::VideoDoc;
use crate::error::{CatmError, Result};

/// Metric values, overall and per ground-truth class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frame_acc: f64,
    pub seg_acc: f64,
    pub seg_ap: f64,
    pub pa_acc: Option<f64>,
    pub frame_acc_per_class: BTreeMap<usize, f64>,
    pub seg_acc_per_class: BTreeMap<usize, f64>,
    pub seg_ap_per_class: BTreeMap<usize, f64>,
}

impl EvalReport {
    /// `(metric, class_or_overall, value)` rows.
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        let mut push = |name: &str, overall: f64, per: &BTreeMap<usize, f64>| {
            out.push((name.to_string(), "overall".to_string(), overall));
            for (c, v) in per {
                out.push((name.to_string(), c.to_string(), *v));
            }
        };
        push("frame_acc", self.frame_acc, &self.frame_acc_per_class);
        push("seg_acc", self.seg_acc, &self.seg_acc_per_class);
        push("seg_ap", self.seg_ap, &self.seg_ap_per_class);
        if let Some(pa) = self.pa_acc {
            out.push(("pa_acc".to_string(), "overall".to_string(), pa));
        }
        out
    }
}

/// Options for [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub overlap: f64,
    /// Count frames globally instead of averaging per class.
    pub micro: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            overlap: SEG_OVERLAP,
            micro: false,
        }
    }
}

/// Maps topics to ground-truth classes over all frames, then scores the
/// mapped labels. `z1[d]` and `prob[d]` are the assignments and modal
/// probabilities of `docs[d]`, which must carry ground-truth labels.
pub fn evaluate(
    docs: &[&VideoDoc],
    z1: &[Vec<usize>],
    prob: &[Vec<f64>],
    n_topics: usize,
    opts: &EvalOptions,
) -> Result<(TopicMapping, EvalReport)> {
    check_inputs(docs, z1, prob)?;
    let mut topic_frames = Vec::new();
    let mut gt_frames = Vec::new();
    for (doc, z) in docs.iter().zip(z1) {
        let gt = doc.gt_labels.as_ref().expect("checked");
        let spans = doc.frame_spans.as_deref();
        topic_frames.extend(frame_labels(z, spans)?);
        gt_frames.extend(frame_labels(gt, spans)?);
    }
    let (m, classes) = overlap_matrix(&topic_frames, &gt_frames, n_topics)?;
    let mut mapping = map_topics_lp(&m)?;
    for c in &mut mapping.topic_to_class {
        *c = classes[*c];
    }
    let report = score_mapped(docs, z1, prob, &mapping, opts)?;
    Ok((mapping, report))
}

fn check_inputs(docs: &[&VideoDoc], z1: &[Vec<usize>], prob: &[Vec<f64>]) -> Result<()> {
    if z1.len() != docs.len() || prob.len() != docs.len() {
        return Err(CatmError::DimensionMismatch {
            expected: docs.len(),
            got: z1.len().min(prob.len()),
        });
    }
    for (doc, z) in docs.iter().zip(z1) {
        if doc.gt_labels.is_none() {
            return Err(CatmError::doc(&doc.doc_id, "no ground-truth labels"));
        }
        if z.len() != doc.len() {
            return Err(CatmError::doc(
                &doc.doc_id,
                "assignment length differs from clip count",
            ));
        }
    }
    Ok(())
}

/// Scores assignments under a given topic-to-class mapping, e.g. one
/// learned on the training set.
pub fn score_mapped(
    docs: &[&VideoDoc],
    z1: &[Vec<usize>],
    prob: &[Vec<f64>],
    mapping: &TopicMapping,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    check_inputs(docs, z1, prob)?;
    let mut mapped_frames = Vec::new();
    let mut gt_frames = Vec::new();
    for (doc, z) in docs.iter().zip(z1) {
        let spans = doc.frame_spans.as_deref();
        let mapped = map_labels(z, mapping)?;
        mapped_frames.extend(frame_labels(&mapped, spans)?);
        gt_frames.extend(frame_labels(
            doc.gt_labels.as_ref().expect("checked"),
            spans,
        )?);
    }
    let per_frame = frame_acc_per_class(&mapped_frames, &gt_frames)?;
    let frame_acc = if opts.micro {
        frame_acc_micro(&mapped_frames, &gt_frames)?
    } else {
        per_frame.values().sum::<f64>() / per_frame.len() as f64
    };

    let mut pred_segs: Vec<LabeledSegment> = Vec::new();
    let mut gt_segs: Vec<LabeledSegment> = Vec::new();
    for ((doc, z), p) in docs.iter().zip(z1).zip(prob) {
        let spans = doc.frame_spans.as_deref();
        let mapped = map_labels(z, mapping)?;
        pred_segs.extend(segments_from_labels(&doc.doc_id, &mapped, spans, Some(p))?);
        let gt = doc.gt_labels.as_ref().expect("checked above");
        gt_segs.extend(segments_from_labels(&doc.doc_id, gt, spans, None)?);
    }
    let seg_acc_pc = seg_acc_per_class(&pred_segs, &gt_segs, opts.overlap);
    let seg_ap_pc = seg_ap_per_class(&pred_segs, &gt_segs, opts.overlap);
    let avg = |m: &BTreeMap<usize, f64>| {
        if m.is_empty() {
            0.0
        } else {
            m.values().sum::<f64>() / m.len() as f64
        }
    };
    let report = EvalReport {
        frame_acc,
        seg_acc: avg(&seg_acc_pc),
        seg_ap: avg(&seg_ap_pc),
        pa_acc: None,
        frame_acc_per_class: per_frame,
        seg_acc_per_class: seg_acc_pc,
        seg_ap_per_class: seg_ap_pc,
    };
    Ok(report)
}

fn map_labels(z: &[usize], mapping: &TopicMapping) -> Result<Vec<usize>> {
    z.iter()
        .map(|&k| {
            mapping.class_of(k).ok_or_else(|| {
                CatmError::InvalidInput(format!("topic {k} is not covered by the mapping"))
            })
        })
        .collect()
}

//! Topic-to-class mapping and evaluation metrics.

mod lp;
mod metrics;
mod report;

pub use lp::{map_topics_exhaustive, map_topics_flow, map_topics_lp, TopicMapping};
pub use metrics::{
    frame_acc, frame_acc_micro, frame_acc_per_class, frame_labels, overlap_iou, overlap_matrix,
    pa_acc, patch_correct, seg_acc, seg_acc_per_class, seg_ap, seg_ap_per_class,
    segments_from_labels, LabeledSegment, PatchCall, SEG_OVERLAP,
};
pub use report::{evaluate, score_mapped, EvalOptions, EvalReport};

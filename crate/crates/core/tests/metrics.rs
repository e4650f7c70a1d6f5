use catm::eval::{
    frame_acc, map_topics_lp, overlap_iou, pa_acc, seg_acc, seg_ap, LabeledSegment, SEG_OVERLAP,
};
use catm::model::ForgottenTruth;
use proptest::prelude::*;

fn seg(doc: &str, start: u64, end: u64, class: usize, score: f64) -> LabeledSegment {
    LabeledSegment {
        doc_id: doc.into(),
        start,
        end,
        class,
        score,
    }
}

#[test]
fn interval_overlap_example() {
    assert!((overlap_iou((10, 20), (12, 24)) - 0.6).abs() < 1e-15);
    let gt = [seg("a", 12, 24, 0, 1.0)];
    assert_eq!(seg_acc(&[seg("a", 10, 20, 0, 1.0)], &gt, SEG_OVERLAP), 1.0);
    assert_eq!(seg_acc(&[seg("a", 30, 40, 0, 1.0)], &gt, SEG_OVERLAP), 0.0);
    assert_eq!(overlap_iou((3, 9), (3, 9)), 1.0);
}

#[test]
fn two_point_average_precision() {
    let gt = [seg("a", 0, 9, 0, 1.0)];
    let right = seg("a", 0, 9, 0, 0.9);
    let wrong = seg("a", 20, 29, 0, 0.1);
    assert_eq!(seg_ap(std::slice::from_ref(&right), &gt, SEG_OVERLAP), 1.0);
    assert_eq!(
        seg_ap(&[right.clone(), wrong.clone()], &gt, SEG_OVERLAP),
        1.0
    );
    let wrong_first = seg("a", 20, 29, 0, 0.95);
    assert_eq!(seg_ap(&[right, wrong_first], &gt, SEG_OVERLAP), 0.5);
}

#[test]
fn mapping_examples() {
    let m = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
    let x = map_topics_lp(&m).unwrap();
    assert_eq!(x.topic_to_class, vec![0, 1]);
    assert!((x.objective - 1.7).abs() < 1e-12);
    let m = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4]];
    let x = map_topics_lp(&m).unwrap();
    assert_eq!(x.topic_to_class, vec![0, 1, 0]);
    assert!((x.objective - 2.3).abs() < 1e-12);
    assert!(map_topics_lp(&[vec![0.5, 0.5]]).is_err());
}

#[test]
fn frame_accuracy_examples() {
    assert_eq!(frame_acc(&[1, 2, 2], &[1, 2, 2]).unwrap(), 1.0);
    assert_eq!(frame_acc(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.5);
    assert!(frame_acc(&[], &[]).is_err());
}

#[test]
fn patching_accuracy_examples() {
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
    assert_eq!(pa_acc(&[Some((2, 0.6))], &[Some(f)]).unwrap(), 0.0);
    assert_eq!(pa_acc(&[Some((1, 0.4))], &[Some(f)]).unwrap(), 0.0);
}

/// Precision/recall sweep over the ranked predictions of one class,
/// matching each prediction to the first free ground-truth segment.
fn brute_ap(pred: &[LabeledSegment], gt: &[LabeledSegment]) -> f64 {
    let mut order: Vec<&LabeledSegment> = pred.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut used = vec![false; gt.len()];
    let mut hits = Vec::new();
    for p in order {
        let free = (0..gt.len()).find(|&i| {
            !used[i]
                && gt[i].doc_id == p.doc_id
                && overlap_iou((p.start, p.end), (gt[i].start, gt[i].end)) >= SEG_OVERLAP
        });
        if let Some(i) = free {
            used[i] = true;
        }
        hits.push(free.is_some());
    }
    let mut tp = 0;
    let mut area = 0.0;
    for (r, &h) in hits.iter().enumerate() {
        if h {
            tp += 1;
            area += tp as f64 / (r + 1) as f64 / gt.len() as f64;
        }
    }
    area
}

fn frame_acc_tally(pred: &[usize], gt: &[usize]) -> f64 {
    let mut classes: Vec<usize> = gt.to_vec();
    classes.sort();
    classes.dedup();
    let recall: f64 = classes
        .iter()
        .map(|&c| {
            let n = gt.iter().filter(|&&g| g == c).count();
            let ok = pred
                .iter()
                .zip(gt)
                .filter(|(&p, &g)| g == c && p == c)
                .count();
            ok as f64 / n as f64
        })
        .sum();
    recall / classes.len() as f64
}

proptest! {
    #[test]
    fn frame_acc_equals_tally(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let (pred, gt): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        prop_assert!((frame_acc(&pred, &gt).unwrap() - frame_acc_tally(&pred, &gt)).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_symmetric(a in (0u64..50, 0u64..20), b in (0u64..50, 0u64..20)) {
        let (a, b) = ((a.0, a.0 + a.1), (b.0, b.0 + b.1));
        prop_assert_eq!(overlap_iou(a, b), overlap_iou(b, a));
        prop_assert!((0.0..=1.0).contains(&overlap_iou(a, b)));
    }

    // Disjoint ground truth makes the greedy match unambiguous.
    #[test]
    fn seg_ap_equals_pr_sweep(
        preds in prop::collection::vec((0u64..90, 1u64..12, 0.0f64..1.0), 1..12),
        n_gt in 1usize..5,
    ) {
        let gt: Vec<_> = (0..n_gt as u64).map(|i| seg("a", i * 20, i * 20 + 9, 0, 1.0)).collect();
        let pred: Vec<_> = preds.iter().map(|&(s, l, sc)| seg("a", s, s + l, 0, sc)).collect();
        prop_assert!((seg_ap(&pred, &gt, SEG_OVERLAP) - brute_ap(&pred, &gt)).abs() < 1e-12);
    }

    #[test]
    fn low_ranked_false_positive_never_raises_ap(
        preds in prop::collection::vec((0u64..90, 1u64..12, 0.01f64..1.0), 1..10),
    ) {
        let gt: Vec<_> = (0..3u64).map(|i| seg("a", i * 30, i * 30 + 9, 0, 1.0)).collect();
        let mut pred: Vec<_> = preds.iter().map(|&(s, l, sc)| seg("a", s, s + l, 0, sc)).collect();
        let before = seg_ap(&pred, &gt, SEG_OVERLAP);
        pred.push(seg("b", 0, 5, 0, 0.0));
        prop_assert!(seg_ap(&pred, &gt, SEG_OVERLAP) <= before + 1e-12);
    }
}

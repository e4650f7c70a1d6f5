//! Forward sampling from the generative model, for tests and benchmarks.
//!
//! Topic proportions, topic assignments and words follow the model exactly.
//! Timestamps are a generator contract: clips are evenly spaced, each
//! present action-topic occupies one contiguous segment, and the segment
//! order maximizes the relative-time likelihood. Up to six segments every
//! order is scored and ties are broken at random; beyond that an order is
//! accepted by rejection once it scores at least as well as the best of 50
//! random orders.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kernels::{cross_transform, stick_breaking, PairTime, RelTimeParams};
use super::moments::{doc_time_log_lik, segment_ids, DocGaps};
use super::prior::GlobalPrior;
use crate::corpus::{Clip, Corpus, FeatureClip, VideoDoc};
use crate::error::{CatmError, Result};
use crate::util::{sample_categorical, sample_dirichlet};

const EXACT_LAYOUT_MAX: usize = 6;
const REFERENCE_PERMUTATIONS: usize = 50;
const LAYOUT_BUDGET: usize = 10_000;

/// Ground-truth parameters to sample from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub prior: GlobalPrior,
    pub reltime: RelTimeParams,
    /// `K x N_wh` human-word distributions.
    pub phi_h: Vec<Vec<f64>>,
    /// `K x P x N_wo` object-word distributions.
    pub phi_o: Vec<Vec<Vec<f64>>>,
}

/// Knobs for [`TrueParams::synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticOptions {
    pub n_action_topics: usize,
    pub n_object_topics: usize,
    pub n_human_words: usize,
    pub n_object_words: usize,
    /// Symmetric Dirichlet concentration of the word distributions.
    pub word_concentration: f64,
    /// Diagonal of the prior covariance. Large values make segment lengths
    /// vary so much between documents that the pairwise time term prefers
    /// a shared template over the true layouts.
    pub prior_variance: f64,
    /// Probability that a later topic in the hidden order follows an
    /// earlier one.
    pub order_confidence: f64,
}

impl SyntheticOptions {
    pub fn new(n_action_topics: usize, n_object_topics: usize) -> Self {
        SyntheticOptions {
            n_action_topics,
            n_object_topics,
            n_human_words: 100,
            n_object_words: 50,
            word_concentration: 0.01,
            prior_variance: 0.05,
            order_confidence: 0.95,
        }
    }
}

/// Stick-breaking logits whose proportions are uniform over `m` topics.
fn uniform_logits(m: usize) -> Vec<f64> {
    (0..m.saturating_sub(1))
        .map(|i| -((m - i - 1) as f64).ln())
        .collect()
}

impl TrueParams {
    pub fn n_action_topics(&self) -> usize {
        self.phi_h.len()
    }

    pub fn n_object_topics(&self) -> usize {
        self.phi_o.first().map_or(1, Vec::len)
    }

    /// Random parameters with a hidden total order over the action-topics.
    ///
    /// Topic proportions are uniform on average, word distributions are
    /// sparse Dirichlet draws, and each ordered pair's time distribution puts
    /// 95% of its mass on the sign implied by the order, centered on the
    /// expected gap between equal-length segments.
    pub fn synthetic(opts: &SyntheticOptions, seed: u64) -> Result<Self> {
        let (k, p) = (opts.n_action_topics, opts.n_object_topics);
        if k == 0 || p == 0 || opts.n_human_words == 0 || opts.n_object_words == 0 {
            return Err(CatmError::Config(
                "topic and dictionary sizes must be positive".into(),
            ));
        }
        if !(opts.order_confidence > 0.5 && opts.order_confidence < 1.0) {
            return Err(CatmError::Config(
                "order_confidence must lie in (0.5, 1)".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mu = uniform_logits(k);
        mu.extend(uniform_logits(p));
        let dim = mu.len();
        let sigma = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { opts.prior_variance } else { 0.0 })
                    .collect()
            })
            .collect();

        let mut rank: Vec<usize> = (0..k).collect();
        rank.shuffle(&mut rng);
        let mut reltime = RelTimeParams::uniform(k, PairTime::FALLBACK);
        for a in 0..k {
            for b in 0..k {
                let d = rank[a] as f64 - rank[b] as f64;
                let gap = (d.abs() / k as f64).clamp(0.05, 0.95);
                let entry = reltime.get_mut(a, b);
                entry.var_pos = 0.5;
                entry.var_neg = 0.5;
                entry.same_var = 0.05;
                if d > 0.0 {
                    entry.b = opts.order_confidence;
                    entry.mean_pos = cross_transform(gap).0;
                } else if d < 0.0 {
                    entry.b = 1.0 - opts.order_confidence;
                    entry.mean_neg = cross_transform(-gap).0;
                }
            }
        }

        let phi_h = (0..k)
            .map(|_| sample_dirichlet(&mut rng, opts.word_concentration, opts.n_human_words))
            .collect();
        let phi_o = (0..k)
            .map(|_| {
                (0..p)
                    .map(|_| {
                        sample_dirichlet(&mut rng, opts.word_concentration, opts.n_object_words)
                    })
                    .collect()
            })
            .collect();
        Ok(TrueParams {
            prior: GlobalPrior { mu, sigma },
            reltime,
            phi_h,
            phi_o,
        })
    }

    fn validate(&self) -> Result<()> {
        let k = self.n_action_topics();
        let p = self.n_object_topics();
        if k == 0 {
            return Err(CatmError::Config("no action-topics".into()));
        }
        if self.prior.dim() != (k - 1) + (p - 1) {
            return Err(CatmError::Config(format!(
                "prior dimension {} does not match K = {k}, P = {p}",
                self.prior.dim()
            )));
        }
        if self.reltime.n_topics() != k || self.phi_o.len() != k {
            return Err(CatmError::Config("parameter tables disagree on K".into()));
        }
        let dists = self.phi_h.iter().chain(self.phi_o.iter().flatten());
        for d in dists {
            if d.iter().any(|x| !(*x >= 0.0)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(CatmError::Config(
                    "word distribution is not a probability vector".into(),
                ));
            }
        }
        Ok(())
    }
}

/// True assignments of one generated document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub doc_id: String,
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
}

/// All permutations of `items` in lexicographic order of positions.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Orders the present topics' segments to maximize the time likelihood.
fn sample_layout(
    counts: &[usize],
    gaps: &DocGaps,
    reltime: &RelTimeParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let mut present: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] > 0).collect();
    let expand = |order: &[usize]| -> Vec<usize> {
        order
            .iter()
            .flat_map(|&k| std::iter::repeat_n(k, counts[k]))
            .collect()
    };
    if present.len() <= 1 {
        return Ok(expand(&present));
    }
    if present.len() <= EXACT_LAYOUT_MAX {
        let mut best = f64::NEG_INFINITY;
        let mut winners = Vec::new();
        for order in permutations(&present) {
            let z = expand(&order);
            let ll = doc_time_log_lik(&z, gaps, reltime);
            if ll > best {
                best = ll;
                winners.clear();
            }
            if ll == best {
                winners.push(z);
            }
        }
        if !best.is_finite() {
            return Err(CatmError::RejectionBudget { attempts: 0 });
        }
        let pick = rng.random_range(0..winners.len());
        return Ok(winners.swap_remove(pick));
    }
    let mut reference = f64::NEG_INFINITY;
    for _ in 0..REFERENCE_PERMUTATIONS {
        present.shuffle(rng);
        reference = reference.max(doc_time_log_lik(&expand(&present), gaps, reltime));
    }
    for _ in 0..LAYOUT_BUDGET {
        present.shuffle(rng);
        let z = expand(&present);
        let ll = doc_time_log_lik(&z, gaps, reltime);
        if ll.is_finite() && ll >= reference {
            return Ok(z);
        }
    }
    Err(CatmError::RejectionBudget {
        attempts: LAYOUT_BUDGET,
    })
}

/// Samples `n_docs` documents of `n_clips` clips each. Ground-truth action
/// labels are also stored on the documents.
pub fn generate(
    params: &TrueParams,
    n_docs: usize,
    n_clips: usize,
    seed: u64,
) -> Result<(Corpus, Vec<GroundTruth>)> {
    params.validate()?;
    if n_clips == 0 {
        return Err(CatmError::Config("documents need at least one clip".into()));
    }
    let (k, p) = (params.n_action_topics(), params.n_object_topics());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = params.prior.sampler()?;
    let timestamps: Vec<f64> = (0..n_clips)
        .map(|i| (i as f64 + 0.5) / n_clips as f64)
        .collect();
    let gaps = DocGaps::new(&timestamps);
    let width = n_docs.max(1).to_string().len();

    let mut docs = Vec::with_capacity(n_docs);
    let mut truth = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let v = sampler.sample(&mut rng);
        let pi1 = stick_breaking(&v[..k - 1]);
        let pi2 = stick_breaking(&v[k - 1..]);
        let mut counts = vec![0usize; k];
        for _ in 0..n_clips {
            counts[sample_categorical(&mut rng, &pi1)] += 1;
        }
        let z1 = sample_layout(&counts, &gaps, &params.reltime, &mut rng)?;
        let z2: Vec<usize> = (0..n_clips)
            .map(|_| sample_categorical(&mut rng, &pi2))
            .collect();
        let clips = (0..n_clips)
            .map(|i| Clip {
                human_word: sample_categorical(&mut rng, &params.phi_h[z1[i]]),
                object_word: sample_categorical(&mut rng, &params.phi_o[z1[i]][z2[i]]),
                t: timestamps[i],
            })
            .collect();
        let doc_id = format!("doc-{d:0width$}");
        docs.push(VideoDoc {
            doc_id: doc_id.clone(),
            clips,
            frame_spans: None,
            gt_labels: Some(z1.clone()),
        });
        truth.push(GroundTruth { doc_id, z1, z2 });
        debug_assert!(p >= 1);
    }
    let n_wh = params.phi_h[0].len();
    let n_wo = params.phi_o[0][0].len();
    Ok((Corpus::new(docs, n_wh, n_wo)?, truth))
}

/// Options for [`synth_features`].
#[derive(Debug, Clone)]
pub struct FeatureSynthOptions {
    pub dim: usize,
    /// Standard deviation of per-clip isotropic noise.
    pub noise: f64,
    /// Number of clips over which a segment blends into its neighbors.
    pub ramp: usize,
    /// Scale of the per-topic prototype vectors.
    pub spread: f64,
}

impl Default for FeatureSynthOptions {
    fn default() -> Self {
        FeatureSynthOptions {
            dim: 8,
            noise: 0.3,
            ramp: 3,
            spread: 3.0,
        }
    }
}

/// Raw clip features consistent with the true action labels: each topic has
/// a prototype vector, and clips near a segment boundary are blended toward
/// the neighboring segment's prototype.
pub fn synth_features(
    corpus: &Corpus,
    truth: &[GroundTruth],
    n_action_topics: usize,
    opts: &FeatureSynthOptions,
    seed: u64,
) -> Result<Vec<FeatureClip>> {
    if truth.len() != corpus.len() {
        return Err(CatmError::DimensionMismatch {
            expected: corpus.len(),
            got: truth.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let protos: Vec<Vec<f64>> = (0..n_action_topics)
        .map(|_| {
            (0..opts.dim)
                .map(|_| opts.spread * normal.sample(&mut rng))
                .collect()
        })
        .collect();
    let ramp = opts.ramp.max(1) as f64;
    let mut out = Vec::with_capacity(corpus.n_tokens());
    for (doc, gt) in corpus.docs.iter().zip(truth) {
        let z = &gt.z1;
        if z.len() != doc.len() || z.iter().any(|&k| k >= n_action_topics) {
            return Err(CatmError::doc(
                &doc.doc_id,
                "ground truth does not match document",
            ));
        }
        let seg = segment_ids(z);
        let runs = runs_of(z);
        for (i, clip) in doc.clips.iter().enumerate() {
            let (start, end) = runs[seg[i]];
            let mut mix = vec![(z[i], 1.0)];
            if seg[i] > 0 && ((i - start) as f64) < ramp {
                let w = 0.5 * (1.0 - (i - start) as f64 / ramp);
                mix.push((z[start - 1], w));
                mix[0].1 -= w;
            }
            if end + 1 < z.len() && ((end - i) as f64) < ramp {
                let w = 0.5 * (1.0 - (end - i) as f64 / ramp);
                mix.push((z[end + 1], w));
                mix[0].1 -= w;
            }
            let feat = (0..opts.dim)
                .map(|c| {
                    mix.iter().map(|&(k, w)| w * protos[k][c]).sum::<f64>()
                        + opts.noise * normal.sample(&mut rng)
                })
                .collect();
            out.push(FeatureClip {
                doc_id: doc.doc_id.clone(),
                human_feat: feat,
                object_feat: Vec::new(),
                t: clip.t,
                frame_span: doc.frame_spans.as_ref().map(|s| s[i]),
            });
        }
    }
    Ok(out)
}

/// Inclusive `(start, end)` clip ranges of the runs of equal labels.
pub(crate) fn runs_of(z: &[usize]) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, &k) in z.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if z[r.1] == k => r.1 = i,
            _ => runs.push((i, i)),
        }
    }
    runs
}

/// The action removed from an ablated document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForgottenTruth {
    /// Ground-truth action class of the removed segment.
    pub class: usize,
    /// Timestamp of the last clip kept before the gap.
    pub t_lo: f64,
    /// Timestamp of the first clip kept after the gap.
    pub t_hi: f64,
}

/// Deletes one interior ground-truth segment from `doc` (and its features,
/// if given). Timestamps are kept, leaving a gap. Returns `None` when the
/// document has fewer than three segments.
pub fn ablate_interior_segment<R: Rng + ?Sized>(
    doc: &mut VideoDoc,
    truth: &mut GroundTruth,
    features: Option<&mut Vec<FeatureClip>>,
    rng: &mut R,
) -> Option<ForgottenTruth> {
    let runs = runs_of(&truth.z1);
    if runs.len() < 3 {
        return None;
    }
    let (start, end) = runs[rng.random_range(1..runs.len() - 1)];
    let forgotten = ForgottenTruth {
        class: truth.z1[start],
        t_lo: doc.clips[start - 1].t,
        t_hi: doc.clips[end + 1].t,
    };
    let removed = start..=end;
    doc.clips.drain(removed.clone());
    if let Some(spans) = doc.frame_spans.as_mut() {
        spans.drain(removed.clone());
    }
    if let Some(gt) = doc.gt_labels.as_mut() {
        gt.drain(removed.clone());
    }
    truth.z1.drain(removed.clone());
    truth.z2.drain(removed);
    if let Some(feats) = features {
        let (lo, hi) = (forgotten.t_lo, forgotten.t_hi);
        feats.retain(|f| f.doc_id != doc.doc_id || f.t <= lo || f.t >= hi);
    }
    Some(forgotten)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(k: usize, p: usize) -> TrueParams {
        let mut o = SyntheticOptions::new(k, p);
        o.n_human_words = 20;
        o.n_object_words = 10;
        TrueParams::synthetic(&o, 5).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let params = small(4, 2);
        let a = generate(&params, 5, 30, 7).unwrap();
        let b = generate(&params, 5, 30, 7).unwrap();
        assert_eq!(a, b);
        let c = generate(&params, 5, 30, 8).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn single_topic_corpus() {
        let params = small(1, 1);
        let (corpus, truth) = generate(&params, 3, 10, 1).unwrap();
        assert!(truth.iter().all(|g| g.z1.iter().all(|&z| z == 0)));
        assert_eq!(corpus.n_tokens(), 30);
    }

    #[test]
    fn each_topic_is_one_contiguous_segment() {
        let params = small(5, 3);
        let (_, truth) = generate(&params, 10, 60, 2).unwrap();
        for g in truth {
            let runs = runs_of(&g.z1);
            let mut seen = std::collections::HashSet::new();
            for (s, _) in runs {
                assert!(seen.insert(g.z1[s]), "topic repeated: {:?}", g.z1);
            }
        }
    }

    #[test]
    fn layouts_follow_the_hidden_order() {
        let params = small(4, 1);
        let (_, truth) = generate(&params, 30, 40, 3).unwrap();
        // Most consecutive segment pairs must respect the order encoded in b.
        let (mut agree, mut total) = (0, 0);
        for g in &truth {
            let runs = runs_of(&g.z1);
            for w in runs.windows(2) {
                let (a, b) = (g.z1[w[0].0], g.z1[w[1].0]);
                total += 1;
                if params.reltime.get(b, a).b > 0.5 {
                    agree += 1;
                }
            }
        }
        assert!(agree as f64 >= 0.95 * total as f64, "{agree}/{total}");
    }

    #[test]
    fn ablation_removes_an_interior_segment() {
        let params = small(5, 2);
        let (mut corpus, mut truth) = generate(&params, 4, 60, 4).unwrap();
        let mut feats =
            synth_features(&corpus, &truth, 5, &FeatureSynthOptions::default(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let before = corpus.docs[0].len();
        let f = ablate_interior_segment(
            &mut corpus.docs[0],
            &mut truth[0],
            Some(&mut feats),
            &mut rng,
        )
        .expect("at least three segments");
        let doc = &corpus.docs[0];
        assert!(doc.len() < before);
        assert!(!truth[0].z1.contains(&f.class));
        assert!(doc.clips.iter().all(|c| c.t <= f.t_lo || c.t >= f.t_hi));
        assert_eq!(
            feats.iter().filter(|x| x.doc_id == doc.doc_id).count(),
            doc.len()
        );
        assert_eq!(doc.gt_labels.as_ref().unwrap(), &truth[0].z1);
    }

    #[test]
    fn permutation_count() {
        let p = permutations(&[4, 7, 9]);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![4, 7, 9]);
        assert_eq!(p[5], vec![9, 7, 4]);
    }

    #[test]
    fn runs() {
        assert_eq!(runs_of(&[1, 1, 2, 2, 2, 1]), vec![(0, 1), (2, 4), (5, 5)]);
    }
}

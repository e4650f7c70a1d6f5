//! Training loop and frozen-parameter inference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gibbs::{GibbsModel, TimeParams};
use super::mh::mh_update_priors;
use super::state::{recount, AssignState, DocState};
use crate::corpus::{Corpus, VideoDoc};
use crate::error::{CatmError, Result};
use crate::model::{
    doc_time_log_lik, estimate_abs_time, estimate_prior_moments, log_stick_breaking,
    training_ridge, CatmConfig, Checkpoint, CountTables, DocGaps, GlobalPrior, PairTime, PriorMode,
    PriorSampler, RelTimeAccumulator, RelTimeParams, TimeMode,
};
use crate::util::fnv1a;

const LONG_DOC: usize = 2000;
/// Above this many cached gap entries, gaps are recomputed every sweep.
const GAP_CACHE_LIMIT: usize = 20_000_000;

/// Per-iteration diagnostics of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    /// Joint log-likelihood of words, assignments and timestamps.
    pub loglik: Vec<f64>,
    /// Fraction of documents whose prior vector moved (0 without MH).
    pub mh_accept_rate: Vec<f64>,
    /// Per token, the mean conditional probability of its modal action-topic
    /// over the recorded sweeps.
    pub prob: Vec<Vec<f64>>,
}

/// Result of [`train`]: the checkpoint, the modal assignments (with counts
/// recounted from them) and the trace.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub state: AssignState,
    pub trace: TraceStats,
}

enum Gaps {
    Cached(Vec<DocGaps>),
    OnDemand,
}

impl Gaps {
    fn new(corpus: &Corpus, needed: bool) -> Self {
        let entries: usize = corpus.docs.iter().map(|d| d.len() * d.len()).sum();
        if needed && entries <= GAP_CACHE_LIMIT {
            Gaps::Cached(
                corpus
                    .docs
                    .iter()
                    .map(|d| DocGaps::new(&d.timestamps()))
                    .collect(),
            )
        } else {
            Gaps::OnDemand
        }
    }

    fn get<'a>(
        &'a self,
        d: usize,
        doc: &VideoDoc,
        scratch: &'a mut Option<DocGaps>,
    ) -> &'a DocGaps {
        match self {
            Gaps::Cached(g) => &g[d],
            Gaps::OnDemand => scratch.insert(DocGaps::new(&doc.timestamps())),
        }
    }
}

fn fit_time(config: &CatmConfig, corpus: &Corpus, docs: &[DocState], gaps: &Gaps) -> TimeParams {
    let k = config.n_action_topics;
    match config.time_mode {
        TimeMode::None => TimeParams::None,
        TimeMode::Absolute => {
            let z: Vec<Vec<usize>> = docs.iter().map(|d| d.z1.clone()).collect();
            let ts: Vec<Vec<f64>> = corpus.docs.iter().map(VideoDoc::timestamps).collect();
            TimeParams::Absolute(estimate_abs_time(&z, &ts, k, config.var_floor))
        }
        TimeMode::Relative => {
            let mut acc = RelTimeAccumulator::new(k);
            for (i, (doc, st)) in corpus.docs.iter().zip(docs).enumerate() {
                let mut scratch = None;
                acc.add_doc(&st.z1, gaps.get(i, doc, &mut scratch));
            }
            TimeParams::Relative(acc.finish(config.var_floor, config.min_pair_count))
        }
    }
}

fn fit_prior(config: &CatmConfig, docs: &[DocState], current: &GlobalPrior) -> Result<GlobalPrior> {
    if docs.len() < 2 {
        return Ok(current.clone());
    }
    let vs: Vec<Vec<f64>> = docs.iter().map(|d| d.v.clone()).collect();
    let mut prior = estimate_prior_moments(&vs, 0.0)?;
    let ridge = training_ridge(&prior, config.ridge_scale);
    for i in 0..prior.dim() {
        prior.sigma[i][i] += ridge;
    }
    Ok(prior)
}

/// Joint log-likelihood of all words, assignments and timestamps under the
/// current assignments, with word distributions (and Dirichlet topic
/// proportions) integrated out.
fn joint_log_lik(model: &GibbsModel, corpus: &Corpus, docs: &[DocState], gaps: &Gaps) -> f64 {
    let c = &model.config;
    let (k, p) = (c.n_action_topics, c.effective_object_topics());
    let mut words = CountTables::new(k, p, corpus.n_human_words, corpus.n_object_words);
    let mut total = 0.0;
    for (i, (doc, st)) in corpus.docs.iter().zip(docs).enumerate() {
        match c.prior_mode {
            PriorMode::Correlated => {
                let l1 = log_stick_breaking(&st.v[..k - 1]);
                let l2 = log_stick_breaking(&st.v[k - 1..]);
                total += st.z1.iter().map(|&z| l1[z]).sum::<f64>();
                total += st.z2.iter().map(|&z| l2[z]).sum::<f64>();
            }
            PriorMode::Dirichlet {
                alpha_action,
                alpha_object,
            } => {
                total +=
                    dirichlet_seq(&st.z1, k, alpha_action) + dirichlet_seq(&st.z2, p, alpha_object);
            }
        }
        for (n, clip) in doc.clips.iter().enumerate() {
            let (a, b) = (st.z1[n], st.z2[n]);
            total += words.log_human(a, clip.human_word, c.beta1);
            words.add_human(a, clip.human_word);
            if p > 1 || c.object_mode == crate::model::ObjectMode::On {
                total += words.log_object(a, b, clip.object_word, c.beta12);
            }
            words.add_object(a, b, clip.object_word);
        }
        match model.time() {
            TimeParams::None => {}
            TimeParams::Absolute(abs) => {
                total += doc
                    .clips
                    .iter()
                    .zip(&st.z1)
                    .map(|(cl, &z)| abs.log_pdf(z, cl.t))
                    .sum::<f64>();
            }
            TimeParams::Relative(rel) => {
                let mut scratch = None;
                total += doc_time_log_lik(&st.z1, gaps.get(i, doc, &mut scratch), rel);
            }
        }
    }
    total
}

/// `ln` of the Dirichlet-multinomial probability of a label sequence.
fn dirichlet_seq(z: &[usize], m: usize, alpha: f64) -> f64 {
    let mut counts = vec![0usize; m];
    let mut total = 0.0;
    for (i, &k) in z.iter().enumerate() {
        total += ((counts[k] as f64 + alpha) / (i as f64 + m as f64 * alpha)).ln();
        counts[k] += 1;
    }
    total
}

/// Per-token vote tallies over the recorded sweeps.
struct ModeTally {
    k: usize,
    p: usize,
    votes1: Vec<Vec<u32>>,
    votes2: Vec<Vec<u32>>,
    prob: Vec<Vec<f64>>,
    sweeps: usize,
}

impl ModeTally {
    fn new(lens: impl Iterator<Item = usize>, k: usize, p: usize) -> Self {
        let lens: Vec<usize> = lens.collect();
        ModeTally {
            k,
            p,
            votes1: lens.iter().map(|&n| vec![0; n * k]).collect(),
            votes2: lens.iter().map(|&n| vec![0; n * p]).collect(),
            prob: lens.iter().map(|&n| vec![0.0; n * k]).collect(),
            sweeps: 0,
        }
    }

    fn record_probs(&mut self, d: usize, n: usize, probs: &[f64]) {
        for (acc, x) in self.prob[d][n * self.k..(n + 1) * self.k]
            .iter_mut()
            .zip(probs)
        {
            *acc += x;
        }
    }

    fn record_state(&mut self, d: usize, st: &DocState) {
        for n in 0..st.len() {
            self.votes1[d][n * self.k + st.z1[n]] += 1;
            self.votes2[d][n * self.p + st.z2[n]] += 1;
        }
    }

    fn argmax(votes: &[u32]) -> usize {
        // first maximum wins
        let mut best = 0;
        for (i, &c) in votes.iter().enumerate() {
            if c > votes[best] {
                best = i;
            }
        }
        best
    }

    /// Modal `(z1, z2, prob)` of document `d`.
    fn modal(&self, d: usize) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n_tok = self.votes1[d].len() / self.k;
        let mut z1 = Vec::with_capacity(n_tok);
        let mut z2 = Vec::with_capacity(n_tok);
        let mut prob = Vec::with_capacity(n_tok);
        for n in 0..n_tok {
            let a = Self::argmax(&self.votes1[d][n * self.k..(n + 1) * self.k]);
            z1.push(a);
            z2.push(Self::argmax(&self.votes2[d][n * self.p..(n + 1) * self.p]));
            prob.push(self.prob[d][n * self.k + a] / self.sweeps.max(1) as f64);
        }
        (z1, z2, prob)
    }
}

/// Fits the model to `corpus` by collapsed Gibbs sampling with
/// Metropolis-Hastings updates of the document priors and moment
/// re-estimation of the global parameters after every sweep.
pub fn train(corpus: &Corpus, config: &CatmConfig) -> Result<TrainOutput> {
    config.validate()?;
    corpus.validate()?;
    if corpus.is_empty() {
        return Err(CatmError::InvalidInput(
            "cannot train on an empty corpus".into(),
        ));
    }
    if let Some(d) = corpus.docs.iter().find(|d| d.len() > LONG_DOC) {
        log::warn!(
            "{} has {} clips; the relative-time term is quadratic in document length",
            d.doc_id,
            d.len()
        );
    }
    let (k, p) = (config.n_action_topics, config.effective_object_topics());
    let correlated = config.prior_mode == PriorMode::Correlated;
    let dim = config.prior_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let standard = GlobalPrior::standard(dim).sampler()?;
    let mut docs = Vec::with_capacity(corpus.len());
    for doc in &corpus.docs {
        let z1 = (0..doc.len()).map(|_| rng.random_range(0..k)).collect();
        let z2 = (0..doc.len()).map(|_| rng.random_range(0..p)).collect();
        let v = if correlated {
            standard.sample(&mut rng)
        } else {
            Vec::new()
        };
        docs.push(DocState::new(z1, z2, v, k, p)?);
    }
    let gaps = Gaps::new(corpus, config.time_mode == TimeMode::Relative);
    let counts = recount(corpus, &docs, k, p)?;
    let time = fit_time(config, corpus, &docs, &gaps);
    let mut model = GibbsModel::new(config.clone(), counts, time)?;
    let mut prior = GlobalPrior::standard(dim);
    let mut prior_sampler = prior.sampler()?;

    let record_from = config
        .burnin
        .max(config.iters.saturating_sub(config.modal_window));
    let mut tally = ModeTally::new(corpus.docs.iter().map(VideoDoc::len), k, p);
    let mut trace = TraceStats {
        loglik: Vec::with_capacity(config.iters),
        mh_accept_rate: Vec::with_capacity(config.iters),
        prob: Vec::new(),
    };
    for it in 0..config.iters {
        let recording = it >= record_from;
        let mut accepted = 0usize;
        for (d, doc) in corpus.docs.iter().enumerate() {
            let mut scratch = None;
            let g = gaps.get(d, doc, &mut scratch);
            let st = &mut docs[d];
            for n in 0..doc.len() {
                let probs = model.gibbs_step_action(doc, g, st, n, &mut rng)?;
                if recording {
                    tally.record_probs(d, n, &probs);
                }
                model.gibbs_step_object(doc, st, n, &mut rng)?;
            }
            if correlated && mh_update_priors(st, &prior_sampler, k, &mut rng) {
                accepted += 1;
            }
            if recording {
                tally.record_state(d, st);
            }
        }
        if recording {
            tally.sweeps += 1;
        }
        if correlated {
            prior = fit_prior(config, &docs, &prior)?;
            prior_sampler = prior.sampler()?;
        }
        model.set_time(fit_time(config, corpus, &docs, &gaps))?;
        let ll = joint_log_lik(&model, corpus, &docs, &gaps);
        trace.loglik.push(ll);
        trace.mh_accept_rate.push(if correlated {
            accepted as f64 / corpus.len() as f64
        } else {
            0.0
        });
        log::debug!("iteration {it}: loglik {ll:.3}, accepted {accepted}");
    }

    let mut modal_docs = Vec::with_capacity(docs.len());
    for (d, st) in docs.into_iter().enumerate() {
        let (z1, z2, prob) = tally.modal(d);
        trace.prob.push(prob);
        modal_docs.push(DocState::new(z1, z2, st.v, k, p)?);
    }
    let state = AssignState::from_docs(corpus, modal_docs, k, p, config.seed)?;
    let time = fit_time(config, corpus, &state.docs, &gaps);
    let (reltime, abs_time) = match time {
        TimeParams::Relative(r) => (r, None),
        TimeParams::Absolute(a) => (RelTimeParams::uniform(k, PairTime::FALLBACK), Some(a)),
        TimeParams::None => (RelTimeParams::uniform(k, PairTime::FALLBACK), None),
    };
    let checkpoint = Checkpoint::new(config.clone(), &prior, &reltime, abs_time, &state.counts);
    Ok(TrainOutput {
        checkpoint,
        state,
        trace,
    })
}

/// Sweep counts for test-time inference.
#[derive(Debug, Clone, PartialEq)]
pub struct InferOptions {
    pub iters: usize,
    pub burnin: usize,
    pub modal_window: usize,
    /// Combined with each document id to seed that document's chain.
    pub seed: u64,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            iters: 50,
            burnin: 25,
            modal_window: 20,
            seed: 0,
        }
    }
}

/// Assignments inferred for one test document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocInference {
    pub doc_id: String,
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    pub v: Vec<f64>,
    /// Mean conditional probability of each token's modal action-topic.
    pub prob: Vec<f64>,
}

/// Frozen global parameters for test-time sampling. Shareable across
/// threads: inference never mutates it.
#[derive(Debug, Clone)]
pub struct InferenceModel {
    model: GibbsModel,
    prior: Option<PriorSampler>,
    n_human_words: usize,
    n_object_words: usize,
}

impl InferenceModel {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.validate()?;
        let config = ckpt.config.clone();
        let time = match config.time_mode {
            TimeMode::None => TimeParams::None,
            TimeMode::Relative => TimeParams::Relative(ckpt.reltime()?),
            TimeMode::Absolute => TimeParams::Absolute(ckpt.abs_time.clone().ok_or_else(|| {
                CatmError::InvalidInput("checkpoint lacks absolute-time parameters".into())
            })?),
        };
        let prior = match config.prior_mode {
            PriorMode::Correlated => Some(ckpt.prior().sampler()?),
            PriorMode::Dirichlet { .. } => None,
        };
        Ok(InferenceModel {
            model: GibbsModel::new(config, ckpt.counts()?, time)?,
            prior,
            n_human_words: ckpt.n_human_words,
            n_object_words: ckpt.n_object_words,
        })
    }

    pub fn config(&self) -> &CatmConfig {
        &self.model.config
    }

    pub(crate) fn gibbs(&self) -> &GibbsModel {
        &self.model
    }

    /// Samples the document's assignments and prior vector with every global
    /// parameter held fixed.
    pub fn infer_doc(&self, doc: &VideoDoc, opts: &InferOptions) -> Result<DocInference> {
        doc.validate(self.n_human_words, self.n_object_words)?;
        if opts.iters == 0 || opts.burnin >= opts.iters || opts.modal_window == 0 {
            return Err(CatmError::Config(
                "inference needs 0 <= burnin < iters and a positive modal window".into(),
            ));
        }
        let c = &self.model.config;
        let (k, p) = (c.n_action_topics, c.effective_object_topics());
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ fnv1a(doc.doc_id.as_bytes()));
        let z1 = (0..doc.len()).map(|_| rng.random_range(0..k)).collect();
        let z2 = (0..doc.len()).map(|_| rng.random_range(0..p)).collect();
        let v = match &self.prior {
            Some(s) => s.sample(&mut rng),
            None => Vec::new(),
        };
        let mut st = DocState::new(z1, z2, v, k, p)?;
        let gaps = DocGaps::new(&doc.timestamps());
        let record_from = opts
            .burnin
            .max(opts.iters.saturating_sub(opts.modal_window));
        let mut tally = ModeTally::new(std::iter::once(doc.len()), k, p);
        // The learned time densities are sharp enough to trap a chain started
        // from noise, so the first sweep uses words and prior only.
        for n in 0..doc.len() {
            self.model
                .resample_action(doc, None, &mut st, n, &mut rng)?;
            self.model.resample_object(doc, &mut st, n, &mut rng)?;
        }
        for it in 0..opts.iters {
            let recording = it >= record_from;
            for n in 0..doc.len() {
                let probs = self
                    .model
                    .resample_action(doc, Some(&gaps), &mut st, n, &mut rng)?;
                if recording {
                    tally.record_probs(0, n, &probs);
                }
                self.model.resample_object(doc, &mut st, n, &mut rng)?;
            }
            if let Some(s) = &self.prior {
                mh_update_priors(&mut st, s, k, &mut rng);
            }
            if recording {
                tally.record_state(0, &st);
                tally.sweeps += 1;
            }
        }
        let (z1, z2, prob) = tally.modal(0);
        Ok(DocInference {
            doc_id: doc.doc_id.clone(),
            z1,
            z2,
            v: st.v,
            prob,
        })
    }
}

/// Convenience wrapper around [`InferenceModel::infer_doc`].
pub fn infer_doc(doc: &VideoDoc, ckpt: &Checkpoint, opts: &InferOptions) -> Result<DocInference> {
    InferenceModel::from_checkpoint(ckpt)?.infer_doc(doc, opts)
}

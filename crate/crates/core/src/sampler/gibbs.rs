//! Collapsed Gibbs conditionals for the two assignment families.

use rand::Rng;

use super::state::DocState;
use crate::corpus::VideoDoc;
use crate::error::{CatmError, Result};
use crate::model::{
    log_stick_breaking, AbsTimeParams, CatmConfig, CountTables, DocGaps, ObjectMode, PairTime,
    PriorMode, RelTimeParams,
};
use crate::util::{normalize_log, sample_categorical};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Time parameters matching a [`TimeMode`](crate::model::TimeMode).
#[derive(Debug, Clone, PartialEq)]
pub enum TimeParams {
    None,
    Relative(RelTimeParams),
    Absolute(AbsTimeParams),
}

/// Normal log density split into `c - (x - mean)^2 * inv`.
#[derive(Debug, Clone, Copy)]
struct Gauss {
    mean: f64,
    c: f64,
    inv: f64,
}

impl Gauss {
    fn new(mean: f64, var: f64) -> Self {
        Gauss {
            mean,
            c: -0.5 * (LN_2PI + var.ln()),
            inv: 1.0 / (2.0 * var),
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let d = x - self.mean;
        self.c - d * d * self.inv
    }
}

#[derive(Debug, Clone, Copy)]
struct PairConst {
    lw_pos: f64,
    lw_neg: f64,
    pos: Gauss,
    neg: Gauss,
    same: Gauss,
}

impl PairConst {
    fn new(p: &PairTime) -> Self {
        let lw = |w: f64| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
        PairConst {
            lw_pos: lw(p.b),
            lw_neg: lw(1.0 - p.b),
            pos: Gauss::new(p.mean_pos, p.var_pos),
            neg: Gauss::new(p.mean_neg, p.var_neg),
            same: Gauss::new(0.0, p.same_var),
        }
    }

    #[inline]
    fn cross(&self, (u, lj): (f64, f64), positive: bool) -> f64 {
        if positive {
            self.lw_pos + self.pos.eval(u) + lj
        } else {
            self.lw_neg + self.neg.eval(u) + lj
        }
    }

    #[inline]
    fn same(&self, (u, lj): (f64, f64)) -> f64 {
        self.same.eval(u) + lj
    }
}

#[derive(Debug, Clone)]
enum TimeKernel {
    None,
    Relative { k: usize, pairs: Vec<PairConst> },
    Absolute(Vec<Gauss>),
}

impl TimeKernel {
    fn new(time: &TimeParams) -> Self {
        match time {
            TimeParams::None => TimeKernel::None,
            TimeParams::Relative(r) => {
                let k = r.n_topics();
                let pairs = (0..k * k)
                    .map(|i| PairConst::new(r.get(i / k, i % k)))
                    .collect();
                TimeKernel::Relative { k, pairs }
            }
            TimeParams::Absolute(a) => TimeKernel::Absolute(
                a.mean
                    .iter()
                    .zip(&a.var)
                    .map(|(&m, &v)| Gauss::new(m, v))
                    .collect(),
            ),
        }
    }
}

/// Global quantities the per-token conditionals read: configuration,
/// collapsed word counts and time parameters.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    pub config: CatmConfig,
    pub counts: CountTables,
    time: TimeParams,
    kernel: TimeKernel,
}

impl GibbsModel {
    pub fn new(config: CatmConfig, counts: CountTables, time: TimeParams) -> Result<Self> {
        config.validate()?;
        let k = config.n_action_topics;
        if counts.n_action_topics() != k
            || counts.n_object_topics() != config.effective_object_topics()
        {
            return Err(CatmError::Config(
                "count tables do not match the configured topic counts".into(),
            ));
        }
        let mut m = GibbsModel {
            config,
            counts,
            time: TimeParams::None,
            kernel: TimeKernel::None,
        };
        m.set_time(time)?;
        Ok(m)
    }

    pub fn time(&self) -> &TimeParams {
        &self.time
    }

    pub fn set_time(&mut self, time: TimeParams) -> Result<()> {
        let k = self.config.n_action_topics;
        let ok = match &time {
            TimeParams::None => true,
            TimeParams::Relative(r) => r.n_topics() == k,
            TimeParams::Absolute(a) => a.mean.len() == k && a.var.len() == k,
        };
        if !ok {
            return Err(CatmError::Config("time parameters do not match K".into()));
        }
        self.kernel = TimeKernel::new(&time);
        self.time = time;
        Ok(())
    }

    fn n_action(&self) -> usize {
        self.config.n_action_topics
    }

    fn n_object(&self) -> usize {
        self.config.effective_object_topics()
    }

    /// Log prior weights of the action-topics for a document whose own
    /// counts already exclude the token being resampled.
    fn action_prior(&self, st: &DocState, out: &mut [f64]) {
        match self.config.prior_mode {
            PriorMode::Correlated => {
                out.copy_from_slice(&log_stick_breaking(&st.v[..self.n_action() - 1]))
            }
            PriorMode::Dirichlet { alpha_action, .. } => {
                for (o, &c) in out.iter_mut().zip(st.action_counts()) {
                    *o = (c as f64 + alpha_action).ln();
                }
            }
        }
    }

    fn object_prior(&self, st: &DocState, out: &mut [f64]) {
        match self.config.prior_mode {
            PriorMode::Correlated => {
                out.copy_from_slice(&log_stick_breaking(&st.v[self.n_action() - 1..]))
            }
            PriorMode::Dirichlet { alpha_object, .. } => {
                for (o, &c) in out.iter_mut().zip(st.object_counts()) {
                    *o = (c as f64 + alpha_object).ln();
                }
            }
        }
    }

    /// Unnormalized log conditional of every action-topic for token `n`,
    /// with the token already removed from every count.
    fn action_scores(
        &self,
        doc: &VideoDoc,
        gaps: Option<&DocGaps>,
        st: &DocState,
        n: usize,
        out: &mut [f64],
    ) {
        let c = &self.config;
        let clip = &doc.clips[n];
        self.action_prior(st, out);
        for (k, o) in out.iter_mut().enumerate() {
            *o += self.counts.log_human(k, clip.human_word, c.beta1);
            if c.object_mode == ObjectMode::On {
                *o += self
                    .counts
                    .log_object(k, st.z2[n], clip.object_word, c.beta12);
            }
        }
        let Some(gaps) = gaps else { return };
        let mut time = vec![0.0; out.len()];
        match &self.kernel {
            TimeKernel::None => return,
            TimeKernel::Absolute(g) => {
                for (t, g) in time.iter_mut().zip(g) {
                    *t = g.eval(clip.t);
                }
            }
            TimeKernel::Relative { k, pairs } => {
                relative_time_scores(&st.z1, gaps, n, *k, pairs, &mut time)
            }
        }
        let with_time: Vec<f64> = out.iter().zip(&time).map(|(a, b)| a + b).collect();
        if with_time.iter().any(|x| x.is_finite()) {
            out.copy_from_slice(&with_time);
        } else {
            log::warn!(
                "{}: clip {n} has zero time density under every action-topic; dropping the time term",
                doc.doc_id
            );
        }
    }

    fn object_scores(&self, doc: &VideoDoc, st: &DocState, n: usize, out: &mut [f64]) {
        let c = &self.config;
        self.object_prior(st, out);
        let w = doc.clips[n].object_word;
        for (p, o) in out.iter_mut().enumerate() {
            *o += self.counts.log_object(st.z1[n], p, w, c.beta12);
        }
    }

    fn check_doc(&self, doc: &VideoDoc, gaps: &DocGaps, st: &DocState, n: usize) -> Result<()> {
        if st.len() != doc.len() || gaps.len() != doc.len() {
            return Err(CatmError::doc(
                &doc.doc_id,
                "state, gaps and clips differ in length",
            ));
        }
        if n >= doc.len() {
            return Err(CatmError::doc(
                &doc.doc_id,
                format!("token {n} out of range"),
            ));
        }
        if self.config.prior_mode == PriorMode::Correlated && st.v.len() != self.config.prior_dim()
        {
            return Err(CatmError::DimensionMismatch {
                expected: self.config.prior_dim(),
                got: st.v.len(),
            });
        }
        Ok(())
    }

    fn remove_token(
        &mut self,
        doc: &VideoDoc,
        st: &mut DocState,
        n: usize,
        human: bool,
    ) -> Result<()> {
        let clip = &doc.clips[n];
        if human {
            self.counts.remove_human(st.z1[n], clip.human_word)?;
        }
        self.counts
            .remove_object(st.z1[n], st.z2[n], clip.object_word)
    }

    fn add_token(&mut self, doc: &VideoDoc, st: &DocState, n: usize, human: bool) {
        let clip = &doc.clips[n];
        if human {
            self.counts.add_human(st.z1[n], clip.human_word);
        }
        self.counts.add_object(st.z1[n], st.z2[n], clip.object_word);
    }

    /// Conditional distribution of `z1[n]` given everything else. Token `n`
    /// must currently be counted; the state is left unchanged.
    pub fn action_conditional(
        &mut self,
        doc: &VideoDoc,
        gaps: &DocGaps,
        st: &mut DocState,
        n: usize,
    ) -> Result<Vec<f64>> {
        self.check_doc(doc, gaps, st, n)?;
        self.remove_token(doc, st, n, true)?;
        {
            let z = st.z1[n];
            st.c1_mut()[z] -= 1;
        }
        let mut probs = vec![0.0; self.n_action()];
        self.action_scores(doc, Some(gaps), st, n, &mut probs);
        {
            let z = st.z1[n];
            st.c1_mut()[z] += 1;
        }
        self.add_token(doc, st, n, true);
        normalized(doc, probs)
    }

    /// Conditional distribution of `z2[n]` given everything else.
    pub fn object_conditional(
        &mut self,
        doc: &VideoDoc,
        st: &mut DocState,
        n: usize,
    ) -> Result<Vec<f64>> {
        if n >= doc.len() || st.len() != doc.len() {
            return Err(CatmError::doc(
                &doc.doc_id,
                format!("token {n} out of range"),
            ));
        }
        self.remove_token(doc, st, n, false)?;
        {
            let z = st.z2[n];
            st.c2_mut()[z] -= 1;
        }
        let mut probs = vec![0.0; self.n_object()];
        self.object_scores(doc, st, n, &mut probs);
        {
            let z = st.z2[n];
            st.c2_mut()[z] += 1;
        }
        self.add_token(doc, st, n, false);
        normalized(doc, probs)
    }

    /// Draws `z1[n]` with the token already removed from the word counts.
    /// Returns the conditional distribution it was drawn from.
    /// Resamples token `n`'s action-topic; `gaps: None` leaves out the time
    /// term.
    pub(crate) fn resample_action<R: Rng + ?Sized>(
        &self,
        doc: &VideoDoc,
        gaps: Option<&DocGaps>,
        st: &mut DocState,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        {
            let z = st.z1[n];
            st.c1_mut()[z] -= 1;
        }
        let mut probs = vec![0.0; self.n_action()];
        self.action_scores(doc, gaps, st, n, &mut probs);
        {
            let z = st.z1[n];
            st.c1_mut()[z] += 1;
        }
        let probs = normalized(doc, probs)?;
        st.set_action(n, sample_categorical(rng, &probs));
        Ok(probs)
    }

    pub(crate) fn resample_object<R: Rng + ?Sized>(
        &self,
        doc: &VideoDoc,
        st: &mut DocState,
        n: usize,
        rng: &mut R,
    ) -> Result<()> {
        if self.n_object() == 1 {
            return Ok(());
        }
        {
            let z = st.z2[n];
            st.c2_mut()[z] -= 1;
        }
        let mut probs = vec![0.0; self.n_object()];
        self.object_scores(doc, st, n, &mut probs);
        {
            let z = st.z2[n];
            st.c2_mut()[z] += 1;
        }
        let probs = normalized(doc, probs)?;
        st.set_object(n, sample_categorical(rng, &probs));
        Ok(())
    }

    /// One collapsed Gibbs update of `z1[n]`, keeping the counts in sync.
    /// Returns the conditional distribution the new topic was drawn from.
    pub fn gibbs_step_action<R: Rng + ?Sized>(
        &mut self,
        doc: &VideoDoc,
        gaps: &DocGaps,
        st: &mut DocState,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_doc(doc, gaps, st, n)?;
        self.remove_token(doc, st, n, true)?;
        let probs = self.resample_action(doc, Some(gaps), st, n, rng);
        self.add_token(doc, st, n, true);
        probs
    }

    /// One collapsed Gibbs update of `z2[n]`; returns the new object-topic.
    pub fn gibbs_step_object<R: Rng + ?Sized>(
        &mut self,
        doc: &VideoDoc,
        st: &mut DocState,
        n: usize,
        rng: &mut R,
    ) -> Result<usize> {
        if n >= doc.len() || st.len() != doc.len() {
            return Err(CatmError::doc(
                &doc.doc_id,
                format!("token {n} out of range"),
            ));
        }
        self.remove_token(doc, st, n, false)?;
        let r = self.resample_object(doc, st, n, rng);
        self.add_token(doc, st, n, false);
        r.map(|_| st.z2[n])
    }
}

fn normalized(doc: &VideoDoc, mut scores: Vec<f64>) -> Result<Vec<f64>> {
    normalize_log(&mut scores).ok_or_else(|| {
        CatmError::Internal(format!(
            "{}: every topic has zero conditional probability",
            doc.doc_id
        ))
    })?;
    Ok(scores)
}

/// Relative-time part of the action conditional.
///
/// For candidate `k`, every other clip `m` contributes the densities of
/// `t_m - t_n` and `t_n - t_m`; the within-segment branch applies when `m`
/// lies in the run of `k` that `n` would join. When the clips on both sides
/// of `n` share a topic `a`, choosing `a` also merges those two runs, which
/// turns every gap between them into a within-segment gap.
fn relative_time_scores(
    z: &[usize],
    gaps: &DocGaps,
    n: usize,
    k_topics: usize,
    pairs: &[PairConst],
    out: &mut [f64],
) {
    let len = z.len();
    let pair = |a: usize, b: usize| &pairs[a * k_topics + b];
    // run of equal topics ending at n - 1 and starting at n + 1
    let left = (n > 0).then(|| {
        let a = z[n - 1];
        let mut s = n - 1;
        while s > 0 && z[s - 1] == a {
            s -= 1;
        }
        (a, s)
    });
    let right = (n + 1 < len).then(|| {
        let b = z[n + 1];
        let mut e = n + 1;
        while e + 1 < len && z[e + 1] == b {
            e += 1;
        }
        (b, e)
    });
    for (k, o) in out.iter_mut().enumerate() {
        let lo = match left {
            Some((a, s)) if a == k => s,
            _ => n,
        };
        let hi = match right {
            Some((b, e)) if b == k => e,
            _ => n,
        };
        let mut total = 0.0;
        for m in 0..len {
            if m == n {
                continue;
            }
            if m >= lo && m <= hi {
                let p = pair(k, k);
                total += p.same(gaps.same(m, n)) + p.same(gaps.same(n, m));
            } else {
                total += pair(z[m], k).cross(gaps.cross(m, n), m > n)
                    + pair(k, z[m]).cross(gaps.cross(n, m), n > m);
            }
        }
        *o = total;
    }
    if let (Some((a, s)), Some((b, e))) = (left, right) {
        if a == b {
            let p = pair(a, a);
            let (mut same, mut cross) = (0.0, 0.0);
            for l in s..n {
                for r in n + 1..=e {
                    same += p.same(gaps.same(l, r)) + p.same(gaps.same(r, l));
                    cross += p.cross(gaps.cross(l, r), false) + p.cross(gaps.cross(r, l), true);
                }
            }
            if cross == f64::NEG_INFINITY {
                // the runs cannot stay apart: only `a` is possible
                for (k, o) in out.iter_mut().enumerate() {
                    if k != a {
                        *o = f64::NEG_INFINITY;
                    }
                }
                out[a] += same;
            } else {
                out[a] += same - cross;
            }
        }
    }
}

//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use catm::corpus::{Clip, Corpus, VideoDoc};
use catm::model::{
    AbsTimeParams, CatmConfig, ObjectMode, PairTime, Preset, PriorMode, RelTimeParams, TimeMode,
};
use catm::sampler::{AssignState, DocState, GibbsModel, TimeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// Stick-breaking proportions written out as products.
pub fn proportions(v: &[f64]) -> Vec<f64> {
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    (0..=v.len())
        .map(|m| {
            let head = if m < v.len() { sig(v[m]) } else { 1.0 };
            v[..m].iter().fold(head, |acc, &x| acc * (1.0 - sig(x)))
        })
        .collect()
}

/// Log density of a signed gap between clips of different segments.
pub fn ln_cross_density(p: &PairTime, t: f64) -> f64 {
    let u = (-PI / 2.0 + PI * t.rem_euclid(1.0)).tan();
    let jac = PI / (PI * t).sin().powi(2);
    let (w, mean, var) = if t > 0.0 {
        (p.b, p.mean_pos, p.var_pos)
    } else {
        (1.0 - p.b, p.mean_neg, p.var_neg)
    };
    w.ln() + ln_normal(u, mean, var) + jac.ln()
}

/// Density of a signed gap between clips of different segments.
pub fn cross_density(p: &PairTime, t: f64) -> f64 {
    ln_cross_density(p, t).exp()
}

/// Log density of a gap inside one segment.
pub fn ln_same_density(p: &PairTime, t: f64) -> f64 {
    let u = (PI * t / 2.0).tan();
    let jac = (PI / 2.0) / (PI * t / 2.0).cos().powi(2);
    ln_normal(u, 0.0, p.same_var) + jac.ln()
}

/// Density of a gap inside one segment.
pub fn same_density(p: &PairTime, t: f64) -> f64 {
    ln_same_density(p, t).exp()
}

/// Log relative-time likelihood of one document over all ordered pairs.
pub fn time_log_lik(z: &[usize], ts: &[f64], params: &RelTimeParams) -> f64 {
    let mut total = 0.0;
    for m in 0..z.len() {
        for j in 0..z.len() {
            if m == j {
                continue;
            }
            let (lo, hi) = (m.min(j), m.max(j));
            let same = z[lo..=hi].iter().all(|&x| x == z[m]);
            let p = params.get(z[m], z[j]);
            let t = ts[m] - ts[j];
            total += if same {
                ln_same_density(p, t)
            } else {
                ln_cross_density(p, t)
            };
        }
    }
    total
}

/// Time model used by a tiny instance.
#[derive(Debug, Clone)]
pub enum TimeSpec {
    None,
    Relative(RelTimeParams),
    Absolute(AbsTimeParams),
}

impl TimeSpec {
    pub fn params(&self) -> TimeParams {
        match self {
            TimeSpec::None => TimeParams::None,
            TimeSpec::Relative(r) => TimeParams::Relative(r.clone()),
            TimeSpec::Absolute(a) => TimeParams::Absolute(a.clone()),
        }
    }
}

/// A small corpus with a complete assignment state.
#[derive(Debug, Clone)]
pub struct Tiny {
    pub corpus: Corpus,
    pub config: CatmConfig,
    pub docs: Vec<DocState>,
    pub time: TimeSpec,
}

fn random_pair<R: Rng>(rng: &mut R) -> PairTime {
    PairTime {
        b: rng.random_range(0.05..0.95),
        mean_pos: rng.random_range(-2.0..2.0),
        var_pos: rng.random_range(0.2..3.0),
        mean_neg: rng.random_range(-2.0..2.0),
        var_neg: rng.random_range(0.2..3.0),
        same_var: rng.random_range(0.05..2.0),
    }
}

pub fn random_reltime<R: Rng>(rng: &mut R, k: usize) -> RelTimeParams {
    RelTimeParams::from_rows(
        (0..k)
            .map(|_| (0..k).map(|_| random_pair(rng)).collect())
            .collect(),
    )
    .unwrap()
}

/// Random instance with at most two documents of at most four clips, two
/// action- and two object-topics and three words per vocabulary.
pub fn tiny_instance(seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, p, v) = (2, 2, 3);
    let mut config = CatmConfig::new(k, p).with_preset(Preset::CatmAo);
    config.beta1 = rng.random_range(0.01..1.0);
    config.beta12 = rng.random_range(0.01..1.0);
    if rng.random_bool(0.25) {
        config.prior_mode = PriorMode::Dirichlet {
            alpha_action: rng.random_range(0.1..3.0),
            alpha_object: rng.random_range(0.1..3.0),
        };
    }
    let time = match rng.random_range(0..6) {
        0 => TimeSpec::None,
        1 => TimeSpec::Absolute(AbsTimeParams {
            mean: (0..k).map(|_| rng.random_range(0.0..1.0)).collect(),
            var: (0..k).map(|_| rng.random_range(0.01..0.5)).collect(),
        }),
        _ => TimeSpec::Relative(random_reltime(&mut rng, k)),
    };
    config.time_mode = match time {
        TimeSpec::None => TimeMode::None,
        TimeSpec::Absolute(_) => TimeMode::Absolute,
        TimeSpec::Relative(_) => TimeMode::Relative,
    };
    let n_docs = rng.random_range(1..=2);
    let mut docs = Vec::new();
    let mut states = Vec::new();
    for d in 0..n_docs {
        let n = rng.random_range(1..=4);
        let mut ts: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
        ts.sort_by(f64::total_cmp);
        // Nearly coincident clips push the tan-transformed gaps to ~1e7 in
        // the log joint, beyond what differencing two joints can resolve.
        ts.dedup_by(|t, kept| *t - *kept < 0.02);
        let clips: Vec<Clip> = ts
            .iter()
            .map(|&t| Clip {
                human_word: rng.random_range(0..v),
                object_word: rng.random_range(0..v),
                t,
            })
            .collect();
        let n = clips.len();
        let z1 = (0..n).map(|_| rng.random_range(0..k)).collect();
        let z2 = (0..n).map(|_| rng.random_range(0..p)).collect();
        let vv = match config.prior_mode {
            PriorMode::Correlated => (0..k + p - 2)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
            PriorMode::Dirichlet { .. } => Vec::new(),
        };
        states.push(DocState::new(z1, z2, vv, k, p).unwrap());
        docs.push(VideoDoc::new(format!("d{d}"), clips));
    }
    Tiny {
        corpus: Corpus::new(docs, v, v).unwrap(),
        config,
        docs: states,
        time,
    }
}

impl Tiny {
    pub fn model(&self) -> GibbsModel {
        let (k, p) = (
            self.config.n_action_topics,
            self.config.effective_object_topics(),
        );
        let state = AssignState::from_docs(&self.corpus, self.docs.clone(), k, p, 0).unwrap();
        GibbsModel::new(self.config.clone(), state.counts, self.time.params()).unwrap()
    }

    /// Collapsed joint log probability of words, assignments and times.
    pub fn log_joint(&self, docs: &[DocState]) -> f64 {
        let c = &self.config;
        let (k, p) = (c.n_action_topics, c.effective_object_topics());
        let (vh, vo) = (self.corpus.n_human_words, self.corpus.n_object_words);
        let mut nh = vec![vec![0.0; vh]; k];
        let mut no = vec![vec![vec![0.0; vo]; p]; k];
        let mut total = 0.0;
        for (doc, st) in self.corpus.docs.iter().zip(docs) {
            for (n, clip) in doc.clips.iter().enumerate() {
                nh[st.z1[n]][clip.human_word] += 1.0;
                no[st.z1[n]][st.z2[n]][clip.object_word] += 1.0;
            }
            match c.prior_mode {
                PriorMode::Correlated => {
                    let (pi1, pi2) = (proportions(&st.v[..k - 1]), proportions(&st.v[k - 1..]));
                    total += st.z1.iter().map(|&z| pi1[z].ln()).sum::<f64>();
                    total += st.z2.iter().map(|&z| pi2[z].ln()).sum::<f64>();
                }
                PriorMode::Dirichlet {
                    alpha_action,
                    alpha_object,
                } => {
                    total += dirichlet_multinomial(&st.z1, k, alpha_action);
                    total += dirichlet_multinomial(&st.z2, p, alpha_object);
                }
            }
            let ts = doc.timestamps();
            total += match &self.time {
                TimeSpec::None => 0.0,
                TimeSpec::Absolute(a) => st
                    .z1
                    .iter()
                    .zip(&ts)
                    .map(|(&z, &t)| ln_normal(t, a.mean[z], a.var[z]))
                    .sum(),
                TimeSpec::Relative(r) => time_log_lik(&st.z1, &ts, r),
            };
        }
        for row in &nh {
            total += polya(row, c.beta1);
        }
        if c.object_mode == ObjectMode::On {
            for rows in &no {
                for row in rows {
                    total += polya(row, c.beta12);
                }
            }
        }
        total
    }

    /// Conditional of one assignment by enumerating its values in the joint.
    pub fn brute_conditional(&self, d: usize, n: usize, action: bool) -> Vec<f64> {
        let m = if action {
            self.config.n_action_topics
        } else {
            self.config.effective_object_topics()
        };
        let logs: Vec<f64> = (0..m)
            .map(|x| {
                let mut docs = self.docs.clone();
                let st = &docs[d];
                let (mut z1, mut z2) = (st.z1.clone(), st.z2.clone());
                if action {
                    z1[n] = x;
                } else {
                    z2[n] = x;
                }
                let (k, p) = (
                    self.config.n_action_topics,
                    self.config.effective_object_topics(),
                );
                docs[d] = DocState::new(z1, z2, st.v.clone(), k, p).unwrap();
                self.log_joint(&docs)
            })
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }
}

/// `ln` of the Polya (Dirichlet-multinomial) probability of a count row.
pub fn polya(counts: &[f64], beta: f64) -> f64 {
    let n: f64 = counts.iter().sum();
    let v = counts.len() as f64;
    ln_gamma(v * beta) - ln_gamma(n + v * beta)
        + counts
            .iter()
            .map(|&c| ln_gamma(c + beta) - ln_gamma(beta))
            .sum::<f64>()
}

/// `ln` probability of a label sequence with its proportions integrated
/// against a symmetric Dirichlet.
pub fn dirichlet_multinomial(z: &[usize], m: usize, alpha: f64) -> f64 {
    let mut counts = vec![0.0; m];
    for &x in z {
        counts[x] += 1.0;
    }
    polya(&counts, alpha)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // Start from many panels so narrow peaks are not stepped over.
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            rec(
                f,
                lo,
                hi,
                fa,
                fm,
                fb,
                simpson(fa, fm, fb, lo, hi),
                tol / panels as f64,
                40,
            )
        })
        .sum()
}

/// Best mapping by enumerating every class vector; ties keep the first
/// (lexicographically smallest) vector.
pub fn best_mapping(m: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let (k, c) = (m.len(), m[0].len());
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut x = vec![0usize; k];
    loop {
        let mut covered = vec![false; c];
        x.iter().for_each(|&j| covered[j] = true);
        if covered.iter().all(|&b| b) {
            let obj: f64 = x.iter().enumerate().map(|(i, &j)| m[i][j]).sum();
            if obj > best.1 {
                best = (x.clone(), obj);
            }
        }
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            x[i] += 1;
            if x[i] < c {
                break;
            }
            x[i] = 0;
        }
    }
}

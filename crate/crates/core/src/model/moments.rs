//! Method-of-moments re-estimation of the time distributions.

use super::config::CatmConfig;
use super::kernels::{cross_transform, same_transform, AbsTimeParams, PairTime, RelTimeParams};
use crate::error::{CatmError, Result};

/// Transformed gaps `t_m - t_n` for every ordered clip pair of one document.
#[derive(Debug, Clone)]
pub struct DocGaps {
    n: usize,
    cross_u: Vec<f64>,
    cross_lj: Vec<f64>,
    same_u: Vec<f64>,
    same_lj: Vec<f64>,
}

impl DocGaps {
    pub fn new(timestamps: &[f64]) -> Self {
        let n = timestamps.len();
        let mut g = DocGaps {
            n,
            cross_u: vec![0.0; n * n],
            cross_lj: vec![0.0; n * n],
            same_u: vec![0.0; n * n],
            same_lj: vec![0.0; n * n],
        };
        for m in 0..n {
            for j in 0..n {
                if m == j {
                    continue;
                }
                let t = timestamps[m] - timestamps[j];
                let (cu, cl) = cross_transform(t);
                let (su, sl) = same_transform(t);
                let i = m * n + j;
                g.cross_u[i] = cu;
                g.cross_lj[i] = cl;
                g.same_u[i] = su;
                g.same_lj[i] = sl;
            }
        }
        g
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `(u, ln jacobian)` of `t_m - t_j` under the cross-segment transform.
    #[inline]
    pub fn cross(&self, m: usize, j: usize) -> (f64, f64) {
        let i = m * self.n + j;
        (self.cross_u[i], self.cross_lj[i])
    }

    #[inline]
    pub fn same(&self, m: usize, j: usize) -> (f64, f64) {
        let i = m * self.n + j;
        (self.same_u[i], self.same_lj[i])
    }
}

/// Segment index of each clip: consecutive clips with equal topics share one.
pub fn segment_ids(z: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(z.len());
    let mut seg = 0;
    for (i, &k) in z.iter().enumerate() {
        if i > 0 && z[i - 1] != k {
            seg += 1;
        }
        out.push(seg);
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct Branch {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Branch {
    fn push(&mut self, u: f64) {
        self.n += 1;
        self.sum += u;
        self.sum_sq += u * u;
    }

    fn mean_var(&self, var_floor: f64) -> (f64, f64) {
        if self.n == 0 {
            return (0.0, 1.0);
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        (mean, (self.sum_sq / n - mean * mean).max(var_floor))
    }
}

/// Running sufficient statistics for every topic pair.
#[derive(Debug, Clone)]
pub(crate) struct RelTimeAccumulator {
    k: usize,
    pos: Vec<Branch>,
    neg: Vec<Branch>,
    same_n: Vec<usize>,
    same_sq: Vec<f64>,
}

impl RelTimeAccumulator {
    pub(crate) fn new(k: usize) -> Self {
        RelTimeAccumulator {
            k,
            pos: vec![Branch::default(); k * k],
            neg: vec![Branch::default(); k * k],
            same_n: vec![0; k],
            same_sq: vec![0.0; k],
        }
    }

    pub(crate) fn add_doc(&mut self, z: &[usize], gaps: &DocGaps) {
        let seg = segment_ids(z);
        for m in 0..z.len() {
            for j in 0..z.len() {
                if m == j {
                    continue;
                }
                let (k, l) = (z[m], z[j]);
                if k == l && seg[m] == seg[j] {
                    let u = gaps.same(m, j).0;
                    self.same_n[k] += 1;
                    self.same_sq[k] += u * u;
                } else {
                    let u = gaps.cross(m, j).0;
                    // Timestamps are strictly ascending, so m > j means t_m - t_j > 0.
                    if m > j {
                        self.pos[k * self.k + l].push(u);
                    } else {
                        self.neg[k * self.k + l].push(u);
                    }
                }
            }
        }
    }

    pub(crate) fn finish(&self, var_floor: f64, min_pair_count: usize) -> RelTimeParams {
        let mut params = RelTimeParams::uniform(self.k, PairTime::FALLBACK);
        for k in 0..self.k {
            for l in 0..self.k {
                let i = k * self.k + l;
                let (pos, neg) = (self.pos[i], self.neg[i]);
                let n = pos.n + neg.n;
                let entry = params.get_mut(k, l);
                if n >= min_pair_count.max(1) {
                    let (mean_pos, var_pos) = pos.mean_var(var_floor);
                    let (mean_neg, var_neg) = neg.mean_var(var_floor);
                    // Rule of succession: an order never seen in training
                    // stays possible instead of getting zero density.
                    *entry = PairTime {
                        b: (pos.n as f64 + 1.0) / (n as f64 + 2.0),
                        mean_pos,
                        var_pos,
                        mean_neg,
                        var_neg,
                        same_var: entry.same_var,
                    };
                }
            }
            if self.same_n[k] >= min_pair_count.max(1) {
                params.get_mut(k, k).same_var =
                    (self.same_sq[k] / self.same_n[k] as f64).max(var_floor);
            }
        }
        params
    }
}

/// Fits every pairwise relative-time distribution from topic assignments.
///
/// Gaps between clips of one segment feed the diagonal within-segment
/// variance; all other gaps feed the pair's sign probability and the
/// per-branch mean and variance in the transformed space. Pairs with fewer
/// than `min_pair_count` gaps keep the fallback `(0.5, 0, 1, 0, 1)`.
pub fn estimate_reltime_moments(
    assignments: &[Vec<usize>],
    timestamps: &[Vec<f64>],
    config: &CatmConfig,
) -> Result<RelTimeParams> {
    if assignments.is_empty() {
        return Err(CatmError::InvalidInput(
            "relative-time moments need at least one document".into(),
        ));
    }
    if assignments.len() != timestamps.len() {
        return Err(CatmError::DimensionMismatch {
            expected: assignments.len(),
            got: timestamps.len(),
        });
    }
    let k = config.n_action_topics;
    let mut acc = RelTimeAccumulator::new(k);
    for (z, ts) in assignments.iter().zip(timestamps) {
        if z.len() != ts.len() {
            return Err(CatmError::DimensionMismatch {
                expected: ts.len(),
                got: z.len(),
            });
        }
        if z.iter().any(|&x| x >= k) {
            return Err(CatmError::InvalidInput(
                "assignment outside topic range".into(),
            ));
        }
        if ts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CatmError::InvalidInput(
                "timestamps must be strictly ascending".into(),
            ));
        }
        acc.add_doc(z, &DocGaps::new(ts));
    }
    Ok(acc.finish(config.var_floor, config.min_pair_count))
}

/// Log density of every within-document gap under `params`, summed over
/// all ordered clip pairs.
pub fn doc_time_log_lik(z: &[usize], gaps: &DocGaps, params: &RelTimeParams) -> f64 {
    let seg = segment_ids(z);
    let mut total = 0.0;
    for m in 0..z.len() {
        for j in 0..z.len() {
            if m == j {
                continue;
            }
            let pair = params.get(z[m], z[j]);
            total += if z[m] == z[j] && seg[m] == seg[j] {
                let (u, lj) = gaps.same(m, j);
                super::kernels::log_normal(u, 0.0, pair.same_var) + lj
            } else {
                let (u, lj) = gaps.cross(m, j);
                pair.log_pdf_cross_transformed(u, lj, m > j)
            };
        }
    }
    total
}

/// Per-topic mean and variance of absolute timestamps. Topics with fewer than
/// two clips get a uniform-like `(0.5, 1/12)`.
pub fn estimate_abs_time(
    assignments: &[Vec<usize>],
    timestamps: &[Vec<f64>],
    n_topics: usize,
    var_floor: f64,
) -> AbsTimeParams {
    let mut n = vec![0usize; n_topics];
    let mut s = vec![0.0; n_topics];
    let mut ss = vec![0.0; n_topics];
    for (z, ts) in assignments.iter().zip(timestamps) {
        for (&k, &t) in z.iter().zip(ts) {
            n[k] += 1;
            s[k] += t;
            ss[k] += t * t;
        }
    }
    let mut mean = vec![0.5; n_topics];
    let mut var = vec![1.0 / 12.0; n_topics];
    for k in 0..n_topics {
        if n[k] >= 2 {
            let m = s[k] / n[k] as f64;
            mean[k] = m;
            var[k] = (ss[k] / n[k] as f64 - m * m).max(var_floor);
        }
    }
    AbsTimeParams { mean, var }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize) -> CatmConfig {
        CatmConfig::new(k, 1)
    }

    #[test]
    fn segment_ids_follow_runs() {
        assert_eq!(segment_ids(&[1, 1, 2, 2, 2, 1]), vec![0, 0, 1, 1, 1, 2]);
        assert_eq!(segment_ids(&[]), Vec::<usize>::new());
    }

    #[test]
    fn strictly_after_gives_smoothed_b() {
        // topic 1 always after topic 0: 36 ordered cross pairs, all positive
        let z: Vec<Vec<usize>> = (0..4).map(|_| vec![0, 0, 0, 1, 1, 1]).collect();
        let ts: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..6).map(|i| (i as f64 + 0.5) / 6.0).collect())
            .collect();
        let p = estimate_reltime_moments(&z, &ts, &config(2)).unwrap();
        assert_eq!(p.get(1, 0).b, 37.0 / 38.0);
        assert_eq!(p.get(0, 1).b, 1.0 / 38.0);
        // mirrored branches
        assert!((p.get(1, 0).mean_pos + p.get(0, 1).mean_neg).abs() < 1e-12);
        assert!(p.get(0, 0).same_var < 1.0);
    }

    #[test]
    fn unobserved_pairs_fall_back() {
        let z = vec![vec![0, 0]];
        let ts = vec![vec![0.2, 0.4]];
        let p = estimate_reltime_moments(&z, &ts, &config(3)).unwrap();
        let f = p.get(1, 2);
        assert_eq!(
            (f.b, f.mean_pos, f.var_pos, f.mean_neg, f.var_neg),
            (0.5, 0.0, 1.0, 0.0, 1.0)
        );
    }

    #[test]
    fn variances_respect_floor() {
        let z = vec![vec![0, 1, 0, 1, 0, 1, 0, 1]];
        let ts = vec![(0..8).map(|i| (i as f64 + 0.5) / 8.0).collect()];
        let mut c = config(2);
        c.min_pair_count = 1;
        let p = estimate_reltime_moments(&z, &ts, &c).unwrap();
        p.validate(c.var_floor).unwrap();
    }

    #[test]
    fn rejects_unsorted_timestamps() {
        assert!(estimate_reltime_moments(&[vec![0, 1]], &[vec![0.5, 0.2]], &config(2)).is_err());
        assert!(estimate_reltime_moments(&[], &[], &config(2)).is_err());
    }

    #[test]
    fn absolute_time_means() {
        let p = estimate_abs_time(&[vec![0, 0, 1]], &[vec![0.2, 0.4, 0.9]], 3, 1e-4);
        assert!((p.mean[0] - 0.3).abs() < 1e-12);
        assert!((p.var[0] - 0.01).abs() < 1e-12);
        assert_eq!(p.mean[2], 0.5);
    }
}

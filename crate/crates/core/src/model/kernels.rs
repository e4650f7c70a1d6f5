//! Stick-breaking proportions and the relative-time densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CatmError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Logistic function, evaluated without overflow for large |x|.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(logistic(x))`.
pub fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Maps `v` (length M-1) to a probability vector of length M:
/// `pi_m = logistic(v_m) * prod_{l<m} logistic(-v_l)`, the last entry taking
/// the remaining stick.
pub fn stick_breaking(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut rest = 1.0;
    for &x in v {
        let p = logistic(x);
        out.push(rest * p);
        rest *= logistic(-x);
    }
    out.push(rest);
    out
}

/// Elementwise log of [`stick_breaking`], accurate in the tails.
pub fn log_stick_breaking(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut rest = 0.0;
    for &x in v {
        out.push(rest + log_logistic(x));
        rest += log_logistic(-x);
    }
    out.push(rest);
    out
}

pub(crate) fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
}

/// Change of variables for a gap between clips of different segments:
/// `u = tan(-pi/2 + pi t)` on `(0, 1)` and `u = tan(pi/2 + pi t)` on
/// `(-1, 0)`, which both reduce to `-cot(pi t)`. Returns `(u, ln|du/dt|)`.
pub fn cross_transform(t: f64) -> (f64, f64) {
    let (s, c) = (PI * t).sin_cos();
    (-c / s, PI.ln() - 2.0 * s.abs().ln())
}

/// Change of variables for a gap inside one segment: `u = tan(pi t / 2)`,
/// a bijection of `(-1, 1)` onto the real line with `u(0) = 0`.
pub fn same_transform(t: f64) -> (f64, f64) {
    let (s, c) = (PI * t / 2.0).sin_cos();
    (s / c, (PI / 2.0).ln() - 2.0 * c.abs().ln())
}

/// Inverse of [`cross_transform`] restricted to one branch.
pub fn cross_inverse(u: f64, positive: bool) -> f64 {
    let t = 0.5 + u.atan() / PI;
    if positive {
        t
    } else {
        t - 1.0
    }
}

/// Inverse of [`same_transform`].
pub fn same_inverse(u: f64) -> f64 {
    2.0 * u.atan() / PI
}

/// Relative-time distribution between an ordered pair of action-topics.
///
/// `b` is the probability that a clip of the first topic comes after a clip
/// of the second. Each sign branch is a normal in the transformed space.
/// `same_var` is only meaningful on the diagonal: the variance of the
/// zero-centered normal used for two clips inside one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTime {
    pub b: f64,
    pub mean_pos: f64,
    pub var_pos: f64,
    pub mean_neg: f64,
    pub var_neg: f64,
    pub same_var: f64,
}

impl PairTime {
    /// Used for pairs observed too rarely to estimate.
    pub const FALLBACK: PairTime = PairTime {
        b: 0.5,
        mean_pos: 0.0,
        var_pos: 1.0,
        mean_neg: 0.0,
        var_neg: 1.0,
        same_var: 1.0,
    };

    /// Log density of a signed gap `t` between clips in different segments.
    pub fn log_pdf_cross(&self, t: f64) -> f64 {
        if t == 0.0 {
            return f64::NEG_INFINITY;
        }
        let (u, lj) = cross_transform(t);
        self.log_pdf_cross_transformed(u, lj, t > 0.0)
    }

    pub fn log_pdf_cross_transformed(&self, u: f64, log_jac: f64, positive: bool) -> f64 {
        let (w, mean, var) = if positive {
            (self.b, self.mean_pos, self.var_pos)
        } else {
            (1.0 - self.b, self.mean_neg, self.var_neg)
        };
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        w.ln() + log_normal(u, mean, var) + log_jac
    }

    /// Log density of a gap between two clips of one segment.
    pub fn log_pdf_same(&self, t: f64) -> f64 {
        let (u, lj) = same_transform(t);
        log_normal(u, 0.0, self.same_var) + lj
    }
}

/// `K x K` table of pairwise relative-time distributions, indexed
/// `(k, l)` for the gap `t_m - t_n` with `z_m = k`, `z_n = l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelTimeParams {
    k: usize,
    table: Vec<PairTime>,
}

impl RelTimeParams {
    pub fn uniform(k: usize, pair: PairTime) -> Self {
        RelTimeParams {
            k,
            table: vec![pair; k * k],
        }
    }

    pub fn from_rows(rows: Vec<Vec<PairTime>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(CatmError::InvalidInput(
                "relative-time table must be square".into(),
            ));
        }
        Ok(RelTimeParams {
            k,
            table: rows.into_iter().flatten().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<PairTime>> {
        self.table
            .chunks(self.k.max(1))
            .map(<[_]>::to_vec)
            .collect()
    }

    pub fn n_topics(&self) -> usize {
        self.k
    }

    pub fn get(&self, k: usize, l: usize) -> &PairTime {
        &self.table[k * self.k + l]
    }

    pub fn get_mut(&mut self, k: usize, l: usize) -> &mut PairTime {
        &mut self.table[k * self.k + l]
    }

    /// Checks `0 <= b <= 1` and that every variance respects `var_floor`.
    pub fn validate(&self, var_floor: f64) -> Result<()> {
        for p in &self.table {
            if !(0.0..=1.0).contains(&p.b) {
                return Err(CatmError::InvalidInput(format!(
                    "b = {} outside [0, 1]",
                    p.b
                )));
            }
            if [p.var_pos, p.var_neg, p.same_var]
                .iter()
                .any(|&v| !(v >= var_floor))
            {
                return Err(CatmError::InvalidInput(format!(
                    "relative-time variance below floor {var_floor}"
                )));
            }
        }
        Ok(())
    }
}

/// Density of the signed gap `t` between a topic-`k` clip and a topic-`l`
/// clip. `same_segment` selects the zero-centered within-segment density and
/// requires `k == l`.
pub fn reltime_pdf(
    t: f64,
    k: usize,
    l: usize,
    params: &RelTimeParams,
    same_segment: bool,
) -> Result<f64> {
    if !(t > -1.0 && t < 1.0) {
        return Err(CatmError::InvalidInput(format!(
            "relative time {t} outside (-1, 1)"
        )));
    }
    if k >= params.n_topics() || l >= params.n_topics() {
        return Err(CatmError::InvalidInput(format!(
            "topic pair ({k}, {l}) out of range"
        )));
    }
    let pair = params.get(k, l);
    if same_segment {
        if k != l {
            return Err(CatmError::InvalidInput(
                "within-segment density requires k == l".into(),
            ));
        }
        return Ok(pair.log_pdf_same(t).exp());
    }
    if t == 0.0 {
        return Err(CatmError::InvalidInput(
            "zero gap between clips of different segments".into(),
        ));
    }
    Ok(pair.log_pdf_cross(t).exp())
}

/// Per-topic normals over absolute timestamps (time ablation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsTimeParams {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl AbsTimeParams {
    pub fn log_pdf(&self, k: usize, t: f64) -> f64 {
        log_normal(t, self.mean[k], self.var[k])
    }
}

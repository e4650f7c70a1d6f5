//! Word-topic count tables for the collapsed word distributions.

use crate::error::{CatmError, Result};

/// Counts of human-words per action-topic and object-words per
/// (action-topic, object-topic) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTables {
    n_action: usize,
    n_object: usize,
    n_human_words: usize,
    n_object_words: usize,
    n_kw: Vec<u32>,
    n_k: Vec<u32>,
    n_kpw: Vec<u32>,
    n_kp: Vec<u32>,
}

impl CountTables {
    pub fn new(
        n_action: usize,
        n_object: usize,
        n_human_words: usize,
        n_object_words: usize,
    ) -> Self {
        CountTables {
            n_action,
            n_object,
            n_human_words,
            n_object_words,
            n_kw: vec![0; n_action * n_human_words],
            n_k: vec![0; n_action],
            n_kpw: vec![0; n_action * n_object * n_object_words],
            n_kp: vec![0; n_action * n_object],
        }
    }

    /// Rebuilds totals from explicit per-word tables.
    pub fn from_tables(n_kw: &[Vec<u32>], n_kpw: &[Vec<Vec<u32>>]) -> Result<Self> {
        let k = n_kw.len();
        let n_human_words = n_kw.first().map_or(0, Vec::len);
        let p = n_kpw.first().map_or(0, Vec::len);
        let n_object_words = n_kpw.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if n_kpw.len() != k
            || n_kw.iter().any(|r| r.len() != n_human_words)
            || n_kpw
                .iter()
                .any(|r| r.len() != p || r.iter().any(|c| c.len() != n_object_words))
        {
            return Err(CatmError::InvalidInput("ragged count tables".into()));
        }
        let mut t = CountTables::new(k, p, n_human_words, n_object_words);
        for (ki, row) in n_kw.iter().enumerate() {
            for (w, &c) in row.iter().enumerate() {
                t.n_kw[ki * n_human_words + w] = c;
                t.n_k[ki] += c;
            }
        }
        for (ki, rows) in n_kpw.iter().enumerate() {
            for (pi, row) in rows.iter().enumerate() {
                for (w, &c) in row.iter().enumerate() {
                    t.n_kpw[(ki * p + pi) * n_object_words + w] = c;
                    t.n_kp[ki * p + pi] += c;
                }
            }
        }
        Ok(t)
    }

    pub fn n_action_topics(&self) -> usize {
        self.n_action
    }

    pub fn n_object_topics(&self) -> usize {
        self.n_object
    }

    pub fn n_human_words(&self) -> usize {
        self.n_human_words
    }

    pub fn n_object_words(&self) -> usize {
        self.n_object_words
    }

    pub fn human_word_count(&self, k: usize, w: usize) -> u32 {
        self.n_kw[k * self.n_human_words + w]
    }

    pub fn action_total(&self, k: usize) -> u32 {
        self.n_k[k]
    }

    pub fn object_word_count(&self, k: usize, p: usize, w: usize) -> u32 {
        self.n_kpw[(k * self.n_object + p) * self.n_object_words + w]
    }

    pub fn pair_total(&self, k: usize, p: usize) -> u32 {
        self.n_kp[k * self.n_object + p]
    }

    /// Counts one token under action-topic `k` and object-topic `p`.
    pub fn add(&mut self, k: usize, p: usize, wh: usize, wo: usize) {
        self.n_kw[k * self.n_human_words + wh] += 1;
        self.n_k[k] += 1;
        self.n_kpw[(k * self.n_object + p) * self.n_object_words + wo] += 1;
        self.n_kp[k * self.n_object + p] += 1;
    }

    /// Removes one token; errors if it was never counted.
    pub fn remove(&mut self, k: usize, p: usize, wh: usize, wo: usize) -> Result<()> {
        self.remove_human(k, wh)?;
        self.remove_object(k, p, wo)
    }

    pub(crate) fn add_human(&mut self, k: usize, wh: usize) {
        self.n_kw[k * self.n_human_words + wh] += 1;
        self.n_k[k] += 1;
    }

    pub(crate) fn add_object(&mut self, k: usize, p: usize, wo: usize) {
        self.n_kpw[(k * self.n_object + p) * self.n_object_words + wo] += 1;
        self.n_kp[k * self.n_object + p] += 1;
    }

    pub(crate) fn remove_human(&mut self, k: usize, wh: usize) -> Result<()> {
        let i = k * self.n_human_words + wh;
        if self.n_kw[i] == 0 || self.n_k[k] == 0 {
            return Err(CatmError::Internal(format!(
                "human word {wh} not counted under topic {k}"
            )));
        }
        self.n_kw[i] -= 1;
        self.n_k[k] -= 1;
        Ok(())
    }

    pub(crate) fn remove_object(&mut self, k: usize, p: usize, wo: usize) -> Result<()> {
        let i = (k * self.n_object + p) * self.n_object_words + wo;
        let j = k * self.n_object + p;
        if self.n_kpw[i] == 0 || self.n_kp[j] == 0 {
            return Err(CatmError::Internal(format!(
                "object word {wo} not counted under topics ({k}, {p})"
            )));
        }
        self.n_kpw[i] -= 1;
        self.n_kp[j] -= 1;
        Ok(())
    }

    /// Smoothed probability of human-word `w` under action-topic `k`:
    /// `(N_kw + beta) / (N_k + V beta)`. `exclude` names a counted token
    /// `(topic, word)` to leave out.
    pub fn word_prob_h(
        &self,
        k: usize,
        w: usize,
        beta1: f64,
        exclude: Option<(usize, usize)>,
    ) -> Result<f64> {
        let mut n_kw = self.human_word_count(k, w) as i64;
        let mut n_k = self.n_k[k] as i64;
        if let Some((ek, ew)) = exclude {
            if self.human_word_count(ek, ew) == 0 {
                return Err(CatmError::Internal(format!(
                    "excluded human word {ew} is not counted under topic {ek}"
                )));
            }
            if ek == k {
                n_k -= 1;
                if ew == w {
                    n_kw -= 1;
                }
            }
        }
        Ok(self.human_ratio(n_kw as f64, n_k as f64, beta1))
    }

    /// Object-word analogue of [`word_prob_h`](Self::word_prob_h), indexed by
    /// the (action-topic, object-topic) pair. `exclude` is `(k, p, word)`.
    pub fn word_prob_o(
        &self,
        k: usize,
        p: usize,
        w: usize,
        beta12: f64,
        exclude: Option<(usize, usize, usize)>,
    ) -> Result<f64> {
        let mut n_kpw = self.object_word_count(k, p, w) as i64;
        let mut n_kp = self.pair_total(k, p) as i64;
        if let Some((ek, ep, ew)) = exclude {
            if self.object_word_count(ek, ep, ew) == 0 {
                return Err(CatmError::Internal(format!(
                    "excluded object word {ew} is not counted under topics ({ek}, {ep})"
                )));
            }
            if (ek, ep) == (k, p) {
                n_kp -= 1;
                if ew == w {
                    n_kpw -= 1;
                }
            }
        }
        Ok(self.object_ratio(n_kpw as f64, n_kp as f64, beta12))
    }

    #[inline]
    pub(crate) fn human_ratio(&self, n_kw: f64, n_k: f64, beta1: f64) -> f64 {
        (n_kw + beta1) / (n_k + self.n_human_words as f64 * beta1)
    }

    #[inline]
    pub(crate) fn object_ratio(&self, n_kpw: f64, n_kp: f64, beta12: f64) -> f64 {
        (n_kpw + beta12) / (n_kp + self.n_object_words as f64 * beta12)
    }

    /// `ln` of the collapsed human-word probability for the current counts.
    #[inline]
    pub(crate) fn log_human(&self, k: usize, w: usize, beta1: f64) -> f64 {
        self.human_ratio(
            self.human_word_count(k, w) as f64,
            self.n_k[k] as f64,
            beta1,
        )
        .ln()
    }

    #[inline]
    pub(crate) fn log_object(&self, k: usize, p: usize, w: usize, beta12: f64) -> f64 {
        self.object_ratio(
            self.object_word_count(k, p, w) as f64,
            self.pair_total(k, p) as f64,
            beta12,
        )
        .ln()
    }

    pub fn human_table(&self) -> Vec<Vec<u32>> {
        self.n_kw
            .chunks(self.n_human_words.max(1))
            .map(<[_]>::to_vec)
            .take(self.n_action)
            .collect()
    }

    pub fn object_table(&self) -> Vec<Vec<Vec<u32>>> {
        (0..self.n_action)
            .map(|k| {
                (0..self.n_object)
                    .map(|p| {
                        (0..self.n_object_words)
                            .map(|w| self.object_word_count(k, p, w))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Checks that every total equals the sum of its row.
    pub fn check_totals(&self) -> Result<()> {
        for k in 0..self.n_action {
            let row: u32 = (0..self.n_human_words)
                .map(|w| self.human_word_count(k, w))
                .sum();
            if row != self.n_k[k] {
                return Err(CatmError::Internal(format!("topic {k} total drifted")));
            }
            for p in 0..self.n_object {
                let row: u32 = (0..self.n_object_words)
                    .map(|w| self.object_word_count(k, p, w))
                    .sum();
                if row != self.pair_total(k, p) {
                    return Err(CatmError::Internal(format!(
                        "pair ({k}, {p}) total drifted"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_smoothing_on_empty_tables() {
        let t = CountTables::new(3, 2, 500, 4);
        assert_relative_eq!(
            t.word_prob_h(0, 17, 0.01, None).unwrap(),
            0.002,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            t.word_prob_o(1, 1, 3, 0.01, None).unwrap(),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn direct_arithmetic() {
        let mut t = CountTables::new(1, 1, 10, 2);
        for _ in 0..4 {
            t.add(0, 0, 3, 0);
        }
        for w in 4..9 {
            t.add(0, 0, w, 1);
        }
        assert_relative_eq!(
            t.word_prob_h(0, 3, 0.01, None).unwrap(),
            4.01 / 9.1,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            t.word_prob_h(0, 3, 0.01, None).unwrap(),
            0.44066,
            epsilon = 1e-5
        );

        let mut t = CountTables::new(1, 1, 3, 2);
        t.add(0, 0, 0, 1);
        assert_relative_eq!(
            t.word_prob_o(0, 0, 1, 0.01, None).unwrap(),
            1.01 / 1.02,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            t.word_prob_o(0, 0, 1, 0.01, None).unwrap(),
            0.9902,
            epsilon = 1e-4
        );
    }

    #[test]
    fn exclusion_matches_removal() {
        let mut t = CountTables::new(2, 2, 5, 3);
        t.add(0, 1, 2, 2);
        t.add(0, 1, 2, 0);
        t.add(1, 0, 4, 1);
        let excluded = t.word_prob_h(0, 2, 0.01, Some((0, 2))).unwrap();
        let excluded_o = t.word_prob_o(0, 1, 2, 0.01, Some((0, 1, 2))).unwrap();
        let mut r = t.clone();
        r.remove(0, 1, 2, 2).unwrap();
        assert_eq!(excluded, r.word_prob_h(0, 2, 0.01, None).unwrap());
        assert_eq!(excluded_o, r.word_prob_o(0, 1, 2, 0.01, None).unwrap());
        assert!(t.word_prob_h(1, 2, 0.01, Some((1, 2))).is_err());
        assert!(r.remove(1, 1, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(
            tokens in prop::collection::vec((0usize..3, 0usize..2, 0usize..7, 0usize..4), 0..60),
            beta in 0.001f64..1.0,
        ) {
            let mut t = CountTables::new(3, 2, 7, 4);
            for &(k, p, wh, wo) in &tokens {
                t.add(k, p, wh, wo);
            }
            for k in 0..3 {
                let s: f64 = (0..7).map(|w| t.word_prob_h(k, w, beta, None).unwrap()).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                for p in 0..2 {
                    let s: f64 = (0..4).map(|w| t.word_prob_o(k, p, w, beta, None).unwrap()).sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
            t.check_totals().unwrap();
        }

        #[test]
        fn add_remove_round_trip(
            tokens in prop::collection::vec((0usize..3, 0usize..2, 0usize..7, 0usize..4), 1..40),
        ) {
            let mut t = CountTables::new(3, 2, 7, 4);
            for &(k, p, wh, wo) in &tokens[..tokens.len() / 2] {
                t.add(k, p, wh, wo);
            }
            let before = t.clone();
            for &(k, p, wh, wo) in &tokens[tokens.len() / 2..] {
                t.add(k, p, wh, wo);
            }
            for &(k, p, wh, wo) in tokens[tokens.len() / 2..].iter().rev() {
                t.remove(k, p, wh, wo).unwrap();
            }
            prop_assert_eq!(t, before);
        }
    }

    #[test]
    fn tables_round_trip() {
        let mut t = CountTables::new(2, 3, 4, 5);
        t.add(1, 2, 3, 4);
        t.add(0, 0, 1, 1);
        let r = CountTables::from_tables(&t.human_table(), &t.object_table()).unwrap();
        assert_eq!(r, t);
    }
}

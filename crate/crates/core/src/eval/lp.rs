//! Exact solution of the topic-to-class mapping program
//! `max sum x_kc m_kc` s.t. every topic maps to one class and every class
//! receives at least one topic.

use serde::{Deserialize, Serialize};

use crate::error::{CatmError, Result};

/// Largest search space enumerated exhaustively.
const EXHAUSTIVE_LIMIT: f64 = 1e6;

/// Result of the mapping program, as one class per topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMapping {
    pub topic_to_class: Vec<usize>,
    #[serde(skip)]
    pub objective: f64,
}

impl TopicMapping {
    /// Binary `K x C` matrix form.
    pub fn matrix(&self, n_classes: usize) -> Vec<Vec<u8>> {
        self.topic_to_class
            .iter()
            .map(|&c| (0..n_classes).map(|j| u8::from(j == c)).collect())
            .collect()
    }

    pub fn class_of(&self, topic: usize) -> Option<usize> {
        self.topic_to_class.get(topic).copied()
    }
}

fn check(m: &[Vec<f64>]) -> Result<(usize, usize)> {
    let k = m.len();
    let c = m.first().map_or(0, Vec::len);
    if c == 0 {
        return Err(CatmError::InvalidInput(
            "mapping problem has no classes".into(),
        ));
    }
    if m.iter().any(|r| r.len() != c) {
        return Err(CatmError::InvalidInput("mapping matrix is ragged".into()));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CatmError::InvalidInput(
            "mapping matrix has non-finite entries".into(),
        ));
    }
    if k < c {
        return Err(CatmError::Infeasible(format!(
            "{k} topics cannot cover {c} classes"
        )));
    }
    Ok((k, c))
}

fn objective(m: &[Vec<f64>], x: &[usize]) -> f64 {
    x.iter().enumerate().map(|(k, &c)| m[k][c]).sum()
}

/// Solves the mapping program exactly. Small instances are enumerated and
/// ties go to the lexicographically smallest class vector; larger ones use
/// [`map_topics_flow`].
pub fn map_topics_lp(m: &[Vec<f64>]) -> Result<TopicMapping> {
    let (k, c) = check(m)?;
    if (c as f64).powi(k as i32) <= EXHAUSTIVE_LIMIT {
        map_topics_exhaustive(m)
    } else {
        map_topics_flow(m)
    }
}

/// Enumerates every class vector in lexicographic order.
pub fn map_topics_exhaustive(m: &[Vec<f64>]) -> Result<TopicMapping> {
    let (k, c) = check(m)?;
    if (c as f64).powi(k as i32) > EXHAUSTIVE_LIMIT {
        return Err(CatmError::InvalidInput(format!(
            "{c}^{k} mappings is too many to enumerate"
        )));
    }
    let mut x = vec![0usize; k];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut covered = vec![0usize; c];
    loop {
        covered.iter_mut().for_each(|n| *n = 0);
        x.iter().for_each(|&j| covered[j] += 1);
        if covered.iter().all(|&n| n > 0) {
            let obj = objective(m, &x);
            if best.as_ref().is_none_or(|(b, _)| obj > *b) {
                best = Some((obj, x.clone()));
            }
        }
        // odometer, last topic fastest
        let mut i = k;
        loop {
            if i == 0 {
                let (objective, topic_to_class) =
                    best.expect("k >= c guarantees a feasible mapping");
                return Ok(TopicMapping {
                    topic_to_class,
                    objective,
                });
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

/// Exact solution through an assignment problem: each class gets one
/// mandatory slot, and `K - C` free slots are worth each topic's best class.
pub fn map_topics_flow(m: &[Vec<f64>]) -> Result<TopicMapping> {
    let (k, c) = check(m)?;
    let best_class: Vec<usize> = m
        .iter()
        .map(|row| {
            let mut b = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[b] {
                    b = j;
                }
            }
            b
        })
        .collect();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            (0..k)
                .map(|slot| {
                    if slot < c {
                        -m[t][slot]
                    } else {
                        -m[t][best_class[t]]
                    }
                })
                .collect()
        })
        .collect();
    let slots = hungarian(&cost);
    let topic_to_class: Vec<usize> = slots
        .iter()
        .enumerate()
        .map(|(t, &s)| if s < c { s } else { best_class[t] })
        .collect();
    Ok(TopicMapping {
        objective: objective(m, &topic_to_class),
        topic_to_class,
    })
}

/// Minimum-cost perfect matching of a square matrix (rows to columns).
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-indexed potentials; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominant_diagonal() {
        let m = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let x = map_topics_lp(&m).unwrap();
        assert_eq!(x.topic_to_class, vec![0, 1]);
        assert!((x.objective - 1.7).abs() < 1e-12);
        assert_eq!(x.matrix(2), vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn extra_topic_joins_its_best_class() {
        let m = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4]];
        for x in [map_topics_lp(&m).unwrap(), map_topics_flow(&m).unwrap()] {
            assert_eq!(x.topic_to_class, vec![0, 1, 0]);
            assert!((x.objective - 2.3).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation() {
        let m = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        assert_eq!(map_topics_flow(&m).unwrap().topic_to_class, vec![2, 0, 1]);
        assert_eq!(map_topics_lp(&m).unwrap().topic_to_class, vec![2, 0, 1]);
    }

    #[test]
    fn ties_prefer_smallest_vector() {
        let m = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(map_topics_lp(&m).unwrap().topic_to_class, vec![0, 1]);
    }

    #[test]
    fn too_few_topics() {
        let m = vec![vec![0.5, 0.5]];
        assert!(matches!(map_topics_lp(&m), Err(CatmError::Infeasible(_))));
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        assert_eq!(hungarian(&cost), vec![1, 0, 2]);
    }
}

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{CatmError, Result};
use crate::model::CountTables;

/// Assignments and prior vector of one document, with its topic tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocState {
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    pub v: Vec<f64>,
    c1: Vec<u32>,
    c2: Vec<u32>,
}

impl DocState {
    pub fn new(
        z1: Vec<usize>,
        z2: Vec<usize>,
        v: Vec<f64>,
        n_action: usize,
        n_object: usize,
    ) -> Result<Self> {
        if z1.len() != z2.len() {
            return Err(CatmError::DimensionMismatch {
                expected: z1.len(),
                got: z2.len(),
            });
        }
        let mut c1 = vec![0u32; n_action];
        let mut c2 = vec![0u32; n_object];
        for (&a, &b) in z1.iter().zip(&z2) {
            if a >= n_action || b >= n_object {
                return Err(CatmError::InvalidInput(format!(
                    "assignment ({a}, {b}) outside {n_action} x {n_object} topics"
                )));
            }
            c1[a] += 1;
            c2[b] += 1;
        }
        Ok(DocState { z1, z2, v, c1, c2 })
    }

    pub fn len(&self) -> usize {
        self.z1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z1.is_empty()
    }

    /// Clips assigned to each action-topic.
    pub fn action_counts(&self) -> &[u32] {
        &self.c1
    }

    /// Clips assigned to each object-topic.
    pub fn object_counts(&self) -> &[u32] {
        &self.c2
    }

    pub(crate) fn set_action(&mut self, n: usize, k: usize) {
        self.c1[self.z1[n]] -= 1;
        self.z1[n] = k;
        self.c1[k] += 1;
    }

    pub(crate) fn set_object(&mut self, n: usize, p: usize) {
        self.c2[self.z2[n]] -= 1;
        self.z2[n] = p;
        self.c2[p] += 1;
    }

    pub(crate) fn c1_mut(&mut self) -> &mut [u32] {
        &mut self.c1
    }

    pub(crate) fn c2_mut(&mut self) -> &mut [u32] {
        &mut self.c2
    }
}

/// Assignments of a whole corpus with the collapsed word-count tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignState {
    pub docs: Vec<DocState>,
    pub counts: CountTables,
    pub rng_seed: u64,
}

impl AssignState {
    /// Tallies `docs` into fresh count tables.
    pub fn from_docs(
        corpus: &Corpus,
        docs: Vec<DocState>,
        n_action: usize,
        n_object: usize,
        rng_seed: u64,
    ) -> Result<Self> {
        let counts = recount(corpus, &docs, n_action, n_object)?;
        Ok(AssignState {
            docs,
            counts,
            rng_seed,
        })
    }

    /// Full recount of the assignments, compared against the live tables.
    pub fn check_counts(&self, corpus: &Corpus) -> Result<()> {
        let fresh = recount(
            corpus,
            &self.docs,
            self.counts.n_action_topics(),
            self.counts.n_object_topics(),
        )?;
        if fresh != self.counts {
            return Err(CatmError::Internal(
                "count tables drifted from assignments".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn recount(
    corpus: &Corpus,
    docs: &[DocState],
    n_action: usize,
    n_object: usize,
) -> Result<CountTables> {
    if docs.len() != corpus.len() {
        return Err(CatmError::DimensionMismatch {
            expected: corpus.len(),
            got: docs.len(),
        });
    }
    let mut counts = CountTables::new(
        n_action,
        n_object,
        corpus.n_human_words,
        corpus.n_object_words,
    );
    for (doc, st) in corpus.docs.iter().zip(docs) {
        if st.len() != doc.len() {
            return Err(CatmError::doc(
                &doc.doc_id,
                "assignment length differs from clip count",
            ));
        }
        for (i, c) in doc.clips.iter().enumerate() {
            if st.z1[i] >= n_action || st.z2[i] >= n_object {
                return Err(CatmError::doc(
                    &doc.doc_id,
                    format!("clip {i}: assignment out of range"),
                ));
            }
            counts.add(st.z1[i], st.z2[i], c.human_word, c.object_word);
        }
    }
    Ok(counts)
}

//! Python bindings: corpora, synthetic generation, training, inference,
//! patching and evaluation.

use catm::corpus::{load_corpus, load_features, save_corpus, Corpus as CoreCorpus, VideoDoc};
use catm::eval::{evaluate as core_evaluate, map_topics_lp as core_map, EvalOptions};
use catm::model::{
    generate as core_generate, CatmConfig, Checkpoint, Preset, SyntheticOptions, TrueParams,
};
use catm::patch::{
    detect_forgotten, patch_threshold, FeatureStore, HypothesisOptions, PatchContext, TrainingIndex,
};
use catm::sampler::{train as core_train, DocInference, InferOptions, InferenceModel};
use catm::CatmError;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(catm, CatmFailure, PyException);

fn err(e: CatmError) -> PyErr {
    CatmFailure::new_err(e.to_string())
}

/// A corpus of timestamped clip documents.
#[pyclass(module = "catm", frozen)]
struct Corpus {
    inner: CoreCorpus,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Corpus {
            inner: load_corpus(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_corpus(&self.inner, path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn doc_ids(&self) -> Vec<String> {
        self.inner.docs.iter().map(|d| d.doc_id.clone()).collect()
    }

    #[getter]
    fn n_tokens(&self) -> usize {
        self.inner.n_tokens()
    }

    /// `(human_word, object_word, t)` per clip.
    fn clips(&self, doc_id: &str) -> PyResult<Vec<(usize, usize, f64)>> {
        let doc = self.find(doc_id)?;
        Ok(doc
            .clips
            .iter()
            .map(|c| (c.human_word, c.object_word, c.t))
            .collect())
    }

    fn labels(&self, doc_id: &str) -> PyResult<Option<Vec<usize>>> {
        Ok(self.find(doc_id)?.gt_labels.clone())
    }
}

impl Corpus {
    fn find(&self, doc_id: &str) -> PyResult<&VideoDoc> {
        self.inner
            .doc(doc_id)
            .ok_or_else(|| PyValueError::new_err(format!("no document {doc_id}")))
    }
}

/// Topic assignments of one document.
#[pyclass(module = "catm", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct Assignment {
    doc_id: String,
    z1: Vec<usize>,
    z2: Vec<usize>,
    v: Vec<f64>,
    prob: Vec<f64>,
}

impl From<DocInference> for Assignment {
    fn from(d: DocInference) -> Self {
        Assignment {
            doc_id: d.doc_id,
            z1: d.z1,
            z2: d.z2,
            v: d.v,
            prob: d.prob,
        }
    }
}

impl Assignment {
    fn core(&self) -> DocInference {
        DocInference {
            doc_id: self.doc_id.clone(),
            z1: self.z1.clone(),
            z2: self.z2.clone(),
            v: self.v.clone(),
            prob: self.prob.clone(),
        }
    }
}

/// A trained model; holds its training corpus and assignments when
/// produced by `Model.train`.
#[pyclass(module = "catm", frozen)]
struct Model {
    checkpoint: Checkpoint,
    model: InferenceModel,
    training: Option<(CoreCorpus, Vec<Assignment>)>,
}

fn aligned<'a>(corpus: &CoreCorpus, rows: &'a [Assignment]) -> PyResult<Vec<&'a Assignment>> {
    corpus
        .docs
        .iter()
        .map(|d| {
            rows.iter()
                .find(|r| r.doc_id == d.doc_id)
                .ok_or_else(|| PyValueError::new_err(format!("no assignment for {}", d.doc_id)))
        })
        .collect()
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (corpus, k, p, preset = "catm-ao", iters = 200, burnin = 100, seed = 0))]
    fn train(
        py: Python<'_>,
        corpus: &Corpus,
        k: usize,
        p: usize,
        preset: &str,
        iters: usize,
        burnin: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let preset = Preset::parse(preset)
            .ok_or_else(|| PyValueError::new_err(format!("unknown preset {preset}")))?;
        let config = CatmConfig::new(k, p)
            .with_preset(preset)
            .with_seed(seed)
            .with_iters(iters, burnin);
        let out = py
            .detach(|| core_train(&corpus.inner, &config))
            .map_err(err)?;
        let rows = corpus
            .inner
            .docs
            .iter()
            .zip(&out.state.docs)
            .zip(&out.trace.prob)
            .map(|((doc, st), prob)| Assignment {
                doc_id: doc.doc_id.clone(),
                z1: st.z1.clone(),
                z2: st.z2.clone(),
                v: st.v.clone(),
                prob: prob.clone(),
            })
            .collect();
        Ok(Model {
            model: InferenceModel::from_checkpoint(&out.checkpoint).map_err(err)?,
            checkpoint: out.checkpoint,
            training: Some((corpus.inner.clone(), rows)),
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let checkpoint = Checkpoint::load(path).map_err(err)?;
        Ok(Model {
            model: InferenceModel::from_checkpoint(&checkpoint).map_err(err)?,
            checkpoint,
            training: None,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.checkpoint.save(path).map_err(err)
    }

    #[getter]
    fn n_action_topics(&self) -> usize {
        self.checkpoint.config.n_action_topics
    }

    /// Assignments of the training corpus, when trained in this session.
    #[getter]
    fn assignments(&self) -> Option<Vec<Assignment>> {
        self.training.as_ref().map(|(_, rows)| rows.clone())
    }

    #[pyo3(signature = (corpus, iters = 50, burnin = 25, seed = 0))]
    fn infer(
        &self,
        py: Python<'_>,
        corpus: &Corpus,
        iters: usize,
        burnin: usize,
        seed: u64,
    ) -> PyResult<Vec<Assignment>> {
        let opts = InferOptions {
            iters,
            burnin,
            seed,
            ..InferOptions::default()
        };
        py.detach(|| {
            corpus
                .inner
                .docs
                .iter()
                .map(|d| self.model.infer_doc(d, &opts).map(Assignment::from))
                .collect::<catm::Result<Vec<_>>>()
        })
        .map_err(err)
    }

    /// Forgotten-action detection for each query document. Uses clip
    /// features from `features` (a feature file covering training and query
    /// documents) or runs word-only without them.
    #[pyo3(signature = (corpus, assignments, features = None))]
    fn patch<'py>(
        &self,
        py: Python<'py>,
        corpus: &Corpus,
        assignments: Vec<Assignment>,
        features: Option<&str>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let (train, train_rows) = self.training.as_ref().ok_or_else(|| {
            PyValueError::new_err("patching needs a model trained in this session")
        })?;
        let rows = aligned(train, train_rows)?;
        let z1: Vec<_> = rows.iter().map(|r| r.z1.clone()).collect();
        let z2: Vec<_> = rows.iter().map(|r| r.z2.clone()).collect();
        let probs: Vec<_> = rows.iter().map(|r| r.prob.clone()).collect();
        let index = TrainingIndex::new(train, &z1, &z2, &probs).map_err(err)?;
        let store = match features {
            Some(path) => {
                let feats = load_features(path).map_err(err)?;
                let docs = train
                    .docs
                    .iter()
                    .chain(&corpus.inner.docs)
                    .cloned()
                    .collect();
                let both = CoreCorpus::new(docs, train.n_human_words, train.n_object_words)
                    .map_err(err)?;
                Some(FeatureStore::new(&feats, &both).map_err(err)?)
            }
            None => None,
        };
        let threshold = match &store {
            Some(s) => patch_threshold(&index, s).map_err(err)?,
            None => 0.0,
        };
        let ctx = PatchContext {
            model: &self.model,
            index: &index,
            features: store.as_ref(),
            threshold,
            hypotheses: HypothesisOptions::default(),
        };
        let query = aligned(&corpus.inner, &assignments)?;
        let mut out = Vec::new();
        for (doc, a) in corpus.inner.docs.iter().zip(query) {
            let r = detect_forgotten(doc, &a.core(), &ctx).map_err(err)?;
            let d = PyDict::new(py);
            d.set_item("doc_id", &r.doc_id)?;
            d.set_item("forgotten", r.chosen.is_some())?;
            let hyps: Vec<(usize, usize, f64, f64)> = r
                .hypotheses
                .iter()
                .map(|h| (h.k, h.p, h.t_s, h.log_score))
                .collect();
            d.set_item("hypotheses", hyps)?;
            if let Some(c) = &r.chosen {
                d.set_item("k", c.k)?;
                d.set_item("t_s", c.t_s)?;
                d.set_item("train_doc", &c.train_doc)?;
                d.set_item("patch_score", c.patch_score)?;
            }
            d.set_item("threshold", r.threshold)?;
            out.push(d);
        }
        Ok(out)
    }
}

/// Samples a synthetic corpus; returns it with the true `(doc_id, z1, z2)`.
#[pyfunction]
#[pyo3(signature = (docs, clips, k, p, seed, human_words = 100, object_words = 50))]
fn generate(
    docs: usize,
    clips: usize,
    k: usize,
    p: usize,
    seed: u64,
    human_words: usize,
    object_words: usize,
) -> PyResult<(Corpus, Vec<(String, Vec<usize>, Vec<usize>)>)> {
    let mut opts = SyntheticOptions::new(k, p);
    opts.n_human_words = human_words;
    opts.n_object_words = object_words;
    let params = TrueParams::synthetic(&opts, seed).map_err(err)?;
    let (corpus, truth) = core_generate(&params, docs, clips, seed.wrapping_add(1)).map_err(err)?;
    let truth = truth.into_iter().map(|g| (g.doc_id, g.z1, g.z2)).collect();
    Ok((Corpus { inner: corpus }, truth))
}

/// Frame-Acc, Seg-Acc and Seg-AP after mapping topics to classes.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    corpus: &Corpus,
    assignments: Vec<Assignment>,
    k: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let rows = aligned(&corpus.inner, &assignments)?;
    let docs: Vec<&VideoDoc> = corpus.inner.docs.iter().collect();
    let z1: Vec<_> = rows.iter().map(|r| r.z1.clone()).collect();
    let prob: Vec<_> = rows.iter().map(|r| r.prob.clone()).collect();
    let (mapping, report) =
        core_evaluate(&docs, &z1, &prob, k, &EvalOptions::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("frame_acc", report.frame_acc)?;
    d.set_item("seg_acc", report.seg_acc)?;
    d.set_item("seg_ap", report.seg_ap)?;
    d.set_item("topic_to_class", mapping.topic_to_class)?;
    Ok(d)
}

#[pyfunction]
fn stick_breaking(v: Vec<f64>) -> Vec<f64> {
    catm::model::stick_breaking(&v)
}

/// Exact topic-to-class mapping maximizing total overlap.
#[pyfunction]
fn map_topics_lp(m: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    let x = core_map(&m).map_err(err)?;
    Ok((x.topic_to_class, x.objective))
}

#[pymodule]
#[pyo3(name = "catm")]
fn catm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Assignment>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(stick_breaking, m)?)?;
    m.add_function(wrap_pyfunction!(map_topics_lp, m)?)?;
    m.add("CatmFailure", m.py().get_type::<CatmFailure>())?;
    Ok(())
}

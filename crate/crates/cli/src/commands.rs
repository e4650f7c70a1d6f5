//! One function per subcommand.

use std::path::Path;

use catm::corpus::{
    build_dictionary, clipify, kinect_v2_edges, load_corpus, load_dictionary, load_features,
    load_joints, quantize as quantize_features, save_corpus, save_dictionary, save_features,
    skeleton_features, Corpus, FeatureClip, VideoDoc,
};
use catm::eval::{evaluate, pa_acc, score_mapped, EvalOptions, PatchCall, TopicMapping};
use catm::model::{
    ablate_interior_segment, generate as generate_corpus, synth_features, CatmConfig, Checkpoint,
    FeatureSynthOptions, Preset, SyntheticOptions, TrueParams,
};
use catm::patch::{
    detect_forgotten, patch_threshold, segment_doc, FeatureStore, HypothesisOptions, PatchContext,
    PatchResult, TrainingIndex,
};
use catm::sampler::{self, DocInference, InferOptions, InferenceModel};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::files::{
    align, read_assignments, read_json, read_lines, write_csv, write_json, write_lines, TruthLine,
};
use crate::manifest::{sibling, Recorder};
use crate::{
    EvalArgs, Failure, GenArgs, InferArgs, Outcome, PatchArgs, QuantizeArgs, SegmentArgs,
    SkelfeatArgs, TrainArgs,
};

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn doc_ids(corpus: &Corpus) -> Vec<&str> {
    corpus.docs.iter().map(|d| d.doc_id.as_str()).collect()
}

fn truth_lines(
    truth: Vec<catm::model::GroundTruth>,
    forgotten: Option<Vec<Option<catm::model::ForgottenTruth>>>,
) -> Vec<TruthLine> {
    let forgotten = forgotten.unwrap_or_else(|| vec![None; truth.len()]);
    truth
        .into_iter()
        .zip(forgotten)
        .map(|(g, f)| TruthLine {
            doc_id: g.doc_id,
            z1: g.z1,
            z2: g.z2,
            forgotten: f,
        })
        .collect()
}

pub fn gen(a: &GenArgs) -> Outcome {
    let mut rec = Recorder::start("gen");
    if a.k == 0 || a.p == 0 || a.clips == 0 {
        return Err(usage("--k, --p and --clips must be positive"));
    }
    if a.human_words == 0 || a.object_words == 0 {
        return Err(usage("vocabulary sizes must be positive"));
    }
    if !(a.concentration > 0.0 && a.prior_variance > 0.0) {
        return Err(usage(
            "--concentration and --prior-variance must be positive",
        ));
    }
    let mut opts = SyntheticOptions::new(a.k, a.p);
    opts.n_human_words = a.human_words;
    opts.n_object_words = a.object_words;
    opts.word_concentration = a.concentration;
    opts.prior_variance = a.prior_variance;

    let mut seeds = ChaCha8Rng::seed_from_u64(a.seed);
    let params = TrueParams::synthetic(&opts, seeds.next_u64())?;
    let (corpus, truth) = generate_corpus(&params, a.docs, a.clips, seeds.next_u64())?;
    let (mut test, mut test_truth) =
        generate_corpus(&params, a.test_docs, a.clips, seeds.next_u64())?;
    for (d, t) in test.docs.iter_mut().zip(test_truth.iter_mut()) {
        d.doc_id = format!("test-{}", d.doc_id);
        t.doc_id = d.doc_id.clone();
    }
    let feat_opts = FeatureSynthOptions::default();
    let (train_seed, test_seed) = (seeds.next_u64(), seeds.next_u64());
    let mut features = Vec::new();
    let mut test_features = Vec::new();
    if a.features {
        features = synth_features(&corpus, &truth, a.k, &feat_opts, train_seed)?;
        test_features = synth_features(&test, &test_truth, a.k, &feat_opts, test_seed)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.next_u64());
    let mut forgotten = Vec::with_capacity(test.len());
    for (i, (d, t)) in test.docs.iter_mut().zip(test_truth.iter_mut()).enumerate() {
        forgotten.push(if i % 2 == 0 {
            let feats = a.features.then_some(&mut test_features);
            ablate_interior_segment(d, t, feats, &mut rng)
        } else {
            None
        });
    }

    save_corpus(&corpus, &a.out)?;
    rec.output(&a.out);
    let truth_path = sibling(&a.out, ".truth.jsonl");
    write_lines(&truth_path, &truth_lines(truth, None))?;
    rec.output(&truth_path);
    if a.test_docs > 0 {
        let test_path = sibling(&a.out, ".test.jsonl");
        save_corpus(&test, &test_path)?;
        rec.output(&test_path);
        let path = sibling(&a.out, ".test.truth.jsonl");
        write_lines(&path, &truth_lines(test_truth, Some(forgotten)))?;
        rec.output(&path);
    }
    if a.features {
        features.extend(test_features);
        let path = sibling(&a.out, ".features.jsonl");
        save_features(&features, &path)?;
        rec.output(&path);
    }
    rec.finish(a, Some(a.seed), &sibling(&a.out, ".manifest.json"))
}

pub fn skelfeat(a: &SkelfeatArgs) -> Outcome {
    let mut rec = Recorder::start("skelfeat");
    rec.input(&a.joints);
    let streams = load_joints(&a.joints, &kinect_v2_edges())?;
    let mut features = Vec::new();
    for (doc_id, stream) in &streams {
        for w in clipify(stream, a.clip_len, a.stride)? {
            features.push(FeatureClip {
                doc_id: doc_id.clone(),
                human_feat: skeleton_features(&stream.frames[w.start..w.end], &stream.edges)?,
                object_feat: Vec::new(),
                t: w.t,
                frame_span: Some((w.start as u64, (w.end - 1) as u64)),
            });
        }
    }
    save_features(&features, &a.out)?;
    rec.output(&a.out);
    rec.finish(a, None, &sibling(&a.out, ".manifest.json"))
}

pub fn quantize(a: &QuantizeArgs) -> Outcome {
    let mut rec = Recorder::start("quantize");
    rec.input(&a.features);
    let features = load_features(&a.features)?;
    let seed = || {
        a.seed
            .ok_or_else(|| usage("--seed is required to build a dictionary"))
    };
    let dict_h = match &a.dict_h {
        Some(p) => {
            rec.input(p);
            load_dictionary(p)?
        }
        None => {
            let points: Vec<Vec<f64>> = features.iter().map(|f| f.human_feat.clone()).collect();
            let d = build_dictionary(&points, a.human_words, seed()?)?;
            let path = sibling(&a.out, ".dict-h.json");
            save_dictionary(&d, &path)?;
            rec.output(&path);
            d
        }
    };
    let has_objects = features.first().is_some_and(|f| !f.object_feat.is_empty());
    let dict_o = match (&a.dict_o, has_objects) {
        (Some(p), _) => {
            rec.input(p);
            Some(load_dictionary(p)?)
        }
        (None, true) => {
            let points: Vec<Vec<f64>> = features.iter().map(|f| f.object_feat.clone()).collect();
            let d = build_dictionary(&points, a.object_words, seed()?.wrapping_add(1))?;
            let path = sibling(&a.out, ".dict-o.json");
            save_dictionary(&d, &path)?;
            rec.output(&path);
            Some(d)
        }
        (None, false) => None,
    };
    let corpus = quantize_features(&features, &dict_h, dict_o.as_ref())?;
    save_corpus(&corpus, &a.out)?;
    rec.output(&a.out);
    rec.finish(a, a.seed, &sibling(&a.out, ".manifest.json"))
}

pub fn train(a: &TrainArgs) -> Outcome {
    let mut rec = Recorder::start("train");
    let preset =
        Preset::parse(&a.preset).ok_or_else(|| usage(format!("unknown preset {}", a.preset)))?;
    let config = CatmConfig::new(a.k, a.p)
        .with_preset(preset)
        .with_seed(a.seed)
        .with_iters(a.iters, a.burnin);
    config.validate()?;
    rec.input(&a.corpus);
    let corpus = load_corpus(&a.corpus)?;
    let out = sampler::train(&corpus, &config)?;

    std::fs::create_dir_all(&a.out)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", a.out.display())))?;
    let ckpt_path = a.out.join("checkpoint.json");
    out.checkpoint.save(&ckpt_path)?;
    rec.output(&ckpt_path);
    let rows: Vec<DocInference> = corpus
        .docs
        .iter()
        .zip(&out.state.docs)
        .zip(&out.trace.prob)
        .map(|((doc, st), prob)| DocInference {
            doc_id: doc.doc_id.clone(),
            z1: st.z1.clone(),
            z2: st.z2.clone(),
            v: st.v.clone(),
            prob: prob.clone(),
        })
        .collect();
    let assign_path = a.out.join("assignments.jsonl");
    write_lines(&assign_path, &rows)?;
    rec.output(&assign_path);
    let trace: Vec<String> = out
        .trace
        .loglik
        .iter()
        .zip(&out.trace.mh_accept_rate)
        .enumerate()
        .map(|(i, (ll, acc))| format!("{i},{ll},{acc}"))
        .collect();
    let trace_path = a.out.join("trace.csv");
    write_csv(&trace_path, "iteration,loglik,mh_accept_rate", &trace)?;
    rec.output(&trace_path);
    rec.finish(&(a, &config), Some(a.seed), &a.out.join("manifest.json"))
}

fn load_model(path: &Path) -> Outcome<(Checkpoint, InferenceModel)> {
    let ckpt = Checkpoint::load(path)
        .map_err(|e| Failure::Input(format!("cannot load checkpoint {}: {e}", path.display())))?;
    let model = InferenceModel::from_checkpoint(&ckpt)?;
    Ok((ckpt, model))
}

pub fn infer(a: &InferArgs) -> Outcome {
    let mut rec = Recorder::start("infer");
    if a.jobs == 0 {
        return Err(usage("--jobs must be positive"));
    }
    rec.input(&a.checkpoint);
    rec.input(&a.corpus);
    let (_, model) = load_model(&a.checkpoint)?;
    let corpus = load_corpus(&a.corpus)?;
    let opts = InferOptions {
        iters: a.iters,
        burnin: a.burnin,
        seed: a.seed,
        ..InferOptions::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?;
    let rows: Vec<DocInference> = pool.install(|| {
        corpus
            .docs
            .par_iter()
            .map(|d| model.infer_doc(d, &opts))
            .collect::<catm::Result<_>>()
    })?;
    write_lines(&a.out, &rows)?;
    rec.output(&a.out);
    rec.finish(a, Some(a.seed), &sibling(&a.out, ".manifest.json"))
}

pub fn segment(a: &SegmentArgs) -> Outcome {
    let mut rec = Recorder::start("segment");
    rec.input(&a.corpus);
    rec.input(&a.assignments);
    let corpus = load_corpus(&a.corpus)?;
    let rows = read_assignments(&a.assignments, &doc_ids(&corpus))?;
    let mut segments = Vec::new();
    for (doc, r) in corpus.docs.iter().zip(&rows) {
        segments.extend(segment_doc(doc, &r.z1, &r.prob)?);
    }
    write_lines(&a.out, &segments)?;
    rec.output(&a.out);
    rec.finish(a, None, &sibling(&a.out, ".manifest.json"))
}

pub fn patch(a: &PatchArgs) -> Outcome {
    let mut rec = Recorder::start("patch");
    for p in [
        &a.checkpoint,
        &a.train_corpus,
        &a.train_assignments,
        &a.corpus,
        &a.assignments,
    ] {
        rec.input(p);
    }
    let (_, model) = load_model(&a.checkpoint)?;
    let train = load_corpus(&a.train_corpus)?;
    let train_rows = read_assignments(&a.train_assignments, &doc_ids(&train))?;
    let query = load_corpus(&a.corpus)?;
    let rows = read_assignments(&a.assignments, &doc_ids(&query))?;

    let z1: Vec<Vec<usize>> = train_rows.iter().map(|r| r.z1.clone()).collect();
    let z2: Vec<Vec<usize>> = train_rows.iter().map(|r| r.z2.clone()).collect();
    let probs: Vec<Vec<f64>> = train_rows.iter().map(|r| r.prob.clone()).collect();
    let index = TrainingIndex::new(&train, &z1, &z2, &probs)?;

    let store = if a.features.is_empty() {
        None
    } else {
        let mut features = Vec::new();
        for p in &a.features {
            rec.input(p);
            features.extend(load_features(p)?);
        }
        if let Some(d) = query.docs.iter().find(|d| train.doc(&d.doc_id).is_some()) {
            return Err(Failure::Input(format!(
                "document {} is in both the training and query corpora",
                d.doc_id
            )));
        }
        let docs: Vec<VideoDoc> = train.docs.iter().chain(&query.docs).cloned().collect();
        let both = Corpus::new(docs, train.n_human_words, train.n_object_words)?;
        Some(FeatureStore::new(&features, &both)?)
    };
    let threshold = match (a.threshold, &store) {
        (Some(t), _) => t,
        (None, Some(s)) => patch_threshold(&index, s)?,
        (None, None) => 0.0,
    };
    let ctx = PatchContext {
        model: &model,
        index: &index,
        features: store.as_ref(),
        threshold,
        hypotheses: HypothesisOptions::default(),
    };
    let results: Vec<PatchResult> = query
        .docs
        .iter()
        .zip(&rows)
        .map(|(doc, inf)| detect_forgotten(doc, inf, &ctx))
        .collect::<catm::Result<_>>()?;
    write_lines(&a.out, &results)?;
    rec.output(&a.out);
    rec.finish(a, None, &sibling(&a.out, ".manifest.json"))
}

fn class_of(mapping: &TopicMapping, k: usize) -> Outcome<usize> {
    mapping
        .class_of(k)
        .ok_or_else(|| Failure::Input(format!("topic {k} is not covered by the mapping")))
}

pub fn eval(a: &EvalArgs) -> Outcome {
    let mut rec = Recorder::start("eval");
    rec.input(&a.corpus);
    rec.input(&a.assignments);
    if !(0.0..=1.0).contains(&a.overlap) {
        return Err(usage("--overlap must lie in [0, 1]"));
    }
    let corpus = load_corpus(&a.corpus)?;
    let ids = doc_ids(&corpus);
    let rows = read_assignments(&a.assignments, &ids)?;
    let docs: Vec<&VideoDoc> = corpus.docs.iter().collect();
    let z1: Vec<Vec<usize>> = rows.iter().map(|r| r.z1.clone()).collect();
    let prob: Vec<Vec<f64>> = rows.iter().map(|r| r.prob.clone()).collect();
    let opts = EvalOptions {
        overlap: a.overlap,
        micro: a.micro,
    };
    let (mapping, mut report) = match &a.mapping {
        Some(p) => {
            rec.input(p);
            let mapping: TopicMapping = read_json(p)?;
            let report = score_mapped(&docs, &z1, &prob, &mapping, &opts)?;
            (mapping, report)
        }
        None => {
            let used = z1.iter().flatten().max().map_or(1, |&k| k + 1);
            let k = a.k.unwrap_or(used);
            if k < used {
                return Err(Failure::Input(format!(
                    "assignments use topic {} but --k is {k}",
                    used - 1
                )));
            }
            evaluate(&docs, &z1, &prob, k, &opts)?
        }
    };
    let mut extra = Vec::new();
    if let (Some(patch_path), Some(truth_path)) = (&a.patch, &a.truth) {
        rec.input(patch_path);
        rec.input(truth_path);
        let results: Vec<PatchResult> = read_lines(patch_path)?;
        let results = align(
            &ids,
            results,
            |r| &r.doc_id,
            &patch_path.display().to_string(),
        )?;
        let truth: Vec<TruthLine> = read_lines(truth_path)?;
        let truth = align(
            &ids,
            truth,
            |t| &t.doc_id,
            &truth_path.display().to_string(),
        )?;
        let forgotten: Vec<_> = truth.iter().map(|t| t.forgotten).collect();
        let calls: Vec<PatchCall> = results
            .iter()
            .map(|r| {
                r.chosen
                    .as_ref()
                    .map(|c| Ok((class_of(&mapping, c.k)?, c.t_s)))
                    .transpose()
            })
            .collect::<Outcome<_>>()?;
        report.pa_acc = Some(pa_acc(&calls, &forgotten)?);
        let (mut hits, mut ablated) = (0usize, 0usize);
        for (r, f) in results.iter().zip(&forgotten) {
            if let Some(f) = f {
                ablated += 1;
                let mut found = false;
                for h in &r.hypotheses {
                    found |= class_of(&mapping, h.k)? == f.class;
                }
                hits += usize::from(found);
            }
        }
        if ablated > 0 {
            extra.push(format!(
                "hypothesis_top3,overall,{}",
                hits as f64 / ablated as f64
            ));
        }
    }
    let mut lines: Vec<String> = report
        .rows()
        .into_iter()
        .map(|(m, c, v)| format!("{m},{c},{v}"))
        .collect();
    lines.extend(extra);
    write_csv(&a.out, "metric,class_or_overall,value", &lines)?;
    rec.output(&a.out);
    let mapping_path = sibling(&a.out, ".mapping.json");
    write_json(&mapping_path, &mapping)?;
    rec.output(&mapping_path);
    rec.finish(a, None, &sibling(&a.out, ".manifest.json"))
}

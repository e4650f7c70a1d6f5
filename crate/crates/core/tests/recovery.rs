use catm::eval::{evaluate, frame_acc, EvalOptions};
use catm::model::{generate, CatmConfig, Preset, SyntheticOptions, TrueParams};
use catm::sampler::{train, InferOptions, InferenceModel};

#[test]
fn train_recovers_separated_topics_and_inference_agrees() {
    let params = TrueParams::synthetic(&SyntheticOptions::new(5, 3), 7).unwrap();
    let (corpus, _) = generate(&params, 50, 60, 107).unwrap();
    let cfg = CatmConfig::new(5, 3)
        .with_preset(Preset::CatmAo)
        .with_seed(7);
    let out = train(&corpus, &cfg).unwrap();

    let docs: Vec<_> = corpus.docs.iter().collect();
    let z: Vec<Vec<usize>> = out.state.docs.iter().map(|d| d.z1.clone()).collect();
    let (_, rep) = evaluate(&docs, &z, &out.trace.prob, 5, &EvalOptions::default()).unwrap();
    assert!(rep.frame_acc >= 0.7, "frame acc {}", rep.frame_acc);

    let model = InferenceModel::from_checkpoint(&out.checkpoint).unwrap();
    let opts = InferOptions {
        seed: 3,
        ..InferOptions::default()
    };
    for d in [0, 17, 42] {
        let inf = model.infer_doc(&corpus.docs[d], &opts).unwrap();
        let acc = frame_acc(&inf.z1, &z[d]).unwrap();
        assert!(acc >= 0.9, "doc {d}: {acc}");
    }
}

mod common;

use catm::eval::{map_topics_flow, map_topics_lp};
use catm::model::DocGaps;
use catm::model::{
    estimate_prior_moments, estimate_reltime_moments, reltime_pdf, stick_breaking, CatmConfig,
    GlobalPrior, PairTime, RelTimeParams,
};
use catm::sampler::{mh_log_acceptance, DocState};
use common::{best_mapping, integrate, proportions, tiny_instance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn assert_close_rel(a: &[f64], b: &[f64], tol: f64) {
    for (x, y) in a.iter().zip(b) {
        let err = (x - y).abs() / y.abs().max(1e-300);
        assert!(err <= tol, "{a:?} vs {b:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gibbs_conditionals_match_enumeration(seed in any::<u64>()) {
        let tiny = tiny_instance(seed);
        let mut model = tiny.model();
        for (d, doc) in tiny.corpus.docs.iter().enumerate() {
            let gaps = DocGaps::new(&doc.timestamps());
            let mut st = tiny.docs[d].clone();
            for n in 0..doc.len() {
                let got = model.action_conditional(doc, &gaps, &mut st, n).unwrap();
                assert_close_rel(&got, &tiny.brute_conditional(d, n, true), 1e-9);
                let got = model.object_conditional(doc, &mut st, n).unwrap();
                assert_close_rel(&got, &tiny.brute_conditional(d, n, false), 1e-9);
            }
            prop_assert_eq!(&st, &tiny.docs[d]);
        }
    }

    #[test]
    fn mh_ratio_is_a_product_over_tokens(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..6);
        let p = rng.random_range(1..5);
        let n = rng.random_range(0..30);
        let z1: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let z2: Vec<usize> = (0..n).map(|_| rng.random_range(0..p)).collect();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..k + p - 2).map(|_| rng.random_range(-4.0..4.0)).collect()
        };
        let v = draw(&mut rng);
        let proposal = draw(&mut rng);
        let st = DocState::new(z1.clone(), z2.clone(), v.clone(), k, p).unwrap();
        let (old1, old2) = (proportions(&v[..k - 1]), proportions(&v[k - 1..]));
        let (new1, new2) = (proportions(&proposal[..k - 1]), proportions(&proposal[k - 1..]));
        let direct: f64 = z1.iter().map(|&z| (new1[z] / old1[z]).ln()).sum::<f64>()
            + z2.iter().map(|&z| (new2[z] / old2[z]).ln()).sum::<f64>();
        prop_assert!((mh_log_acceptance(&st, &proposal, k) - direct).abs() < 1e-9);
    }

    #[test]
    fn lp_mapping_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = rng.random_range(1..=4);
        let k = rng.random_range(c..=6);
        let m: Vec<Vec<f64>> = (0..k).map(|_| (0..c).map(|_| rng.random::<f64>()).collect()).collect();
        let (x, obj) = best_mapping(&m);
        let lp = map_topics_lp(&m).unwrap();
        prop_assert_eq!(&lp.topic_to_class, &x);
        prop_assert!((lp.objective - obj).abs() < 1e-12);
        let flow = map_topics_flow(&m).unwrap();
        prop_assert!((flow.objective - obj).abs() < 1e-9);
    }
}

#[test]
fn stick_breaking_sums_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wide = Normal::new(0.0, 5.0).unwrap();
    for _ in 0..10_000 {
        let len = rng.random_range(0..12);
        let v: Vec<f64> = (0..len).map(|_| wide.sample(&mut rng)).collect();
        let s: f64 = stick_breaking(&v).iter().sum();
        assert!((s - 1.0).abs() < 1e-12, "{v:?}: {s}");
    }
}

#[test]
fn reltime_densities_integrate_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let pair = PairTime {
            b: rng.random_range(0.0..=1.0),
            mean_pos: rng.random_range(-3.0..3.0),
            var_pos: rng.random_range(0.05..4.0),
            mean_neg: rng.random_range(-3.0..3.0),
            var_neg: rng.random_range(0.05..4.0),
            same_var: rng.random_range(0.05..4.0),
        };
        let params = RelTimeParams::uniform(1, pair);
        let cross = |t: f64| reltime_pdf(t, 0, 0, &params, false).unwrap();
        let same = |t: f64| reltime_pdf(t, 0, 0, &params, true).unwrap();
        let eps = 1e-12;
        let total =
            integrate(&cross, -1.0 + eps, -eps, 1e-9) + integrate(&cross, eps, 1.0 - eps, 1e-9);
        assert!((total - 1.0).abs() < 1e-6, "{pair:?}: {total}");
        let total = integrate(&same, -1.0 + eps, 1.0 - eps, 1e-9);
        assert!((total - 1.0).abs() < 1e-6, "{pair:?}: {total}");
    }
}

/// Draws a gap from a cross-segment density by inverting its transform.
fn sample_gap(p: &PairTime, rng: &mut ChaCha8Rng) -> f64 {
    let positive = rng.random_bool(p.b);
    let (mean, var) = if positive {
        (p.mean_pos, p.var_pos)
    } else {
        (p.mean_neg, p.var_neg)
    };
    let u = Normal::new(mean, var.sqrt()).unwrap().sample(rng);
    let t = 0.5 + u.atan() / std::f64::consts::PI;
    if positive {
        t
    } else {
        t - 1.0
    }
}

#[test]
fn reltime_moments_recover_pair_parameters() {
    // Two-clip documents, one clip per topic, so every gap is an
    // independent draw from the (0, 1) density.
    let truth = PairTime {
        b: 0.95,
        mean_pos: 0.4,
        var_pos: 0.1,
        mean_neg: -0.6,
        var_neg: 0.01,
        same_var: 1.0,
    };
    let mirror = PairTime {
        b: 1.0 - truth.b,
        mean_pos: -truth.mean_neg,
        var_pos: truth.var_neg,
        mean_neg: -truth.mean_pos,
        var_neg: truth.var_pos,
        same_var: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut z, mut ts) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let t = sample_gap(&truth, &mut rng);
        let (t0, t1) = (0.5 + t / 2.0, 0.5 - t / 2.0);
        if t0 < t1 {
            z.push(vec![0, 1]);
            ts.push(vec![t0, t1]);
        } else {
            z.push(vec![1, 0]);
            ts.push(vec![t1, t0]);
        }
    }
    let est = estimate_reltime_moments(&z, &ts, &CatmConfig::new(2, 1)).unwrap();
    for (got, want) in [(est.get(0, 1), truth), (est.get(1, 0), mirror)] {
        assert!((got.b - want.b).abs() <= 0.05, "{got:?}");
        assert!((got.mean_pos - want.mean_pos).abs() <= 0.1, "{got:?}");
        assert!((got.mean_neg - want.mean_neg).abs() <= 0.1, "{got:?}");
    }
}

#[test]
fn prior_moments_within_three_standard_errors() {
    let mu = vec![0.5, -1.0, 0.0, 2.0];
    let sigma = vec![
        vec![1.0, 0.3, 0.0, -0.2],
        vec![0.3, 0.5, 0.1, 0.0],
        vec![0.0, 0.1, 2.0, 0.4],
        vec![-0.2, 0.0, 0.4, 0.8],
    ];
    let prior = GlobalPrior {
        mu: mu.clone(),
        sigma: sigma.clone(),
    };
    let sampler = prior.sampler().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 10_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    let est = estimate_prior_moments(&draws, 0.0).unwrap();
    let n = n as f64;
    for i in 0..4 {
        assert!((est.mu[i] - mu[i]).abs() <= 3.0 * (sigma[i][i] / n).sqrt());
        for j in 0..4 {
            let se = ((sigma[i][i] * sigma[j][j] + sigma[i][j].powi(2)) / n).sqrt();
            assert!(
                (est.sigma[i][j] - sigma[i][j]).abs() <= 3.0 * se,
                "({i},{j})"
            );
        }
    }
}

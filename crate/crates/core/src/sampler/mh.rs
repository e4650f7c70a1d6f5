use rand::Rng;

use super::state::DocState;
use crate::model::{log_stick_breaking, PriorSampler};

/// `ln A(v*, v)` for replacing `st.v` by `proposal`: the ratio of the
/// assignment likelihoods, written with per-topic count exponents.
pub fn mh_log_acceptance(st: &DocState, proposal: &[f64], n_action: usize) -> f64 {
    let split = n_action - 1;
    let term = |counts: &[u32], new: &[f64], old: &[f64]| -> f64 {
        let (ln_new, ln_old) = (log_stick_breaking(new), log_stick_breaking(old));
        counts
            .iter()
            .zip(ln_new.iter().zip(&ln_old))
            .filter(|(&c, _)| c > 0)
            .map(|(&c, (a, b))| c as f64 * (a - b))
            .sum()
    };
    term(st.action_counts(), &proposal[..split], &st.v[..split])
        + term(st.object_counts(), &proposal[split..], &st.v[split..])
}

/// One independence-sampler update of the document's prior vector, with
/// the proposal drawn from the global prior. Returns whether it moved.
pub fn mh_update_priors<R: Rng + ?Sized>(
    st: &mut DocState,
    prior: &PriorSampler,
    n_action: usize,
    rng: &mut R,
) -> bool {
    let proposal = prior.sample(rng);
    let log_a = mh_log_acceptance(st, &proposal, n_action);
    let u: f64 = rng.random();
    if log_a >= 0.0 || u.ln() < log_a {
        st.v = proposal;
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_always_accepts() {
        let st = DocState::new(vec![], vec![], vec![0.3, -1.0, 2.0], 3, 2).unwrap();
        assert_eq!(mh_log_acceptance(&st, &[5.0, 5.0, -5.0], 3), 0.0);
    }

    #[test]
    fn single_clip_is_one_factor() {
        let v = vec![0.2, -0.4];
        let w = vec![1.5, 0.3];
        let st = DocState::new(vec![1], vec![0], v.clone(), 3, 1).unwrap();
        let expected =
            (crate::model::stick_breaking(&w)[1] / crate::model::stick_breaking(&v)[1]).ln();
        assert!((mh_log_acceptance(&st, &w, 3) - expected).abs() < 1e-12);
    }
}

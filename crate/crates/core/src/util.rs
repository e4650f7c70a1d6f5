//! Small numeric helpers shared by the sampler and the generator.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Index drawn with probability proportional to `weights` (non-negative,
/// not all zero).
pub(crate) fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Normalizes log weights in place into probabilities and returns the
/// log normalizer. Returns `None` if every weight is `-inf` or NaN.
pub(crate) fn normalize_log(weights: &mut [f64]) -> Option<f64> {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut sum = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        sum += *w;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    Some(max + sum.ln())
}

/// Draws from a symmetric Dirichlet. Small concentrations are sampled in log
/// space so the draw never collapses to all zeros.
pub(crate) fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: f64, dim: usize) -> Vec<f64> {
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    let gamma = Gamma::new(alpha + 1.0, 1.0).expect("positive shape");
    let mut logs: Vec<f64> = (0..dim)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.ln() + u.ln() / alpha
        })
        .collect();
    normalize_log(&mut logs).expect("finite log weights");
    logs
}

/// FNV-1a, used to derive stable per-document seeds.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalize_handles_large_magnitudes() {
        let mut w = vec![-1e6, -1e6 + 2f64.ln()];
        let z = normalize_log(&mut w).unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((z - (-1e6 + 3f64.ln())).abs() < 1e-6);
        assert!(normalize_log(&mut [f64::NEG_INFINITY; 3]).is_none());
    }

    #[test]
    fn sparse_dirichlet_is_a_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let d = sample_dirichlet(&mut rng, 0.01, 100);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut sorted = d.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            assert!(sorted[..10].iter().sum::<f64>() > 0.9);
        }
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(sample_categorical(&mut rng, &[0.0, 1.0, 0.0]), 1);
        }
    }
}

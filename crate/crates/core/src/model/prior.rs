//! Logistic-normal prior over the packed stick-breaking vector.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CatmError, Result};

/// `N(mu, sigma)` over `v = [v_action (K-1), v_object (P-1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPrior {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl GlobalPrior {
    pub fn standard(dim: usize) -> Self {
        GlobalPrior {
            mu: vec![0.0; dim],
            sigma: (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn sigma_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.sigma[i][j])
    }

    /// Lower Cholesky factor, failing if `sigma` is not positive definite.
    pub fn sampler(&self) -> Result<PriorSampler> {
        let d = self.dim();
        if self.sigma.len() != d || self.sigma.iter().any(|r| r.len() != d) {
            return Err(CatmError::InvalidInput(
                "prior covariance shape does not match its mean".into(),
            ));
        }
        let chol = self.sigma_matrix().cholesky().ok_or_else(|| {
            CatmError::InvalidInput("prior covariance is not positive definite".into())
        })?;
        Ok(PriorSampler {
            mu: DVector::from_column_slice(&self.mu),
            lower: chol.l(),
        })
    }
}

/// Draws from a fixed multivariate normal.
#[derive(Debug, Clone)]
pub struct PriorSampler {
    mu: DVector<f64>,
    lower: DMatrix<f64>,
}

impl PriorSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.mu.len();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mu + &self.lower * z).iter().copied().collect()
    }
}

/// Method-of-moments fit: sample mean and unbiased sample covariance plus
/// `ridge` on the diagonal.
pub fn estimate_prior_moments(vectors: &[Vec<f64>], ridge: f64) -> Result<GlobalPrior> {
    if vectors.len() < 2 {
        return Err(CatmError::InvalidInput(
            "prior moments need at least two documents".into(),
        ));
    }
    let d = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(CatmError::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    let n = vectors.len() as f64;
    let mut mu = vec![0.0; d];
    for v in vectors {
        for (m, x) in mu.iter_mut().zip(v) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut sigma = vec![vec![0.0; d]; d];
    for v in vectors {
        for i in 0..d {
            let di = v[i] - mu[i];
            for j in i..d {
                sigma[i][j] += di * (v[j] - mu[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let c = sigma[i][j] / (n - 1.0);
            sigma[i][j] = c;
            sigma[j][i] = c;
        }
        sigma[i][i] += ridge;
    }
    Ok(GlobalPrior { mu, sigma })
}

/// Ridge used during training: `scale` times the mean variance, with the
/// mean variance floored at 1 so identical inputs still give an SPD matrix.
pub fn training_ridge(prior: &GlobalPrior, scale: f64) -> f64 {
    let d = prior.dim().max(1) as f64;
    let trace: f64 = (0..prior.dim()).map(|i| prior.sigma[i][i]).sum();
    scale * (trace / d).max(1.0)
}

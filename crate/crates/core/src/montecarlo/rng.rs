use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{linalg, CanonicalModel, TrueParameters};

/// Replicate indices occupy the low 40 bits of the stream id.
pub const MAX_REPLICATES: usize = 1 << 40;

/// Independent stream for `(seed, group, replicate)`.
pub fn replicate_rng(seed: u64, group: usize, replicate: usize) -> ChaCha8Rng {
    debug_assert!(replicate < MAX_REPLICATES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((group as u64) << 40) | replicate as u64);
    rng
}

/// Draws canonical models for fixed `V_i`, `n` and `sigma^2`.
///
/// Per draw the stream is consumed as `k * p` normals for the `X_i`
/// (population-major) followed by `n` normals whose sum of squares is `S`.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    v: Vec<DMatrix<f64>>,
    chol: Vec<DMatrix<f64>>,
    n: usize,
    sigma: f64,
}

impl ModelSampler {
    pub fn new(v: &[DMatrix<f64>], n: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain("sigma2 must be positive"));
        }
        let chol = v
            .iter()
            .enumerate()
            .map(|(i, vi)| linalg::cholesky_lower(vi, &format!("V_{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            v: v.to_vec(),
            chol,
            n,
            sigma: sigma2.sqrt(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, mu: &[DVector<f64>], rng: &mut R) -> CanonicalModel {
        let x = mu
            .iter()
            .zip(&self.chol)
            .map(|(m, l)| {
                let z = DVector::from_fn(m.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                m + l * z * self.sigma
            })
            .collect();
        let chi2: f64 = (0..self.n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * z
            })
            .sum();
        CanonicalModel::new(x, self.v.clone(), self.sigma * self.sigma * chi2, self.n)
    }
}

/// One draw of `(X_1..X_k, S)` from the model with parameters `truth`.
pub fn sample_canonical<R: Rng + ?Sized>(
    truth: &TrueParameters,
    v: &[DMatrix<f64>],
    n: usize,
    rng: &mut R,
) -> Result<CanonicalModel> {
    if v.len() != truth.k() || v.iter().any(|m| m.shape() != (truth.p(), truth.p())) {
        return Err(Error::Dimension("V matrices do not match the true means".into()));
    }
    Ok(ModelSampler::new(v, n, truth.sigma2)?.sample(&truth.mu, rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_is_bit_identical() {
        let truth = TrueParameters::new(vec![DVector::from_element(3, 1.0); 2], 2.0).unwrap();
        let v = vec![DMatrix::identity(3, 3) * 0.5; 2];
        let a = sample_canonical(&truth, &v, 7, &mut replicate_rng(9, 1, 42)).unwrap();
        let b = sample_canonical(&truth, &v, 7, &mut replicate_rng(9, 1, 42)).unwrap();
        let c = sample_canonical(&truth, &v, 7, &mut replicate_rng(9, 1, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, sample_canonical(&truth, &v, 7, &mut replicate_rng(9, 2, 42)).unwrap());
    }

    #[test]
    fn rejects_non_spd_covariance() {
        let truth = TrueParameters::new(vec![DVector::zeros(2); 2], 1.0).unwrap();
        let v = vec![DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])];
        assert!(matches!(
            sample_canonical(&truth, &v, 3, &mut replicate_rng(0, 0, 0)),
            Err(Error::NotSpd(_))
        ));
    }
}

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{replicate_rng, ModelSampler};
use super::{mean_se, ExperimentConfig, DEFAULT_SEED, MAX_REPLICATES};
use crate::error::{Error, Result};
use crate::estimators::{estimate_general, ShrinkageFunctions};
use crate::model::{LossGeometry, PooledSummary, TrueParameters};
use crate::risk::{loss_unchecked, uer, UerInputs};

/// UER against realized loss at one truth point.
#[derive(Debug, Clone, PartialEq)]
pub struct UerPoint {
    pub index: usize,
    pub mean_uer: f64,
    pub mean_loss: f64,
    /// Standard error of the paired difference `uer - loss`.
    pub se_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UerReport {
    pub label: String,
    pub points: Vec<UerPoint>,
    pub passed: bool,
}

/// Checks `E[UER] = E[loss]` for the class member `sf` at every truth in `points`.
///
/// Uses `V`, `Q`, `n`, the seed, the replicate count and the worker pool of
/// `cfg`; passes at a point when the mean paired difference is within three
/// standard errors of zero.
pub fn validate_uer(cfg: &ExperimentConfig, sf: &ShrinkageFunctions, points: &[TrueParameters]) -> Result<UerReport> {
    cfg.validate()?;
    let v = cfg.v_matrices()?;
    let ls = cfg.loss_spec(&v)?;
    let geometry = Arc::new(LossGeometry::with_tolerances(&v, &ls, &cfg.tolerances)?);
    let pool = cfg.thread_pool()?;
    let (p, k, n) = (cfg.p, cfg.k, cfg.n);
    let mut out = Vec::with_capacity(points.len());
    for (idx, truth) in points.iter().enumerate() {
        if truth.k() != k || truth.p() != p {
            return Err(Error::Dimension(format!("truth point {idx} is not {k} vectors of length {p}")));
        }
        let sampler = ModelSampler::new(&v, n, truth.sigma2)?;
        let pairs: Vec<(f64, f64)> = pool.install(|| {
            (0..cfg.replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(cfg.seed, idx, r);
                    let m = sampler.sample(&truth.mu, &mut rng);
                    let ps = PooledSummary::from_geometry(&m, Arc::clone(&geometry))?;
                    let est = estimate_general(&m, &ls, &ps, sf)?;
                    let l = loss_unchecked(&est.mu_hat, &truth.mu, &ls.q, truth.sigma2);
                    let u = uer(&UerInputs::from_functions(sf, ps.f, ps.g, m.s, p, k, n, geometry.trace_sum));
                    if !u.is_finite() {
                        return Err(Error::domain(format!("{}: UER not finite at F = {}, G = {}", sf.label, ps.f, ps.g)));
                    }
                    Ok((u, l))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let uers: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let losses: Vec<f64> = pairs.iter().map(|x| x.1).collect();
        let diffs: Vec<f64> = pairs.iter().map(|x| x.0 - x.1).collect();
        let (mean_uer, _) = mean_se(&uers);
        let (mean_loss, _) = mean_se(&losses);
        let (mean_diff, se_diff) = mean_se(&diffs);
        out.push(UerPoint {
            index: idx,
            mean_uer,
            mean_loss,
            se_diff,
            passed: mean_diff.abs() <= 3.0 * se_diff,
        });
    }
    Ok(UerReport {
        label: sf.label.clone(),
        passed: out.iter().all(|p| p.passed),
        points: out,
    })
}

/// Setting of the Gaussian and chi-square identity checks: `Y ~ N_p(mu, sigma^2 I)`
/// and `S ~ sigma^2 chi^2_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub mu: Vec<f64>,
    pub sigma2: f64,
    pub n: usize,
    pub draws: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            mu: vec![1.0; 5],
            sigma2: 2.0,
            n: 20,
            draws: 100_000,
            seed: DEFAULT_SEED,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

const IDENTITY_NAMES: [&str; 4] = [
    "stein h(Y)=Y",
    "stein h(Y)=Y/(1+|Y|^2)",
    "chi-square g(S)=1",
    "chi-square g(S)=1/(1+S)",
];

/// Monte Carlo check of `E[(Y-mu)'h(Y)] = sigma^2 E[div h(Y)]` and
/// `E[S g(S)] = sigma^2 E[n g(S) + 2 S g'(S)]` for two test functions each.
pub fn validate_identities(cfg: &IdentityConfig) -> Result<IdentityReport> {
    if cfg.draws == 0 || cfg.draws > MAX_REPLICATES || cfg.mu.is_empty() || cfg.n == 0 {
        return Err(Error::domain("identity check needs draws >= 1, p >= 1 and n >= 1"));
    }
    if !(cfg.sigma2 > 0.0 && cfg.sigma2.is_finite()) {
        return Err(Error::domain("sigma2 must be positive"));
    }
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        b = b.num_threads(t);
    }
    let pool = b.build().map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))?;
    let mu = DVector::from_vec(cfg.mu.clone());
    let p = mu.len() as f64;
    let (sigma2, n) = (cfg.sigma2, cfg.n as f64);
    let sigma = sigma2.sqrt();

    let draws: Vec<[f64; 8]> = pool.install(|| {
        (0..cfg.draws)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(cfg.seed, 0, i);
                let z = DVector::from_fn(mu.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &mu + z * sigma;
                let s = sigma2 * (0..cfg.n).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>();
                let dev = &y - &mu;
                let r2 = y.norm_squared();
                let g = 1.0 / (1.0 + s);
                [
                    dev.dot(&y),
                    sigma2 * p,
                    dev.dot(&y) / (1.0 + r2),
                    sigma2 * (p / (1.0 + r2) - 2.0 * r2 / ((1.0 + r2) * (1.0 + r2))),
                    s,
                    sigma2 * n,
                    s * g,
                    sigma2 * (n * g - 2.0 * s * g * g),
                ]
            })
            .collect()
    });

    let checks: Vec<IdentityCheck> = IDENTITY_NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let lhs: Vec<f64> = draws.iter().map(|d| d[2 * j]).collect();
            let rhs: Vec<f64> = draws.iter().map(|d| d[2 * j + 1]).collect();
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            let (mean_diff, se_diff) = mean_se(&diff);
            IdentityCheck {
                name: name.to_string(),
                lhs: mean_se(&lhs).0,
                rhs: mean_se(&rhs).0,
                se_diff,
                passed: mean_diff.abs() <= 3.0 * se_diff,
            }
        })
        .collect();
    Ok(IdentityReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

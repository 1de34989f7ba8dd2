use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use super::rng::{replicate_rng, ModelSampler};
use super::table::{RiskRow, RiskTable};
use super::{mean_se, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimators::{check_preconditions, estimate, EstimatorKind};
use crate::model::{CanonicalModel, LossGeometry, PooledSummary};
use crate::risk::{loss_unchecked, prial};

/// Per-replicate losses under common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSamples {
    pub configs: Vec<String>,
    /// Estimators that passed their preconditions, in requested order.
    pub estimators: Vec<EstimatorKind>,
    /// `losses[config][estimator][replicate]`.
    pub losses: Vec<Vec<Vec<f64>>>,
    pub skipped: BTreeMap<String, String>,
    pub risk_unbiased: f64,
}

impl LossSamples {
    pub fn of(&self, config: usize, kind: EstimatorKind) -> Option<&[f64]> {
        let j = self.estimators.iter().position(|&e| e == kind)?;
        Some(&self.losses[config][j])
    }
}

/// Draws `cfg.replicates` models per mean configuration and records the loss
/// of every estimator in `kinds` on each draw.
pub fn simulate_losses(cfg: &ExperimentConfig, kinds: &[EstimatorKind]) -> Result<LossSamples> {
    cfg.validate()?;
    let v = cfg.v_matrices()?;
    let ls = cfg.loss_spec(&v)?;
    let geometry = Arc::new(LossGeometry::with_tolerances(&v, &ls, &cfg.tolerances)?);
    let sampler = ModelSampler::new(&v, cfg.n, cfg.sigma2)?;
    let truths = cfg.truths()?;

    // preconditions depend on (p, k, n, V, Q, hyperparameters) only
    let probe = CanonicalModel::new(vec![DVector::zeros(cfg.p); cfg.k], v.clone(), 1.0, cfg.n);
    let probe_ps = PooledSummary::from_geometry(&probe, Arc::clone(&geometry))?;
    let mut active = Vec::new();
    let mut skipped = BTreeMap::new();
    for &kind in kinds {
        if active.contains(&kind) || skipped.contains_key(kind.name()) {
            continue;
        }
        match check_preconditions(kind, &probe, &probe_ps, &cfg.hyper) {
            Ok(()) => active.push(kind),
            Err(e) => {
                skipped.insert(kind.name().to_string(), e.to_string());
            }
        }
    }

    let pool = cfg.thread_pool()?;
    let mut losses = Vec::with_capacity(truths.len());
    for (ci, truth) in truths.iter().enumerate() {
        let per_replicate: Vec<Vec<f64>> = pool.install(|| {
            (0..cfg.replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(cfg.seed, ci, r);
                    let m = sampler.sample(&truth.mu, &mut rng);
                    let ps = PooledSummary::from_geometry(&m, Arc::clone(&geometry))?;
                    active
                        .iter()
                        .map(|&kind| {
                            let est = estimate(kind, &m, &ls, &ps, &cfg.hyper)?;
                            Ok(loss_unchecked(&est.mu_hat, &truth.mu, &ls.q, truth.sigma2))
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let by_estimator = (0..active.len())
            .map(|j| per_replicate.iter().map(|row| row[j]).collect())
            .collect();
        losses.push(by_estimator);
    }
    Ok(LossSamples {
        configs: cfg.mean_configs.iter().map(|m| m.name.clone()).collect(),
        estimators: active,
        losses,
        skipped,
        risk_unbiased: geometry.trace_sum,
    })
}

/// Monte Carlo risk table of `cfg.estimators` over `cfg.mean_configs`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskTable> {
    let samples = simulate_losses(cfg, &cfg.estimators)?;
    let mut rows = Vec::new();
    for (ci, name) in samples.configs.iter().enumerate() {
        for (j, &kind) in samples.estimators.iter().enumerate() {
            let (risk, se) = mean_se(&samples.losses[ci][j]);
            rows.push(RiskRow {
                config: name.clone(),
                estimator: kind,
                risk,
                se,
                prial: prial(samples.risk_unbiased, risk)?,
            });
        }
    }
    Ok(RiskTable {
        rows,
        configs: samples.configs,
        estimators: samples.estimators,
        replicates: cfg.replicates,
        seed: cfg.seed,
        risk_unbiased: samples.risk_unbiased,
        skipped: samples.skipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationRow {
    pub config: String,
    /// Mean of `loss(a) - loss(b)` over paired draws.
    pub mean_diff: f64,
    pub se_diff: f64,
    /// `mean_diff >= -3 se_diff`: `b` is not significantly worse than `a`.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub a: EstimatorKind,
    pub b: EstimatorKind,
    pub rows: Vec<DominationRow>,
    /// Every row is ok.
    pub dominated: bool,
}

/// Paired comparison of `a` against `b` on identical draws.
pub fn paired_domination(cfg: &ExperimentConfig, a: EstimatorKind, b: EstimatorKind) -> Result<DominationReport> {
    let samples = simulate_losses(cfg, &[a, b])?;
    if let Some((name, why)) = samples.skipped.iter().next() {
        return Err(Error::precondition(format!("{name}: {why}")));
    }
    let mut rows = Vec::new();
    for (ci, name) in samples.configs.iter().enumerate() {
        let la = samples.of(ci, a).expect("active estimator");
        let lb = samples.of(ci, b).expect("active estimator");
        let diff: Vec<f64> = la.iter().zip(lb).map(|(x, y)| x - y).collect();
        let (mean_diff, se_diff) = mean_se(&diff);
        rows.push(DominationRow {
            config: name.clone(),
            mean_diff,
            se_diff,
            ok: mean_diff >= -3.0 * se_diff,
        });
    }
    Ok(DominationReport {
        a,
        b,
        dominated: rows.iter().all(|r| r.ok),
        rows,
    })
}

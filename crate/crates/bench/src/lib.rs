//! Fixtures shared by the benchmarks: the reference study's geometry and a
//! fixed set of draws from it.

use std::sync::Arc;

use kshrink_core::model::{LossGeometry, PooledSummary};
use kshrink_core::montecarlo::{replicate_rng, ModelSampler};
use kshrink_core::{CanonicalModel, ExperimentConfig, LossSpec, TrueParameters};

/// One reference setting with `draws` pre-sampled models.
pub struct Fixture {
    pub cfg: ExperimentConfig,
    pub loss: LossSpec,
    pub geometry: Arc<LossGeometry>,
    pub truth: TrueParameters,
    pub models: Vec<CanonicalModel>,
    pub summaries: Vec<PooledSummary>,
}

impl Fixture {
    /// Draws from mean configuration `config` of the reference study.
    pub fn reference(config: usize, draws: usize) -> Self {
        let cfg = ExperimentConfig::reference();
        let v = cfg.v_matrices().expect("reference V");
        let loss = cfg.loss_spec(&v).expect("reference Q");
        let geometry = Arc::new(LossGeometry::new(&v, &loss).expect("reference geometry"));
        let truth = cfg.truths().expect("reference truths").swap_remove(config);
        let sampler = ModelSampler::new(&v, cfg.n, truth.sigma2).expect("sampler");
        let models: Vec<_> = (0..draws)
            .map(|r| sampler.sample(&truth.mu, &mut replicate_rng(cfg.seed, config, r)))
            .collect();
        let summaries = models
            .iter()
            .map(|m| PooledSummary::from_geometry(m, Arc::clone(&geometry)).expect("pooled summary"))
            .collect();
        Self { cfg, loss, geometry, truth, models, summaries }
    }
}

/// `n_points` values spread log-uniformly over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n_points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n_points)
        .map(|i| (a + (b - a) * i as f64 / (n_points.max(2) - 1) as f64).exp())
        .collect()
}

//! TOML configuration file. Every section is optional; unknown keys are errors.

use std::path::Path;

use kshrink_core::estimators::EstimatorKind;
use kshrink_core::montecarlo::IdentityConfig;
use kshrink_core::{ExperimentConfig, Hyperparameters, MatrixSpec, QSpec};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Used by `simulate` and as the UER setting of `validate`.
    pub experiment: Option<ExperimentConfig>,
    pub estimate: Option<EstimateSection>,
    /// Hyperparameters for `estimate`.
    pub hyper: Option<Hyperparameters>,
    pub conditions: Option<ConditionsSection>,
    pub identities: Option<IdentityConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// One file: group label then p value columns per row.
    #[default]
    Ksample,
    /// One file per group: response then p covariate columns per row.
    Regression,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    pub format: DataFormat,
    /// Known `V_{i,0}` of the k-sample reduction: one entry for all groups or one per group.
    pub v0: Vec<MatrixSpec>,
    pub q: QSpec,
    pub estimators: Vec<EstimatorKind>,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            format: DataFormat::Ksample,
            v0: vec![MatrixSpec::identity()],
            q: QSpec::InverseOfV,
            estimators: EstimatorKind::SHRINKAGE.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: usize,
    pub k: usize,
    pub n: usize,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        let h = Hyperparameters::default();
        Self { a: h.a, b: h.b, c: h.c, p: 5, k: 5, n: 20 }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{HawkesModel, Method};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::marks::MarkDistribution;
use crate::stats::{DebiasRule, FunctionalTag, SurrogateEstimator};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Wasserstein,
    SmoothSurrogate,
}

/// How replications at different horizons relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonDesign {
    /// Replication `i` is one path to the largest horizon, observed at every
    /// horizon. Errors become positively correlated across horizons, which
    /// steadies the fitted slope.
    #[default]
    Nested,
    /// Fresh paths at every horizon.
    Independent,
}

/// One rate experiment plus the verification suite settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub kernel: Kernel,
    pub mu: f64,
    pub marks: MarkDistribution,
    pub horizons: Vec<f64>,
    pub replications: u64,
    #[serde(default = "default_debias")]
    pub debias_replicates: usize,
    pub seed: u64,
    pub functional: FunctionalTag,
    pub distance: DistanceKind,
    #[serde(default)]
    pub debias_rule: DebiasRule,
    #[serde(default)]
    pub surrogate_estimator: SurrogateEstimator,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub horizon_design: HorizonDesign,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Also write every normalized sample as `sample_<k>.csv`.
    #[serde(default)]
    pub write_samples: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifySuiteConfig,
}

fn default_debias() -> usize {
    64
}
fn default_method() -> Method {
    Method::Thinning
}
fn default_bootstrap() -> usize {
    crate::stats::DEFAULT_BOOTSTRAP
}

/// Sizes of the verification checks; defaults finish in well under a minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySuiteConfig {
    pub controls: bool,
    pub ibp_horizon: f64,
    pub ibp_replications: u64,
    pub positivity_horizon: f64,
    pub positivity_grid: Vec<f64>,
    pub positivity_replications: u64,
    pub offspring_horizon: f64,
    pub offspring_strata: usize,
    pub offspring_replications: u64,
    pub martingale_horizon: f64,
    pub martingale_checkpoints: Vec<f64>,
    pub martingale_replications: u64,
    pub remainder_horizons: Vec<f64>,
    pub remainder_replications: u64,
    pub third_moment_horizons: Vec<f64>,
    pub third_moment_strata: usize,
    pub third_moment_replications: u64,
}

impl Default for VerifySuiteConfig {
    fn default() -> Self {
        VerifySuiteConfig {
            controls: false,
            ibp_horizon: 10.0,
            ibp_replications: 20_000,
            positivity_horizon: 20.0,
            positivity_grid: vec![1.0, 5.0, 10.0, 15.0],
            positivity_replications: 2_000,
            offspring_horizon: 20.0,
            offspring_strata: 5,
            offspring_replications: 2_000,
            martingale_horizon: 10.0,
            martingale_checkpoints: vec![2.0, 5.0, 10.0],
            martingale_replications: 10_000,
            remainder_horizons: vec![50.0, 100.0, 200.0, 400.0],
            remainder_replications: 4_000,
            third_moment_horizons: vec![25.0, 100.0, 400.0],
            third_moment_strata: 2,
            third_moment_replications: 20_000,
        }
    }
}

impl ExperimentConfig {
    /// Exponential(1, 2) kernel, `μ = 1`, unit marks, `F_T`, `W₁`.
    pub fn reference() -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            kernel: Kernel::exponential(1.0, 2.0),
            mu: 1.0,
            marks: MarkDistribution::dirac(1.0),
            horizons: vec![50.0, 100.0, 200.0, 400.0, 800.0],
            replications: 20_000,
            debias_replicates: 64,
            seed: 20_240_601,
            functional: FunctionalTag::Compensated,
            distance: DistanceKind::Wasserstein,
            debias_rule: DebiasRule::default(),
            surrogate_estimator: SurrogateEstimator::default(),
            method: Method::Thinning,
            horizon_design: HorizonDesign::Nested,
            bootstrap: default_bootstrap(),
            write_samples: false,
            output: None,
            verify: VerifySuiteConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks the schema, the horizon grid and the sample sizes, then
    /// builds the model (which runs the stability check).
    pub fn validate(&self) -> Result<HawkesModel> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.horizons.is_empty() {
            return Err(Error::Config("no horizons".into()));
        }
        if self.horizons.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config(format!("horizons {:?} must be positive", self.horizons)));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "horizons {:?} must be strictly increasing",
                self.horizons
            )));
        }
        if self.replications < 100 {
            return Err(Error::Config(format!(
                "{} replications is below the minimum of 100",
                self.replications
            )));
        }
        if self.distance == DistanceKind::Wasserstein && self.debias_replicates < 2 {
            return Err(Error::Config("debiasing needs at least 2 replicates".into()));
        }
        self.model()
    }

    pub fn model(&self) -> Result<HawkesModel> {
        HawkesModel::new(self.kernel.clone(), self.mu, self.marks.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut c = ExperimentConfig::reference();
        c.kernel = Kernel::tabulated(0.1, vec![0.3, 0.2, 0.1, 0.0]);
        c.marks = MarkDistribution::Discrete {
            values: vec![-1.0, 0.5, 2.0],
            probabilities: vec![0.2, 0.5, 0.3],
        };
        c.output = Some(PathBuf::from("runs/x"));
        c.verify.controls = true;
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut v = serde_json::to_value(ExperimentConfig::reference()).unwrap();
        v["alpha"] = serde_json::json!(1.0);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut w = serde_json::to_value(ExperimentConfig::reference()).unwrap();
        w["kernel"]["alhpa"] = serde_json::json!(1.0);
        assert!(ExperimentConfig::from_json(&w.to_string()).is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        let mut c = ExperimentConfig::reference();
        c.horizons = vec![50.0, 50.0, 100.0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::reference();
        c.replications = 99;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::reference();
        c.schema = 2;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::reference();
        c.kernel = Kernel::exponential(2.0, 2.0);
        assert!(matches!(c.validate(), Err(Error::Stability(_))));
    }

    #[test]
    fn defaults_fill_optional_fields() {
        let text = r#"{
            "schema": 1,
            "kernel": {"family": "zero"},
            "mu": 1.0,
            "marks": {"family": "rademacher"},
            "horizons": [10, 20, 40],
            "replications": 200,
            "seed": 3,
            "functional": "raw",
            "distance": "smooth_surrogate"
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.debias_replicates, 64);
        assert_eq!(c.method, Method::Thinning);
        assert_eq!(c.surrogate_estimator, SurrogateEstimator::Conditional);
        assert_eq!(c.verify, VerifySuiteConfig::default());
    }
}

use serde::{Deserialize, Serialize};

use crate::engine::PathResult;
use crate::error::{Error, Result};
use crate::theory::AsymptoticParams;

/// Which centering turns `S_T` into a near-Gaussian functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionalTag {
    /// `F_T = (S_T − m Λ_T)/√T`, compensator centering.
    #[serde(rename = "F")]
    Compensated,
    /// `Γ_T = (S_T − ϖT)/√T`, drift centering.
    #[serde(rename = "Gamma")]
    Drift,
    /// `V_T = (S_T − m ∫₀^T E[λ_s] ds)/√T`, mean-count centering.
    #[serde(rename = "V")]
    MeanCount,
    /// `S_T/√T`.
    #[serde(rename = "raw")]
    Raw,
}

impl FunctionalTag {
    pub fn label(&self) -> &'static str {
        match self {
            FunctionalTag::Compensated => "F",
            FunctionalTag::Drift => "Gamma",
            FunctionalTag::MeanCount => "V",
            FunctionalTag::Raw => "raw",
        }
    }

    /// Variance of the Gaussian limit.
    pub fn limit_variance(&self, params: &AsymptoticParams) -> f64 {
        match self {
            FunctionalTag::Drift | FunctionalTag::MeanCount => params.zeta2,
            FunctionalTag::Compensated | FunctionalTag::Raw => params.gamma2,
        }
    }
}

/// Maps a path at horizon `T` to its normalized functional.
#[derive(Debug, Clone)]
pub struct Normalizer {
    pub tag: FunctionalTag,
    pub horizon: f64,
    mean_mark: f64,
    constant_center: f64,
}

impl Normalizer {
    /// `expected_count` is `∫₀^T E[λ_s] ds`, required only for [`FunctionalTag::MeanCount`].
    pub fn new(
        tag: FunctionalTag,
        params: &AsymptoticParams,
        horizon: f64,
        expected_count: Option<f64>,
    ) -> Result<Self> {
        let constant_center = match tag {
            FunctionalTag::Compensated | FunctionalTag::Raw => 0.0,
            FunctionalTag::Drift => params.varpi * horizon,
            FunctionalTag::MeanCount => {
                let count = expected_count.ok_or_else(|| {
                    Error::Config("V_T needs the expected count ∫E[λ]".into())
                })?;
                params.m * count
            }
        };
        Ok(Normalizer {
            tag,
            horizon,
            mean_mark: params.m,
            constant_center,
        })
    }

    /// The quantity subtracted from `S_T`.
    pub fn center(&self, path: &PathResult) -> f64 {
        match self.tag {
            FunctionalTag::Compensated => self.mean_mark * path.compensator,
            _ => self.constant_center,
        }
    }

    pub fn apply(&self, path: &PathResult) -> f64 {
        (path.sum - self.center(path)) / self.horizon.sqrt()
    }
}

/// One-shot form of [`Normalizer::apply`].
pub fn normalize(
    path: &PathResult,
    tag: FunctionalTag,
    params: &AsymptoticParams,
    horizon: f64,
    expected_count: Option<f64>,
) -> Result<f64> {
    Ok(Normalizer::new(tag, params, horizon, expected_count)?.apply(path))
}

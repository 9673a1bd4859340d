//! Normalized functionals, distances to the Gaussian limit, cumulants and
//! rate fits.

pub mod cumulants;
pub mod gaussian;
pub mod normalize;
pub mod ratefit;
pub mod surrogate;
pub mod wasserstein;

pub use cumulants::{k_cumulants, k_statistics, CumulantEstimates, DEFAULT_BOOTSTRAP};
pub use normalize::{normalize, FunctionalTag, Normalizer};
pub use ratefit::{fit_rate, RateFit};
pub use surrogate::{
    smooth_distance_surrogate, smooth_distance_surrogate_conditional, ConditionalSample, Dictionary,
    DictionaryElement, SurrogateEstimator,
};
pub use wasserstein::{w1_sorted, w1_to_normal, wasserstein1_to_normal, Debias, DebiasRule, DistanceEstimate};

use crate::error::{Error, Result};

/// `M` replications of one normalized functional at horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub horizon: f64,
    pub tag: FunctionalTag,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(horizon: f64, tag: FunctionalTag, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Estimation(format!("sample of size {} is too small", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Estimation(format!("sample contains non-finite value {bad}")));
        }
        Ok(Sample { horizon, tag, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

use rand::Rng;
use serde::Serialize;

use super::Sample;
use crate::error::{Error, Result};
use crate::parallel::map_replications;
use crate::rng::{domain, stream};

pub const DEFAULT_BOOTSTRAP: usize = 200;

/// Unbiased k-statistics `k₁..k₄` with bootstrap standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CumulantEstimates {
    pub n: usize,
    pub k: [f64; 4],
    pub se: [f64; 4],
}

impl CumulantEstimates {
    pub fn mean(&self) -> f64 {
        self.k[0]
    }
    pub fn variance(&self) -> f64 {
        self.k[1]
    }
}

/// `[k₁, k₂, k₃, k₄]` of a sample of size at least 4.
pub fn k_statistics(values: &[f64]) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let k2 = s2 / (n - 1.0);
    let k3 = n * s3 / ((n - 1.0) * (n - 2.0));
    let k4 = (n * (n + 1.0) * s4 - 3.0 * (n - 1.0) * s2 * s2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    [mean, k2, k3, k4]
}

/// k-statistics of the sample plus the spread of `resamples` bootstrap copies.
pub fn k_cumulants(sample: &Sample, resamples: usize, seed: u64) -> Result<CumulantEstimates> {
    let values = &sample.values;
    let n = values.len();
    if n < 10 {
        return Err(Error::Estimation(format!("k-statistics need at least 10 values, got {n}")));
    }
    let k = k_statistics(values);
    let boots = map_replications(resamples as u64, |b| {
        let mut rng = stream(seed, &[domain::BOOTSTRAP, n as u64], b);
        let resample: Vec<f64> = (0..n).map(|_| values[rng.random_range(0..n)]).collect();
        k_statistics(&resample)
    });
    let mut se = [f64::NAN; 4];
    if resamples > 1 {
        for (j, slot) in se.iter_mut().enumerate() {
            let mean = boots.iter().map(|b| b[j]).sum::<f64>() / resamples as f64;
            let var = boots.iter().map(|b| (b[j] - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
            *slot = var.sqrt();
        }
    }
    Ok(CumulantEstimates { n, k, se })
}

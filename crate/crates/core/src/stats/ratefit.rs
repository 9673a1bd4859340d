use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `log d = intercept + slope · log T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub horizons: Vec<f64>,
    pub distances: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
    /// Horizons whose distance was non-positive and could not be fitted.
    pub dropped: Vec<f64>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut horizons = Vec::new();
    let mut distances = Vec::new();
    let mut dropped = Vec::new();
    for &(t, d) in points {
        if d > 0.0 && d.is_finite() && t > 0.0 {
            horizons.push(t);
            distances.push(d);
        } else {
            log::warn!("dropping horizon {t} with distance {d} from the rate fit");
            dropped.push(t);
        }
    }
    let n = horizons.len();
    if n < 3 {
        return Err(Error::Estimation(format!(
            "rate fit needs 3 positive distances, {n} remain"
        )));
    }
    let x: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Estimation("rate fit needs distinct horizons".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit {
        horizons,
        distances,
        slope,
        intercept,
        slope_se,
        r2,
        dropped,
    })
}

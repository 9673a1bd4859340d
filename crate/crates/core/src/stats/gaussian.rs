//! Normal-law helpers: CDF, density, quantile and their antiderivatives.

use statrs::function::erf::{erfc, erfc_inv};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `Φ(z)`.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `1 − Φ(z)` without cancellation.
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `∫_{-∞}^x Φ(u/σ) du = x Φ(x/σ) + σ φ(x/σ)`.
pub(crate) fn lower_area(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    if z <= 0.0 {
        x * cdf(z) + sigma * pdf(z)
    } else {
        x + upper_area(x, sigma)
    }
}

/// `∫_x^∞ (1 − Φ(u/σ)) du = σ φ(x/σ) − x (1 − Φ(x/σ))`.
pub(crate) fn upper_area(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    if z >= 0.0 {
        sigma * pdf(z) - x * sf(z)
    } else {
        lower_area(x, sigma) - x
    }
}

/// `∫_a^b Φ(u/σ) du` for `a ≤ b`, evaluated on whichever side avoids
/// cancellation.
pub(crate) fn cdf_integral(a: f64, b: f64, sigma: f64) -> f64 {
    if b <= 0.0 {
        lower_area(b, sigma) - lower_area(a, sigma)
    } else if a >= 0.0 {
        // ∫ Φ = (b − a) − ∫ (1 − Φ)
        (b - a) - (upper_area(a, sigma) - upper_area(b, sigma))
    } else {
        cdf_integral(a, 0.0, sigma) + cdf_integral(0.0, b, sigma)
    }
}

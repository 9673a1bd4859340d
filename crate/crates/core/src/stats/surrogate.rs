use rand::Rng;
use serde::{Deserialize, Serialize};

use super::wasserstein::{Debias, DistanceEstimate, MIN_RELIABLE_SAMPLE};
use super::Sample;
use crate::error::{Error, Result};
use crate::marks::MarkDistribution;
use crate::parallel::map_replications;
use crate::rng::{domain, stream};

/// `h(x) = scale · sin(ωx + θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionaryElement {
    pub omega: f64,
    pub phase: f64,
    pub scale: f64,
}

impl DictionaryElement {
    /// Largest admissible scale: `min(1, ω⁻⁴)`.
    pub fn certified(omega: f64, phase: f64) -> Self {
        DictionaryElement {
            omega,
            phase,
            scale: omega.powi(-4).min(1.0),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * (self.omega * x + self.phase).sin()
    }

    /// `‖h^{(order)}‖_∞`.
    pub fn derivative_bound(&self, order: i32) -> f64 {
        self.scale.abs() * self.omega.abs().powi(order)
    }

    /// `E h(N(0, v)) = scale · e^{−vω²/2} · sin θ`.
    pub fn gaussian_mean(&self, variance: f64) -> f64 {
        self.scale * (-0.5 * variance * self.omega * self.omega).exp() * self.phase.sin()
    }
}

/// Finite family of test functions with their first four derivatives bounded by 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub elements: Vec<DictionaryElement>,
}

impl Default for Dictionary {
    /// `ω ∈ {2⁻³, …, 2²}`, `θ ∈ {0, π/2}`.
    fn default() -> Self {
        let omegas: Vec<f64> = (-3..=2).map(|k| 2f64.powi(k)).collect();
        Dictionary::sinusoids(&omegas, &[0.0, std::f64::consts::FRAC_PI_2])
    }
}

impl Dictionary {
    pub fn sinusoids(omegas: &[f64], phases: &[f64]) -> Self {
        let elements = omegas
            .iter()
            .flat_map(|&w| phases.iter().map(move |&p| DictionaryElement::certified(w, p)))
            .collect();
        Dictionary { elements }
    }

    /// Rejects any element whose value or derivatives up to order four exceed 1.
    pub fn certify(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::Config("empty test-function dictionary".into()));
        }
        for e in &self.elements {
            if !(e.omega.is_finite() && e.phase.is_finite() && e.scale.is_finite()) {
                return Err(Error::Config(format!("non-finite dictionary entry {e:?}")));
            }
            for order in 0..=4 {
                let bound = e.derivative_bound(order);
                if bound > 1.0 + 1e-12 {
                    return Err(Error::Config(format!(
                        "dictionary entry ω={} scale={} has derivative {order} bounded only by {bound}",
                        e.omega, e.scale
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How `E h(F)` is estimated from the simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateEstimator {
    /// Plain average of `h(F_i)`; debiased against Gaussian samples of the same size.
    SampleMean,
    /// Averages `E[h(F) | event times]`, integrating the marks out in closed
    /// form; debiased by bootstrap.
    #[default]
    Conditional,
}

/// Per-path statistics that determine `F` given the marks.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSample {
    pub horizon: f64,
    pub counts: Vec<u64>,
    /// Centering subtracted from `S_T` on each path.
    pub centers: Vec<f64>,
}

fn max_gap(means: &[f64], targets: &[f64]) -> f64 {
    means
        .iter()
        .zip(targets)
        .map(|(m, t)| (m - t).abs())
        .fold(0.0, f64::max)
}

/// `max_h |mean h(F) − E h(N(0, variance))|` with a matched Gaussian baseline.
///
/// A lower bound on the smooth distance.
pub fn smooth_distance_surrogate(
    sample: &Sample,
    variance: f64,
    dictionary: &Dictionary,
    debias: &Debias,
) -> Result<DistanceEstimate> {
    dictionary.certify()?;
    check_variance(variance)?;
    let m = sample.len();
    let targets: Vec<f64> = dictionary.elements.iter().map(|e| e.gaussian_mean(variance)).collect();
    let stat = |values: &[f64]| {
        let means: Vec<f64> = dictionary
            .elements
            .iter()
            .map(|e| values.iter().map(|&x| e.eval(x)).sum::<f64>() / values.len() as f64)
            .collect();
        max_gap(&means, &targets)
    };
    let raw = stat(&sample.values);
    let nulls = map_replications(debias.replicates as u64, |k| {
        stat(&debias.gaussian_sample(2, m, variance, k))
    });
    Ok(DistanceEstimate::from_replicates(raw, &nulls, debias.rule, m, variance))
}

/// Same surrogate, with each `h(F_i)` replaced by its conditional mean given
/// the event times: `scale · Im(e^{iθ} φ_X(ω/√T)^{n_i} e^{−iω c_i/√T})`.
///
/// Requires marks independent of the event times, which holds here since the
/// kernel ignores marks.
pub fn smooth_distance_surrogate_conditional(
    sample: &ConditionalSample,
    marks: &MarkDistribution,
    variance: f64,
    dictionary: &Dictionary,
    debias: &Debias,
) -> Result<DistanceEstimate> {
    dictionary.certify()?;
    check_variance(variance)?;
    let m = sample.counts.len();
    if m != sample.centers.len() || m < 2 {
        return Err(Error::Estimation(format!(
            "conditional sample has {m} counts and {} centers",
            sample.centers.len()
        )));
    }
    let root_t = sample.horizon.sqrt();
    let columns: Vec<Vec<f64>> = dictionary
        .elements
        .iter()
        .map(|e| {
            let (re, im) = marks.characteristic(e.omega / root_t);
            let log_rho = re.hypot(im).ln();
            let arg = im.atan2(re);
            sample
                .counts
                .iter()
                .zip(&sample.centers)
                .map(|(&n, &c)| {
                    let n = n as f64;
                    let modulus = if n == 0.0 { 1.0 } else { (n * log_rho).exp() };
                    e.scale * modulus * (e.phase + n * arg - e.omega * c / root_t).sin()
                })
                .collect()
        })
        .collect();
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / m as f64).collect();
    let targets: Vec<f64> = dictionary.elements.iter().map(|e| e.gaussian_mean(variance)).collect();
    let raw = max_gap(&means, &targets);
    let nulls = map_replications(debias.replicates as u64, |k| {
        let mut rng = stream(debias.seed, &[domain::DEBIAS, 3, m as u64], k);
        let picks: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
        let boot: Vec<f64> = columns
            .iter()
            .map(|c| picks.iter().map(|&i| c[i]).sum::<f64>() / m as f64)
            .collect();
        max_gap(&boot, &means)
    });
    if m < MIN_RELIABLE_SAMPLE {
        log::warn!("surrogate on {m} replications is dominated by estimation noise");
    }
    Ok(DistanceEstimate::from_replicates(raw, &nulls, debias.rule, m, variance))
}

fn check_variance(variance: f64) -> Result<()> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Config(format!("target variance {variance} must be positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::FunctionalTag;

    #[test]
    fn default_dictionary_is_certified() {
        let d = Dictionary::default();
        assert_eq!(d.elements.len(), 12);
        d.certify().unwrap();
        for e in &d.elements {
            for order in 0..=4 {
                assert!(e.derivative_bound(order) <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn oversized_element_is_a_config_error() {
        let mut d = Dictionary::default();
        d.elements.push(DictionaryElement { omega: 2.0, phase: 0.0, scale: 0.5 });
        assert!(matches!(d.certify(), Err(Error::Config(_))));
    }

    #[test]
    fn gaussian_mean_closed_form() {
        let e = DictionaryElement::certified(1.0, std::f64::consts::FRAC_PI_2);
        assert!((e.gaussian_mean(1.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(DictionaryElement::certified(0.5, 0.0).gaussian_mean(3.0), 0.0);
    }

    #[test]
    fn gaussian_sample_against_its_own_law() {
        let values = Debias { replicates: 1, seed: 40, ..Default::default() }.gaussian_sample(9, 20_000, 1.5, 0);
        let sample = Sample::new(1.0, FunctionalTag::Raw, values).unwrap();
        let est = smooth_distance_surrogate(&sample, 1.5, &Dictionary::default(), &Debias::default()).unwrap();
        assert!(est.debiased.abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn shifted_gaussian_is_detected() {
        let values: Vec<f64> = Debias { replicates: 1, seed: 41, ..Default::default() }
            .gaussian_sample(9, 20_000, 1.0, 0)
            .into_iter()
            .map(|x| x + 0.1)
            .collect();
        let sample = Sample::new(1.0, FunctionalTag::Raw, values).unwrap();
        let est = smooth_distance_surrogate(&sample, 1.0, &Dictionary::default(), &Debias::default()).unwrap();
        // E sin(N + 0.1) = e^{-1/2} sin 0.1 ≈ 0.0605.
        assert!(est.raw >= 0.05, "{est:?}");
    }

    #[test]
    fn conditional_estimator_is_exact_for_poisson_counts_without_noise() {
        // A constant count with Rademacher marks: E[h(S/√T) | n] is
        // scale·cos(ω/√T)^n·sin θ exactly.
        let t = 100.0;
        let sample = ConditionalSample {
            horizon: t,
            counts: vec![200; 10],
            centers: vec![0.0; 10],
        };
        let dict = Dictionary::sinusoids(&[1.0], &[std::f64::consts::FRAC_PI_2]);
        let est = smooth_distance_surrogate_conditional(
            &sample,
            &MarkDistribution::Rademacher,
            2.0,
            &dict,
            &Debias::default(),
        )
        .unwrap();
        let exact = (0.1f64).cos().powi(200) - (-1.0f64).exp();
        assert!((est.raw - exact.abs()).abs() < 1e-12);
        assert_eq!(est.offset, 0.0);
    }

    #[test]
    fn conditional_and_plain_estimators_agree_in_mean() {
        use crate::engine::{simulate_thinning, HawkesModel};
        use crate::kernel::Kernel;
        let model = HawkesModel::new(Kernel::exponential(1.0, 2.0), 1.0, MarkDistribution::Rademacher).unwrap();
        let t = 20.0;
        let paths: Vec<_> = (0..4000)
            .map(|i| simulate_thinning(&model, t, &mut stream(8, &[], i)).unwrap())
            .collect();
        let e = DictionaryElement::certified(1.0, std::f64::consts::FRAC_PI_2);
        let plain: Vec<f64> = paths.iter().map(|p| e.eval(p.sum / t.sqrt())).collect();
        let cond: Vec<f64> = paths
            .iter()
            .map(|p| (1.0 / t.sqrt()).cos().powi(p.count as i32))
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let diff: Vec<f64> = plain.iter().zip(&cond).map(|(a, b)| a - b).collect();
        let md = mean(&diff);
        let sd = (diff.iter().map(|d| (d - md).powi(2)).sum::<f64>() / (diff.len() - 1) as f64).sqrt();
        assert!(md.abs() < 4.0 * sd / (diff.len() as f64).sqrt());
    }
}

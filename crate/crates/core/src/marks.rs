//! Jump-mark laws `ν` for the compound process `S_t = Σ_{i ≤ H_t} X_i`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the i.i.d. jump marks. Every family has a finite fourth moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkDistribution {
    /// Point mass at `value`. `Dirac { value: 1.0 }` recovers the counting process.
    Dirac { value: f64 },
    /// ±1 with probability ½ each.
    Rademacher,
    /// `N(0, variance)`.
    CenteredNormal { variance: f64 },
    /// `a` with probability `p`, `b` with probability `1 − p`.
    TwoPoint { p: f64, a: f64, b: f64 },
    /// Finite table of atoms.
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

/// `(E X, E X², E X³, E X⁴)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkMoments {
    pub mean: f64,
    pub second: f64,
    pub third: f64,
    pub fourth: f64,
}

impl MarkMoments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

/// Why the vanishing-odd-moment hypothesis fails.
#[derive(Debug, Clone, PartialEq)]
pub enum FastRateViolation {
    NonZeroMean(f64),
    NonZeroThirdMoment(f64),
}

impl std::fmt::Display for FastRateViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FastRateViolation::NonZeroMean(m) => write!(f, "E[X] = {m} is not zero"),
            FastRateViolation::NonZeroThirdMoment(m) => write!(f, "E[X³] = {m} is not zero"),
        }
    }
}

impl MarkDistribution {
    pub fn dirac(value: f64) -> Self {
        MarkDistribution::Dirac { value }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            MarkDistribution::Dirac { value } if !value.is_finite() => {
                bad(format!("dirac mark {value} must be finite"))
            }
            MarkDistribution::CenteredNormal { variance } if !(*variance >= 0.0) => {
                bad(format!("normal mark variance {variance} must be non-negative"))
            }
            MarkDistribution::TwoPoint { p, a, b } => {
                if !(0.0..=1.0).contains(p) || !a.is_finite() || !b.is_finite() {
                    bad(format!("two-point law needs p in [0,1] and finite atoms (p={p})"))
                } else {
                    Ok(())
                }
            }
            MarkDistribution::Discrete {
                values,
                probabilities,
            } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return bad("discrete marks need equally many values and probabilities".into());
                }
                if probabilities.iter().any(|p| !(*p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
                    return bad("discrete marks need finite values and non-negative probabilities".into());
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("discrete probabilities sum to {total}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Closed-form raw moments up to order four.
    pub fn moments(&self) -> MarkMoments {
        let atoms = |pairs: &[(f64, f64)]| {
            let m = |k: i32| pairs.iter().map(|(x, p)| p * x.powi(k)).sum::<f64>();
            MarkMoments {
                mean: m(1),
                second: m(2),
                third: m(3),
                fourth: m(4),
            }
        };
        match self {
            MarkDistribution::Dirac { value } => atoms(&[(*value, 1.0)]),
            MarkDistribution::Rademacher => MarkMoments {
                mean: 0.0,
                second: 1.0,
                third: 0.0,
                fourth: 1.0,
            },
            MarkDistribution::CenteredNormal { variance } => MarkMoments {
                mean: 0.0,
                second: *variance,
                third: 0.0,
                fourth: 3.0 * variance * variance,
            },
            MarkDistribution::TwoPoint { p, a, b } => atoms(&[(*a, *p), (*b, 1.0 - p)]),
            MarkDistribution::Discrete {
                values,
                probabilities,
            } => {
                let pairs: Vec<_> = values.iter().copied().zip(probabilities.iter().copied()).collect();
                atoms(&pairs)
            }
        }
    }

    /// `E[e^{iωX}]` as `(re, im)`.
    pub fn characteristic(&self, omega: f64) -> (f64, f64) {
        let atoms = |pairs: &mut dyn Iterator<Item = (f64, f64)>| {
            pairs.fold((0.0, 0.0), |(re, im), (x, p)| {
                let (s, c) = (omega * x).sin_cos();
                (re + p * c, im + p * s)
            })
        };
        match self {
            MarkDistribution::Dirac { value } => {
                let (s, c) = (omega * value).sin_cos();
                (c, s)
            }
            MarkDistribution::Rademacher => (omega.cos(), 0.0),
            MarkDistribution::CenteredNormal { variance } => {
                ((-0.5 * variance * omega * omega).exp(), 0.0)
            }
            MarkDistribution::TwoPoint { p, a, b } => {
                atoms(&mut [(*a, *p), (*b, 1.0 - p)].into_iter())
            }
            MarkDistribution::Discrete {
                values,
                probabilities,
            } => atoms(&mut values.iter().copied().zip(probabilities.iter().copied())),
        }
    }

    /// One draw from the law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarkDistribution::Dirac { value } => *value,
            MarkDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            MarkDistribution::CenteredNormal { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                variance.sqrt() * z
            }
            MarkDistribution::TwoPoint { p, a, b } => {
                if rng.random::<f64>() < *p {
                    *a
                } else {
                    *b
                }
            }
            MarkDistribution::Discrete {
                values,
                probabilities,
            } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probabilities) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }

    pub fn is_dirac_one(&self) -> bool {
        matches!(self, MarkDistribution::Dirac { value } if *value == 1.0)
    }
}

/// Closed-form moments of `dist`.
pub fn moments(dist: &MarkDistribution) -> MarkMoments {
    dist.moments()
}

/// Checks `E X = E X³ = 0`, the hypothesis behind the `1/T` smooth-distance rate.
pub fn check_fast_rate_hypothesis(dist: &MarkDistribution) -> Result<(), FastRateViolation> {
    let m = dist.moments();
    // Tolerance only absorbs rounding in the closed forms.
    let scale = m.fourth.sqrt().max(1.0);
    if m.mean.abs() > 1e-12 * scale {
        return Err(FastRateViolation::NonZeroMean(m.mean));
    }
    if m.third.abs() > 1e-12 * scale.powf(1.5) {
        return Err(FastRateViolation::NonZeroThirdMoment(m.third));
    }
    Ok(())
}

/// `n` i.i.d. draws.
pub fn sample_marks<R: Rng + ?Sized>(dist: &MarkDistribution, rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| dist.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_moments() {
        let m = moments(&MarkDistribution::dirac(1.0));
        assert_eq!((m.mean, m.second, m.third, m.fourth), (1.0, 1.0, 1.0, 1.0));
        let m = moments(&MarkDistribution::Rademacher);
        assert_eq!((m.mean, m.second, m.third, m.fourth), (0.0, 1.0, 0.0, 1.0));
        let m = moments(&MarkDistribution::TwoPoint { p: 0.5, a: -2.0, b: 2.0 });
        assert_eq!((m.mean, m.second, m.third, m.fourth), (0.0, 4.0, 0.0, 16.0));
    }

    #[test]
    fn fast_rate_hypothesis() {
        assert!(check_fast_rate_hypothesis(&MarkDistribution::Rademacher).is_ok());
        assert!(check_fast_rate_hypothesis(&MarkDistribution::CenteredNormal { variance: 2.0 }).is_ok());
        assert_eq!(
            check_fast_rate_hypothesis(&MarkDistribution::dirac(1.0)),
            Err(FastRateViolation::NonZeroMean(1.0))
        );
        let skewed = MarkDistribution::TwoPoint { p: 2.0 / 3.0, a: -1.0, b: 2.0 };
        match check_fast_rate_hypothesis(&skewed) {
            Err(FastRateViolation::NonZeroThirdMoment(m3)) => assert!((m3 - 2.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dirac_samples_are_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_marks(&MarkDistribution::dirac(1.0), &mut rng, 5), vec![1.0; 5]);
    }

    #[test]
    fn sample_means_within_clt_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let xs = sample_marks(&MarkDistribution::Rademacher, &mut rng, n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        let table = MarkDistribution::Discrete {
            values: vec![1.0, 3.0],
            probabilities: vec![0.5, 0.5],
        };
        let xs = sample_marks(&table, &mut rng, n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.01);
    }

    #[test]
    fn empirical_moments_agree_with_closed_forms() {
        let families = [
            MarkDistribution::dirac(1.5),
            MarkDistribution::Rademacher,
            MarkDistribution::CenteredNormal { variance: 2.0 },
            MarkDistribution::TwoPoint { p: 2.0 / 3.0, a: -1.0, b: 2.0 },
            MarkDistribution::Discrete {
                values: vec![-1.0, 0.5, 3.0],
                probabilities: vec![0.2, 0.5, 0.3],
            },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        for dist in families {
            let xs = sample_marks(&dist, &mut rng, n);
            let m = dist.moments();
            let exact = [m.mean, m.second, m.third, m.fourth];
            for k in 1..=4 {
                let powers: Vec<f64> = xs.iter().map(|x| x.powi(k)).collect();
                let mean = powers.iter().sum::<f64>() / n as f64;
                let var = powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                let target = exact[k as usize - 1];
                assert!(
                    (mean - target).abs() <= 5.0 * se + 1e-12,
                    "{dist:?} k={k}: {mean} vs {target} (se {se})"
                );
            }
        }
    }

    #[test]
    fn characteristic_function_matches_moments() {
        let dist = MarkDistribution::TwoPoint { p: 0.3, a: -1.0, b: 2.0 };
        let m = dist.moments();
        let w = 1e-4;
        let (re, im) = dist.characteristic(w);
        assert!((im / w - m.mean).abs() < 1e-6);
        assert!(((1.0 - re) * 2.0 / (w * w) - m.second).abs() < 1e-4);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let bad = MarkDistribution::Discrete {
            values: vec![1.0, 2.0],
            probabilities: vec![0.5, 0.4],
        };
        assert!(bad.validate().is_err());
    }
}

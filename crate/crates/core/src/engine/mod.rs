//! Path simulation by thinning a driving Poisson measure.
//!
//! The process is the solution of
//!
//! ```text
//! H_t = ∫_{(0,t]×ℝ₊×ℝ} 1{θ ≤ λ_s} N(ds, dθ, dx)
//! S_t = ∫_{(0,t]×ℝ₊×ℝ} x 1{θ ≤ λ_s} N(ds, dθ, dx)
//! λ_t = μ + Σ_{t_i < t} φ(t − t_i)
//! ```
//!
//! where `N` has intensity `ds dθ ν(dx)`. Only the points of `N` below a
//! dominating envelope are ever generated; a point `(s, θ)` becomes a jump iff
//! `θ ≤ λ_s`. [`simulate_coupled_addpoint`] feeds the same points to a second
//! path with one extra atom, which realizes the add-point shift `ε⁺` pathwise.

mod cluster;
mod coupled;
mod excitation;
mod thinning;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{stability_check, Kernel};
use crate::marks::MarkDistribution;

pub use cluster::simulate_cluster;
pub use coupled::{
    simulate_coupled_addpoint, simulate_coupled_with, CoupledOptions, CoupledPathResult, Coupling,
    LambdaHatSample,
};
pub(crate) use excitation::Excitation;
pub use thinning::simulate_thinning;

/// A validated `(φ, μ, ν)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesModel {
    pub kernel: Kernel,
    pub mu: f64,
    pub marks: MarkDistribution,
}

impl HawkesModel {
    pub fn new(kernel: Kernel, mu: f64, marks: MarkDistribution) -> Result<Self> {
        stability_check(&kernel)?;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::Config(format!("baseline rate μ = {mu} must be non-negative")));
        }
        marks.validate()?;
        Ok(HawkesModel { kernel, mu, marks })
    }

    /// Counting-process model (`ν = δ₁`).
    pub fn counting(kernel: Kernel, mu: f64) -> Result<Self> {
        Self::new(kernel, mu, MarkDistribution::dirac(1.0))
    }

    pub fn with_marks(&self, marks: MarkDistribution) -> Result<Self> {
        Self::new(self.kernel.clone(), self.mu, marks)
    }

    pub fn l1(&self) -> f64 {
        self.kernel.l1_unchecked()
    }
}

/// Which simulator produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Thinning,
    Cluster,
}

/// Jump times in `(0, T]` with their marks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
    pub horizon: f64,
}

impl EventLog {
    pub fn new(horizon: f64) -> Self {
        EventLog {
            times: Vec::new(),
            marks: Vec::new(),
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push(&mut self, time: f64, mark: f64) {
        self.times.push(time);
        self.marks.push(mark);
    }

    /// `H_t`: number of jumps in `(0, t]`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// `S_t`.
    pub fn mark_sum_until(&self, t: f64) -> f64 {
        self.marks[..self.count_until(t)].iter().sum()
    }

    /// `∫₀^t λ_s ds = μt + Σ_{t_i < t} Φ(t − t_i)`.
    pub fn compensator_at(&self, kernel: &Kernel, mu: f64, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s < t);
        mu * t
            + self.times[..n]
                .iter()
                .map(|&s| kernel.integral(t - s))
                .sum::<f64>()
    }

    /// Left-limit intensity `λ_t = μ + Σ_{t_i < t} φ(t − t_i)`.
    pub fn intensity_at(&self, kernel: &Kernel, mu: f64, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s < t);
        mu + self.times[..n]
            .iter()
            .map(|&s| kernel.value(t - s))
            .sum::<f64>()
    }

    /// Checks the structural invariants: strictly increasing times in
    /// `(0, T]` and one mark per time.
    pub fn is_well_formed(&self) -> bool {
        self.times.len() == self.marks.len()
            && self.times.windows(2).all(|w| w[0] < w[1])
            && self.times.iter().all(|&t| t > 0.0 && t <= self.horizon)
    }

    /// CSV with columns `time,mark`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "mark"])?;
        for (t, x) in self.times.iter().zip(&self.marks) {
            w.write_record([t.to_string(), x.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Λ_T = μT + Σ_i Φ(T − t_i)` over the whole log.
pub fn compensator_integral(log: &EventLog, kernel: &Kernel, mu: f64) -> f64 {
    mu * log.horizon
        + log
            .times
            .iter()
            .map(|&s| kernel.integral(log.horizon - s))
            .sum::<f64>()
}

/// Path summary at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub log: EventLog,
    /// `H_T`.
    pub count: u64,
    /// `S_T`.
    pub sum: f64,
    /// `Λ_T = ∫₀^T λ_t dt`.
    pub compensator: f64,
    /// `M_T = H_T − Λ_T`.
    pub martingale: f64,
    pub method: Method,
}

impl PathResult {
    pub(crate) fn from_log(log: EventLog, model: &HawkesModel, method: Method) -> Self {
        let compensator = compensator_integral(&log, &model.kernel, model.mu);
        let count = log.len() as u64;
        let sum = log.marks.iter().sum();
        PathResult {
            count,
            sum,
            compensator,
            martingale: count as f64 - compensator,
            log,
            method,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.log.horizon
    }

    /// The same path observed on `(0, t]` only; for `t` up to the horizon
    /// this has the law of a path simulated to `t`.
    pub fn restrict(&self, model: &HawkesModel, t: f64) -> PathResult {
        let n = self.log.count_until(t);
        let log = EventLog {
            times: self.log.times[..n].to_vec(),
            marks: self.log.marks[..n].to_vec(),
            horizon: t,
        };
        PathResult::from_log(log, model, self.method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_log_compensator_is_mu_t() {
        let log = EventLog::new(10.0);
        assert_eq!(compensator_integral(&log, &Kernel::exponential(1.0, 2.0), 1.0), 10.0);
    }

    #[test]
    fn single_jump_compensator_tends_to_l1() {
        let k = Kernel::exponential(1.0, 2.0);
        let mut log = EventLog::new(60.0);
        log.push(1.0, 1.0);
        let lam = compensator_integral(&log, &k, 1.0);
        assert!((lam - (60.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn compensator_matches_fine_quadrature() {
        use rand::{Rng, SeedableRng};
        let k = Kernel::exponential(1.0, 2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let horizon = 20.0;
        let mut times: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * horizon).collect();
        times.sort_by(f64::total_cmp);
        let log = EventLog {
            marks: vec![1.0; times.len()],
            times,
            horizon,
        };
        let exact = compensator_integral(&log, &k, 1.0);
        // Trapezoid on each inter-event piece, where λ is smooth.
        let mut knots = vec![0.0];
        knots.extend(&log.times);
        knots.push(horizon);
        let mut quad = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = 2000;
            let h = (b - a) / n as f64;
            let lam = |t: f64| {
                1.0 + log
                    .times
                    .iter()
                    .filter(|&&s| s <= a)
                    .map(|&s| k.value(t - s))
                    .sum::<f64>()
            };
            for i in 0..n {
                let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
                quad += 0.5 * h * (lam(x0) + lam(x1));
            }
        }
        assert!(((exact - quad) / exact).abs() < 1e-6, "{exact} vs {quad}");
    }

    #[test]
    fn restriction_matches_direct_quantities() {
        let model = HawkesModel::new(
            Kernel::exponential(1.0, 2.0),
            1.0,
            MarkDistribution::Rademacher,
        )
        .unwrap();
        let full = simulate_thinning(&model, 40.0, &mut crate::rng::stream(0, &[], 3)).unwrap();
        let part = full.restrict(&model, 25.0);
        assert_eq!(part.count as usize, full.log.count_until(25.0));
        assert_eq!(part.sum, full.log.mark_sum_until(25.0));
        let lam = full.log.compensator_at(&model.kernel, model.mu, 25.0);
        assert!((part.compensator - lam).abs() < 1e-9);
        assert_eq!(full.restrict(&model, 40.0), full);
    }

    #[test]
    fn model_rejects_explosive_kernel() {
        assert!(matches!(
            HawkesModel::counting(Kernel::exponential(3.0, 2.0), 1.0),
            Err(Error::Stability(_))
        ));
        assert!(HawkesModel::counting(Kernel::Zero, -1.0).is_err());
    }
}

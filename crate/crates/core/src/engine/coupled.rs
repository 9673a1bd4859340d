use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::thinning::ENVELOPE_SLACK;
use super::{EventLog, Excitation, HawkesModel, Method, PathResult};
use crate::error::{Error, Result};

/// How the shifted path reads the driving points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Both paths test the same `θ`: the literal add-point shift.
    #[default]
    Shared,
    /// The shifted path draws its own `θ`. Breaks the coupling on purpose;
    /// only useful as a negative control.
    Independent,
}

#[derive(Debug, Clone)]
pub struct CoupledOptions {
    /// Number of uniform `λ̂` samples on `(t₀, T]`.
    pub grid_points: usize,
    pub coupling: Coupling,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions {
            grid_points: 256,
            coupling: Coupling::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaHatSample {
    pub time: f64,
    pub value: f64,
}

/// A base path and its `ε⁺_{(t₀,0,1)}`-shifted twin driven by the same points.
#[derive(Debug, Clone)]
pub struct CoupledPathResult {
    pub t0: f64,
    pub base: PathResult,
    /// Includes the inserted atom at `t₀` (mark 1, excluded from `sum`).
    pub shifted: PathResult,
    /// `λ̂_s = λ_s∘ε⁺ − λ_s` on the uniform grid.
    pub lambda_hat_grid: Vec<LambdaHatSample>,
    /// `λ̂` just before every event of either path after `t₀`.
    pub lambda_hat_events: Vec<LambdaHatSample>,
    /// Base intensity `λ_{t₀}` (left limit).
    pub base_intensity_at_t0: f64,
    /// `Ĥ_T`: jumps of the shifted path only, excluding the atom.
    pub extra_count: u64,
    /// Times of those jumps.
    pub extra_times: Vec<f64>,
    /// Marks carried by those jumps.
    pub extra_mark_sum: f64,
    /// `∫_{t₀}^T λ̂_s ds`.
    pub lambda_hat_integral: f64,
    /// `M̂_T = Ĥ_T − ∫_{t₀}^T λ̂_s ds`.
    pub hat_martingale: f64,
    /// Candidates accepted by the base path but rejected by the shifted one.
    pub containment_violations: u64,
    /// Smallest `λ̂` seen at any evaluation point after `t₀`.
    pub min_lambda_hat: f64,
}

impl CoupledPathResult {
    /// Every base jump time is also a shifted jump time.
    pub fn base_contained_in_shifted(&self) -> bool {
        let shifted = &self.shifted.log.times;
        self.base
            .log
            .times
            .iter()
            .all(|t| shifted.binary_search_by(|s| s.total_cmp(t)).is_ok())
    }

    /// Paths agree on `[0, t₀]`.
    pub fn coincide_before_t0(&self) -> bool {
        let n = self.base.log.count_until(self.t0);
        let m = self.shifted.log.times.partition_point(|&s| s < self.t0);
        n == m && self.base.log.times[..n] == self.shifted.log.times[..m]
    }

    /// `Ĥ_c` for `c ∈ [t₀, T]`.
    pub fn extra_count_until(&self, c: f64) -> usize {
        self.extra_times.partition_point(|&s| s <= c)
    }

    /// `∫_{t₀}^c λ̂_s ds = Φ(c − t₀) + Σ_{extra u < c} Φ(c − u)`.
    pub fn lambda_hat_integral_until(&self, model: &HawkesModel, c: f64) -> f64 {
        if c <= self.t0 {
            return 0.0;
        }
        let k = &model.kernel;
        k.integral(c - self.t0)
            + self
                .extra_times
                .iter()
                .take_while(|&&u| u < c)
                .map(|&u| k.integral(c - u))
                .sum::<f64>()
    }
}

/// Simulates the coupled pair with default options.
pub fn simulate_coupled_addpoint<R: Rng + ?Sized>(
    model: &HawkesModel,
    horizon: f64,
    t0: f64,
    rng: &mut R,
) -> Result<CoupledPathResult> {
    simulate_coupled_with(model, horizon, t0, &CoupledOptions::default(), rng)
}

/// Thins one stream of driving points `(s, θ)` under the larger of the two
/// envelopes and tests each against both intensities. The shifted path
/// receives an unconditional atom at `t₀`.
pub fn simulate_coupled_with<R: Rng + ?Sized>(
    model: &HawkesModel,
    horizon: f64,
    t0: f64,
    options: &CoupledOptions,
    rng: &mut R,
) -> Result<CoupledPathResult> {
    if !(t0 > 0.0 && t0 < horizon) {
        return Err(Error::OutOfRange {
            what: "t0",
            value: t0,
            lo: 0.0,
            hi: horizon,
        });
    }
    let mu = model.mu;
    let kernel = &model.kernel;
    let mut base = Excitation::new(kernel);
    let mut shift = Excitation::new(kernel);
    let mut base_log = EventLog::new(horizon);
    let mut shift_log = EventLog::new(horizon);

    let grid: Vec<f64> = (1..=options.grid_points)
        .map(|j| t0 + (horizon - t0) * j as f64 / options.grid_points as f64)
        .collect();
    let mut next_grid = 0;
    let mut lambda_hat_grid = Vec::with_capacity(grid.len());
    let mut lambda_hat_events = Vec::new();
    let mut extra_times = Vec::new();
    let mut extra_mark_sum = 0.0;
    let mut containment_violations = 0;
    let mut min_lambda_hat = f64::INFINITY;
    let mut base_intensity_at_t0 = f64::NAN;
    let mut inserted = false;

    let mut s = 0.0;
    loop {
        let bound = mu + base.envelope(s).max(shift.envelope(s));
        let next = if bound > 0.0 {
            s + Distribution::<f64>::sample(&Exp1, rng) / bound
        } else {
            f64::INFINITY
        };
        if !inserted && next > t0 {
            // Restarting the candidate stream at the deterministic time t₀
            // leaves its law unchanged.
            base_intensity_at_t0 = mu + base.intensity(t0);
            shift.push(t0);
            shift_log.push(t0, 1.0);
            inserted = true;
            s = t0;
            continue;
        }
        let stop = next.min(horizon);
        while next_grid < grid.len() && grid[next_grid] <= stop {
            let g = grid[next_grid];
            let value = shift.intensity(g) - base.intensity(g);
            min_lambda_hat = min_lambda_hat.min(value);
            lambda_hat_grid.push(LambdaHatSample { time: g, value });
            next_grid += 1;
        }
        if next > horizon {
            break;
        }
        let lam_base = mu + base.intensity(next);
        let lam_shift = mu + shift.intensity(next);
        let top = lam_base.max(lam_shift);
        if top > bound * (1.0 + ENVELOPE_SLACK) {
            return Err(Error::EnvelopeBreach {
                time: next,
                intensity: top,
                envelope: bound,
            });
        }
        let theta = rng.random::<f64>() * bound;
        let theta_shift = match options.coupling {
            Coupling::Shared => theta,
            Coupling::Independent => rng.random::<f64>() * bound,
        };
        let accept_base = theta <= lam_base;
        let accept_shift = theta_shift <= lam_shift;
        if inserted && (accept_base || accept_shift) {
            let value = lam_shift - lam_base;
            min_lambda_hat = min_lambda_hat.min(value);
            lambda_hat_events.push(LambdaHatSample { time: next, value });
        }
        if accept_base || accept_shift {
            let mark = model.marks.sample(rng);
            if accept_base {
                base_log.push(next, mark);
                base.push(next);
            }
            if accept_shift {
                shift_log.push(next, mark);
                shift.push(next);
            }
            match (accept_base, accept_shift) {
                (true, false) => containment_violations += 1,
                (false, true) => {
                    extra_times.push(next);
                    extra_mark_sum += mark;
                }
                _ => {}
            }
        }
        s = next;
    }

    let base = PathResult::from_log(base_log, model, Method::Thinning);
    let mut shifted = PathResult::from_log(shift_log, model, Method::Thinning);
    shifted.sum -= 1.0;

    let lambda_hat_integral = kernel.integral(horizon - t0)
        + extra_times
            .iter()
            .map(|&u| kernel.integral(horizon - u))
            .sum::<f64>();
    let extra_count = extra_times.len() as u64;
    Ok(CoupledPathResult {
        t0,
        base,
        shifted,
        lambda_hat_grid,
        lambda_hat_events,
        base_intensity_at_t0,
        extra_count,
        extra_times,
        extra_mark_sum,
        lambda_hat_integral,
        hat_martingale: extra_count as f64 - lambda_hat_integral,
        containment_violations,
        min_lambda_hat,
    })
}

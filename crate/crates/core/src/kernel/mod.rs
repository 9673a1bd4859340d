//! Excitation kernels and the renewal density they generate.
//!
//! A kernel `φ: [0, ∞) → [0, ∞)` sets how much each past jump raises the
//! intensity of a Hawkes process. Every kernel accepted by
//! [`stability_check`] has `∫φ < 1` and a finite first moment, which is what
//! the simulators and the asymptotic formulas in [`crate::theory`] rely on.

mod psi;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use psi::{mean_intensity, solve_psi, PsiSolver, PsiTable};

/// Excitation function of a Hawkes process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// No self-excitation; the process is Poisson with rate μ.
    Zero,
    /// `φ(u) = α e^{-βu}`.
    Exponential { alpha: f64, beta: f64 },
    /// `φ(u) = α u e^{-βu}`. Not monotone: it peaks at `u = 1/β`.
    Erlang { alpha: f64, beta: f64 },
    /// Grid values `φ(kh)`, linearly interpolated, zero past the last node.
    Tabulated(TabulatedKernel),
}

/// Piecewise linear kernel on a uniform grid with compact support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TabulatedSpec", into = "TabulatedSpec")]
pub struct TabulatedKernel {
    step: f64,
    values: Vec<f64>,
    /// `cumulative[k] = ∫₀^{kh} φ`, exact for the interpolant.
    cumulative: Vec<f64>,
    /// `suffix_max[k] = max_{j ≥ k} values[j]`.
    suffix_max: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedSpec {
    step: f64,
    values: Vec<f64>,
}

impl From<TabulatedSpec> for TabulatedKernel {
    fn from(spec: TabulatedSpec) -> Self {
        TabulatedKernel::new(spec.step, spec.values)
    }
}

impl From<TabulatedKernel> for TabulatedSpec {
    fn from(kernel: TabulatedKernel) -> Self {
        TabulatedSpec {
            step: kernel.step,
            values: kernel.values,
        }
    }
}

impl TabulatedKernel {
    /// Builds the table. Values are not validated here; see
    /// [`Kernel::validate`].
    pub fn new(step: f64, values: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                acc += 0.5 * step * (values[k - 1] + v);
            }
            cumulative.push(acc);
        }
        let mut suffix_max = values.clone();
        for k in (0..suffix_max.len().saturating_sub(1)).rev() {
            suffix_max[k] = suffix_max[k].max(suffix_max[k + 1]);
        }
        TabulatedKernel {
            step,
            values,
            cumulative,
            suffix_max,
        }
    }

    /// Tabulates `kernel` on `[0, horizon]` with the given step.
    pub fn sample_from(kernel: &Kernel, step: f64, horizon: f64) -> Self {
        let n = (horizon / step).round() as usize;
        let values = (0..=n).map(|k| kernel.value(k as f64 * step)).collect();
        TabulatedKernel::new(step, values)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right end of the support.
    pub fn support(&self) -> f64 {
        self.values.len().saturating_sub(1) as f64 * self.step
    }

    fn locate(&self, u: f64) -> Option<(usize, f64)> {
        if u < 0.0 || self.values.len() < 2 || u > self.support() {
            return None;
        }
        let k = ((u / self.step).floor() as usize).min(self.values.len() - 2);
        Some((k, u - k as f64 * self.step))
    }

    fn value(&self, u: f64) -> f64 {
        match self.locate(u) {
            Some((k, r)) => {
                let w = r / self.step;
                self.values[k] * (1.0 - w) + self.values[k + 1] * w
            }
            None if u == 0.0 && self.values.len() == 1 => self.values[0],
            None => 0.0,
        }
    }

    fn integral(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self.locate(u) {
            Some((k, r)) => {
                let slope = (self.values[k + 1] - self.values[k]) / self.step;
                self.cumulative[k] + self.values[k] * r + 0.5 * slope * r * r
            }
            None => self.cumulative.last().copied().unwrap_or(0.0),
        }
    }

    fn tail_majorant(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        if u > self.support() || self.values.is_empty() {
            return 0.0;
        }
        let k = ((u / self.step).floor() as usize).min(self.values.len() - 1);
        self.suffix_max[k]
    }

    fn l1(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn first_moment(&self) -> f64 {
        // Exact for the linear interpolant on each cell.
        let h = self.step;
        self.values
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let a = k as f64 * h;
                let slope = (w[1] - w[0]) / h;
                // ∫_0^h (a + r)(w0 + slope r) dr
                w[0] * (a * h + 0.5 * h * h) + slope * (0.5 * a * h * h + h * h * h / 3.0)
            })
            .sum()
    }

    /// Inverse-CDF draw from the density `φ / ‖φ‖₁`.
    fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = self.l1();
        let target = rng.random::<f64>() * total;
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(k) => return k as f64 * self.step,
            Err(k) => k.saturating_sub(1).min(self.values.len() - 2),
        };
        let need = target - self.cumulative[k];
        let a = self.values[k];
        let b = (self.values[k + 1] - a) / self.step;
        // Solve a r + b r²/2 = need on [0, h].
        let r = if b.abs() < 1e-300 {
            if a > 0.0 {
                need / a
            } else {
                0.0
            }
        } else {
            let disc = (a * a + 2.0 * b * need).max(0.0);
            2.0 * need / (a + disc.sqrt())
        };
        k as f64 * self.step + r.clamp(0.0, self.step)
    }
}

/// Why a kernel was rejected by [`stability_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum StabilityViolation {
    NonPositiveParameter { name: &'static str, value: f64 },
    NegativeValue { index: usize, value: f64 },
    NonFinite,
    BadStep(f64),
    L1NotBelowOne { l1: f64 },
}

impl fmt::Display for StabilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityViolation::NonPositiveParameter { name, value } => {
                write!(f, "kernel parameter {name} = {value} must be positive")
            }
            StabilityViolation::NegativeValue { index, value } => {
                write!(f, "tabulated kernel entry {index} is negative ({value})")
            }
            StabilityViolation::NonFinite => write!(f, "kernel has non-finite entries"),
            StabilityViolation::BadStep(h) => write!(f, "tabulated step {h} must be positive"),
            StabilityViolation::L1NotBelowOne { l1 } => {
                write!(f, "‖φ‖₁ = {l1} is not below 1 (explosive process)")
            }
        }
    }
}

impl std::error::Error for StabilityViolation {}

impl Kernel {
    pub fn exponential(alpha: f64, beta: f64) -> Self {
        Kernel::Exponential { alpha, beta }
    }

    pub fn erlang(alpha: f64, beta: f64) -> Self {
        Kernel::Erlang { alpha, beta }
    }

    pub fn tabulated(step: f64, values: Vec<f64>) -> Self {
        Kernel::Tabulated(TabulatedKernel::new(step, values))
    }

    /// Structural checks that do not involve ‖φ‖₁.
    pub fn validate(&self) -> Result<(), StabilityViolation> {
        match self {
            Kernel::Zero => Ok(()),
            Kernel::Exponential { alpha, beta } | Kernel::Erlang { alpha, beta } => {
                if !alpha.is_finite() || !beta.is_finite() {
                    return Err(StabilityViolation::NonFinite);
                }
                if *alpha <= 0.0 {
                    return Err(StabilityViolation::NonPositiveParameter {
                        name: "alpha",
                        value: *alpha,
                    });
                }
                if *beta <= 0.0 {
                    return Err(StabilityViolation::NonPositiveParameter {
                        name: "beta",
                        value: *beta,
                    });
                }
                Ok(())
            }
            Kernel::Tabulated(t) => {
                if !(t.step > 0.0) || !t.step.is_finite() {
                    return Err(StabilityViolation::BadStep(t.step));
                }
                if t.values.iter().any(|v| !v.is_finite()) {
                    return Err(StabilityViolation::NonFinite);
                }
                if let Some((index, &value)) = t.values.iter().enumerate().find(|(_, v)| **v < 0.0)
                {
                    return Err(StabilityViolation::NegativeValue { index, value });
                }
                Ok(())
            }
        }
    }

    /// `φ(u)`, zero for negative arguments.
    pub fn value(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { alpha, beta } => alpha * (-beta * u).exp(),
            Kernel::Erlang { alpha, beta } => alpha * u * (-beta * u).exp(),
            Kernel::Tabulated(t) => t.value(u),
        }
    }

    /// `Φ(u) = ∫₀^u φ(v) dv`.
    pub fn integral(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { alpha, beta } => alpha / beta * (-(-beta * u).exp_m1()),
            Kernel::Erlang { alpha, beta } => {
                let bu = beta * u;
                // 1 - e^{-x}(1 + x), written to stay accurate for small x.
                let tail = -(-bu).exp_m1() - bu * (-bu).exp();
                alpha / (beta * beta) * tail
            }
            Kernel::Tabulated(t) => t.integral(u),
        }
    }

    /// `‖φ‖₁`, closed form for parametric families and exact trapezoid
    /// quadrature for tables.
    pub fn l1_norm(&self) -> Result<f64> {
        self.validate().map_err(|v| match v {
            StabilityViolation::NegativeValue { .. } | StabilityViolation::NonFinite => {
                Error::InvalidKernel(v.to_string())
            }
            other => Error::Stability(other),
        })?;
        Ok(self.l1_unchecked())
    }

    pub(crate) fn l1_unchecked(&self) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { alpha, beta } => alpha / beta,
            Kernel::Erlang { alpha, beta } => alpha / (beta * beta),
            Kernel::Tabulated(t) => t.l1(),
        }
    }

    /// `∫₀^∞ u φ(u) du`.
    pub fn first_moment(&self) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { alpha, beta } => alpha / (beta * beta),
            Kernel::Erlang { alpha, beta } => 2.0 * alpha / (beta * beta * beta),
            Kernel::Tabulated(t) => t.first_moment(),
        }
    }

    /// A non-increasing function with `tail_majorant(u) ≥ sup_{v ≥ u} φ(v)`.
    pub fn tail_majorant(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { .. } => self.value(u),
            Kernel::Erlang { beta, .. } => self.value(u.max(1.0 / beta)),
            Kernel::Tabulated(t) => t.tail_majorant(u),
        }
    }

    /// Right end of the support, `None` when unbounded.
    pub fn support(&self) -> Option<f64> {
        match self {
            Kernel::Zero => Some(0.0),
            Kernel::Tabulated(t) => Some(t.support()),
            _ => None,
        }
    }

    /// Grid step used for ψ when the caller does not supply one.
    pub fn default_step(&self) -> f64 {
        match self {
            Kernel::Zero => 0.01,
            Kernel::Exponential { beta, .. } | Kernel::Erlang { beta, .. } => {
                0.01f64.min(1.0 / (10.0 * beta))
            }
            Kernel::Tabulated(t) => t.step,
        }
    }

    /// Draws an offspring delay from the normalized density `φ / ‖φ‖₁`.
    pub fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { beta, .. } => Exp::new(*beta).unwrap().sample(rng),
            Kernel::Erlang { beta, .. } => {
                let e = Exp::new(*beta).unwrap();
                e.sample(rng) + e.sample(rng)
            }
            Kernel::Tabulated(t) => t.sample_delay(rng),
        }
    }
}

/// Accepts a kernel iff it is non-negative, `‖φ‖₁ < 1` and its first moment
/// is finite.
///
/// First moments are finite by construction for every supported family:
/// parametric kernels decay exponentially and tables have compact support.
pub fn stability_check(kernel: &Kernel) -> Result<(), StabilityViolation> {
    kernel.validate()?;
    let l1 = kernel.l1_unchecked();
    if !(l1 < 1.0) {
        return Err(StabilityViolation::L1NotBelowOne { l1 });
    }
    Ok(())
}

/// `∫₀^∞ φ(u) du`.
pub fn kernel_l1(kernel: &Kernel) -> Result<f64> {
    kernel.l1_norm()
}

//! Renewal density `ψ = Σ_{n≥1} φ^{*n}` on a uniform grid.
//!
//! ψ is the unique solution of `ψ = φ + φ * ψ`. The solver runs Picard
//! iteration on the grid with trapezoidal convolution; the map is a
//! contraction with factor `‖φ‖₁ < 1`, so it converges from `ψ₀ = 0`
//! monotonically upward through the partial sums of the series.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use super::{stability_check, Kernel};
use crate::error::{Error, Result};

/// Grid solution of the renewal equation.
#[derive(Debug, Clone, Serialize)]
pub struct PsiTable {
    pub step: f64,
    pub horizon: f64,
    pub values: Vec<f64>,
    /// Max renewal defect `|ψ − φ − φ*ψ|` over the grid.
    pub residual: f64,
    pub tol: f64,
    pub iterations: usize,
    /// Trapezoid estimate of `∫₀^U ψ`.
    pub l1_estimate: f64,
    /// Upper bound on the truncated mass `∫_U^∞ ψ`.
    pub tail_bound: f64,
    #[serde(skip)]
    cumulative: Vec<f64>,
    #[serde(skip)]
    cumulative2: Vec<f64>,
}

/// Settings for [`PsiTable`] construction.
#[derive(Debug, Clone)]
pub struct PsiSolver {
    pub step: Option<f64>,
    pub horizon: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation weight in `(0, 1]`; `1` is plain Picard.
    pub damping: f64,
}

impl PsiSolver {
    pub fn new(horizon: f64) -> Self {
        PsiSolver {
            step: None,
            horizon,
            tol: 1e-8,
            max_iter: 10_000,
            damping: 1.0,
        }
    }

    pub fn step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn solve(&self, kernel: &Kernel) -> Result<PsiTable> {
        stability_check(kernel)?;
        let step = self.step.unwrap_or_else(|| kernel.default_step());
        if !(step > 0.0) || !(self.horizon > 0.0) || !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "psi grid needs step > 0, horizon > 0 and tol > 0 (got {step}, {}, {})",
                self.horizon, self.tol
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping {} must lie in (0, 1]",
                self.damping
            )));
        }
        let n = (self.horizon / step).ceil() as usize + 1;
        let phi: Vec<f64> = (0..n).map(|k| kernel.value(k as f64 * step)).collect();

        let (values, residual, iterations) = if phi.iter().all(|&v| v == 0.0) {
            (vec![0.0; n], 0.0, 0)
        } else {
            let conv = TrapezoidConvolution::new(&phi, step);
            let mut psi = vec![0.0; n];
            let mut iterations = 0;
            loop {
                let image = conv.apply_plus_phi(&psi);
                let residual = max_abs_diff(&image, &psi);
                if residual <= self.tol {
                    break (psi, residual, iterations);
                }
                if iterations >= self.max_iter || !residual.is_finite() {
                    return Err(Error::numerical(
                        format!("renewal iteration did not converge in {iterations} steps"),
                        residual,
                    ));
                }
                let w = self.damping;
                for (p, v) in psi.iter_mut().zip(&image) {
                    *p = (1.0 - w) * *p + w * v;
                }
                iterations += 1;
            }
        };

        let cumulative = cumulative_trapezoid(&values, step);
        let cumulative2 = cumulative_trapezoid(&cumulative, step);
        let horizon = (n - 1) as f64 * step;
        let l1_estimate = *cumulative.last().unwrap();
        Ok(PsiTable {
            step,
            horizon,
            tail_bound: tail_bound(kernel, horizon),
            values,
            residual,
            tol: self.tol,
            iterations,
            l1_estimate,
            cumulative,
            cumulative2,
        })
    }
}

/// Solves `ψ = φ + φ*ψ` on `[0, horizon]` with grid step `step`.
pub fn solve_psi(kernel: &Kernel, step: f64, horizon: f64, tol: f64) -> Result<PsiTable> {
    PsiSolver::new(horizon).step(step).tol(tol).solve(kernel)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn cumulative_trapezoid(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * step * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// `∫_U^∞ ψ` bound used to keep the L1 identity check honest.
fn tail_bound(kernel: &Kernel, horizon: f64) -> f64 {
    let l1 = kernel.l1_unchecked();
    match kernel {
        Kernel::Zero => 0.0,
        Kernel::Exponential { alpha, beta } => {
            // ψ(t) = α e^{-(β-α)t}.
            alpha / (beta - alpha) * (-(beta - alpha) * horizon).exp()
        }
        Kernel::Erlang { alpha, beta } => {
            // Chernoff bound: ∫_U^∞ ψ ≤ e^{-sU} φ̂(s)/(1-φ̂(s)), with
            // φ̂(s) = ∫ e^{su} φ(u) du = α/(β-s)², evaluated where φ̂(s) = q.
            let q = 0.5 * (1.0 + l1);
            let s = beta - (alpha / q).sqrt();
            (-s * horizon).exp() * q / (1.0 - q)
        }
        Kernel::Tabulated(t) => {
            let support = t.support();
            if support <= 0.0 {
                return 0.0;
            }
            l1.powf((horizon / support).ceil()) / (1.0 - l1)
        }
    }
}

/// Trapezoidal causal convolution `h Σ' φ_{k-j} ψ_j` via FFT.
struct TrapezoidConvolution {
    phi: Vec<f64>,
    phi_hat: Vec<Complex64>,
    step: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl TrapezoidConvolution {
    fn new(phi: &[f64], step: f64) -> Self {
        let len = (2 * phi.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut phi_hat: Vec<Complex64> = phi
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(len)
            .collect();
        forward.process(&mut phi_hat);
        TrapezoidConvolution {
            phi: phi.to_vec(),
            phi_hat,
            step,
            forward,
            inverse,
        }
    }

    /// Returns `φ + (φ * ψ)` on the grid.
    fn apply_plus_phi(&self, psi: &[f64]) -> Vec<f64> {
        let n = self.phi.len();
        let len = self.phi_hat.len();
        let mut buf: Vec<Complex64> = psi
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(len)
            .collect();
        self.forward.process(&mut buf);
        for (b, p) in buf.iter_mut().zip(&self.phi_hat) {
            *b *= p;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / len as f64;
        let h = self.step;
        (0..n)
            .map(|k| {
                let conv = if k == 0 {
                    0.0
                } else {
                    let full = buf[k].re * scale;
                    h * (full - 0.5 * self.phi[k] * psi[0] - 0.5 * self.phi[0] * psi[k])
                };
                self.phi[k] + conv
            })
            .collect()
    }
}

impl PsiTable {
    fn check_range(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        Ok(())
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.values.len() - 1;
        if last == 0 {
            return (0, 0.0);
        }
        let k = ((t / self.step).floor() as usize).min(last - 1);
        (k, t - k as f64 * self.step)
    }

    /// Linear interpolation of ψ.
    pub fn value(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let (k, r) = self.locate(t);
        if k + 1 >= self.values.len() {
            return Ok(self.values[k]);
        }
        let w = r / self.step;
        Ok(self.values[k] * (1.0 - w) + self.values[k + 1] * w)
    }

    /// `∫₀^t ψ`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        Ok(self.integral_unchecked(t))
    }

    fn integral_unchecked(&self, t: f64) -> f64 {
        let (k, r) = self.locate(t);
        if k + 1 >= self.values.len() {
            return self.cumulative[k];
        }
        let slope = (self.values[k + 1] - self.values[k]) / self.step;
        self.cumulative[k] + self.values[k] * r + 0.5 * slope * r * r
    }

    /// `∫₀^t ∫₀^s ψ(u) du ds = ∫₀^t (t − u) ψ(u) du`.
    pub fn double_integral(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let (k, r) = self.locate(t);
        if k + 1 >= self.values.len() {
            return Ok(self.cumulative2[k]);
        }
        let a = self.cumulative[k];
        let b = self.integral_unchecked(t);
        Ok(self.cumulative2[k] + 0.5 * r * (a + b))
    }

    /// `E[λ_t] = μ (1 + ∫₀^t ψ)`.
    pub fn mean_intensity(&self, mu: f64, t: f64) -> Result<f64> {
        Ok(mu * (1.0 + self.integral(t)?))
    }

    /// `∫₀^t E[λ_s] ds = μ (t + ∫₀^t (t−u) ψ(u) du)`, the mean of `H_t`.
    pub fn expected_count(&self, mu: f64, t: f64) -> Result<f64> {
        Ok(mu * (t + self.double_integral(t)?))
    }

    /// Grid nodes `kh`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.step)
    }

    /// Two-column CSV `t,psi`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "psi"])?;
        for (t, v) in self.times().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `E[λ_t]` for a model with baseline `mu`, read off a solved ψ table.
pub fn mean_intensity(psi: &PsiTable, mu: f64, t: f64) -> Result<f64> {
    psi.mean_intensity(mu, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TabulatedKernel;

    /// Direct O(n²) Picard partial sums, independent of the FFT path.
    fn picard_direct(kernel: &Kernel, step: f64, horizon: f64, iters: usize) -> Vec<Vec<f64>> {
        let n = (horizon / step).ceil() as usize + 1;
        let phi: Vec<f64> = (0..n).map(|k| kernel.value(k as f64 * step)).collect();
        let mut out = Vec::new();
        let mut psi = vec![0.0; n];
        for _ in 0..iters {
            let next: Vec<f64> = (0..n)
                .map(|k| {
                    let mut c = 0.0;
                    for j in 0..=k {
                        let w = if j == 0 || j == k { 0.5 } else { 1.0 };
                        c += w * phi[k - j] * psi[j];
                    }
                    phi[k] + if k == 0 { 0.0 } else { step * c }
                })
                .collect();
            psi = next;
            out.push(psi.clone());
        }
        out
    }

    #[test]
    fn exponential_matches_closed_form() {
        let k = Kernel::exponential(1.0, 2.0);
        let table = solve_psi(&k, 0.01, 10.0, 1e-8).unwrap();
        assert!(table.residual <= 1e-8);
        let err = table
            .times()
            .zip(&table.values)
            .map(|(t, v)| (v - (-t).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "sup error {err}");
        assert!((table.l1_estimate - 1.0).abs() < 1e-3);
        let expected_tail = (-10.0f64).exp();
        assert!((table.tail_bound - expected_tail).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_gives_zero_psi() {
        let table = solve_psi(&Kernel::Zero, 0.01, 5.0, 1e-8).unwrap();
        assert!(table.values.iter().all(|&v| v == 0.0));
        assert_eq!(table.l1_estimate, 0.0);
        assert_eq!(table.mean_intensity(2.0, 3.0).unwrap(), 2.0);
        assert_eq!(table.expected_count(2.0, 3.0).unwrap(), 6.0);
    }

    #[test]
    fn matches_direct_picard_and_iterates_increase() {
        for kernel in [
            Kernel::exponential(1.0, 2.0),
            Kernel::erlang(1.0, 2.0),
            Kernel::tabulated(0.05, vec![0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0]),
        ] {
            let step = 0.05;
            let table = solve_psi(&kernel, step, 12.0, 1e-10).unwrap();
            let iterates = picard_direct(&kernel, step, 12.0, 80);
            for pair in iterates.windows(2) {
                for (a, b) in pair[0].iter().zip(&pair[1]) {
                    assert!(*a <= b + 1e-14, "{kernel:?}: Picard iterates must increase");
                }
            }
            let last = iterates.last().unwrap();
            for (a, b) in last.iter().zip(&table.values) {
                assert!(*a <= b + 1e-9);
                assert!((a - b).abs() < 1e-8, "{kernel:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn l1_identity_within_tail_bound() {
        // ‖φ‖₁ = 0.5 for all three, so ‖ψ‖₁ = 1.
        let quad_tol = 2e-4;
        for kernel in [
            Kernel::exponential(1.0, 2.0),
            Kernel::erlang(2.0, 2.0),
            Kernel::Tabulated(TabulatedKernel::sample_from(
                &Kernel::exponential(1.0, 2.0),
                0.01,
                10.0,
            )),
        ] {
            let l1 = kernel.l1_norm().unwrap();
            let target = l1 / (1.0 - l1);
            for horizon in [5.0, 20.0, 40.0] {
                let table = PsiSolver::new(horizon).solve(&kernel).unwrap();
                let gap = (table.l1_estimate - target).abs();
                assert!(
                    gap <= table.tail_bound + quad_tol,
                    "{kernel:?} U={horizon}: gap {gap}, tail {}",
                    table.tail_bound
                );
            }
        }
    }

    #[test]
    fn mean_intensity_closed_form() {
        let table = PsiSolver::new(60.0).solve(&Kernel::exponential(1.0, 2.0)).unwrap();
        let at_one = table.mean_intensity(1.0, 1.0).unwrap();
        assert!((at_one - (2.0 - (-1.0f64).exp())).abs() < 1e-5);
        // Trapezoid error is O(h²) per unit of ∫ψ.
        let far = table.mean_intensity(1.0, 60.0).unwrap();
        assert!((far - 2.0).abs() < 3e-5, "{far}");
        // ∫₀^T E[λ] = 2T − (1 − e^{−T}).
        let t: f64 = 37.3;
        let expected = 2.0 * t - (1.0 - (-t).exp());
        assert!((table.expected_count(1.0, t).unwrap() - expected).abs() < 3e-5 * t);
        assert!(matches!(
            table.mean_intensity(1.0, 61.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn damped_iteration_reaches_same_fixed_point() {
        let k = Kernel::exponential(0.8, 1.0);
        let plain = PsiSolver::new(30.0).solve(&k).unwrap();
        let damped = PsiSolver::new(30.0).damping(0.6).solve(&k).unwrap();
        assert!(damped.iterations > plain.iterations);
        assert!(max_abs_diff(&plain.values, &damped.values) < 1e-7);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let k = Kernel::exponential(0.95, 1.0);
        match PsiSolver::new(50.0).max_iter(3).solve(&k) {
            Err(Error::NumericalFailure { residual, .. }) => assert!(residual > 1e-8),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn unstable_kernel_rejected() {
        assert!(matches!(
            solve_psi(&Kernel::exponential(3.0, 2.0), 0.01, 1.0, 1e-8),
            Err(Error::Stability(_))
        ));
    }
}

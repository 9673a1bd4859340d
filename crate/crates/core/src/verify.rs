//! Monte Carlo checks of the structural identities behind the normal
//! approximation: the integration-by-parts balance, positivity of the
//! add-point derivative of the intensity, the offspring bound, martingale
//! compensators and the two remainder estimates.
//!
//! Conditional statements in `t` are checked through insertion times
//! stratified over `[0, T]`; an essential supremum becomes a maximum over
//! strata. Each check has a [`Variant::Control`] that breaks one ingredient
//! on purpose and is expected to fail.

use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::engine::{
    simulate_coupled_with, simulate_thinning, CoupledOptions, CoupledPathResult, Coupling, HawkesModel,
};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, PsiSolver};
use crate::parallel::try_map_replications;
use crate::rng::{domain, stream, StreamRng};
use crate::stats::fit_rate;
use crate::theory::AsymptoticParams;

/// Pathwise slack for sign and containment checks.
pub const PATHWISE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    IntegrationByParts,
    DerivativePositivity,
    OffspringBound,
    Martingale,
    Remainder,
    RemainderThirdMoment,
}

impl Lemma {
    fn label(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Which version of a check to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Genuine,
    /// Deliberately broken; must fail for the genuine check to mean anything.
    Control,
}

/// Closed acceptance interval; `None` is an open end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Band {
    pub fn new(lower: f64, upper: f64) -> Self {
        Band {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn at_most(upper: f64) -> Self {
        Band { lower: None, upper: Some(upper) }
    }

    pub fn contains(&self, x: f64) -> bool {
        !x.is_nan()
            && self.lower.is_none_or(|lo| x >= lo)
            && self.upper.is_none_or(|hi| x <= hi)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub lemma: Lemma,
    pub variant: Variant,
    pub configuration: serde_json::Value,
    pub replications: u64,
    pub statistic: f64,
    pub band: Band,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub details: serde_json::Value,
}

impl LemmaReport {
    /// Genuine checks should not fail; controls should.
    pub fn expectation_met(&self) -> bool {
        match self.variant {
            Variant::Genuine => self.verdict != Verdict::Fail,
            Variant::Control => self.verdict == Verdict::Fail,
        }
    }

    /// One aligned table row.
    pub fn table_row(&self) -> String {
        let band = |b: Option<f64>, open: &str| b.map_or(open.to_string(), |v| format!("{v:.4}"));
        format!(
            "{:<24} {:<8} {:>9} {:>12.5} [{}, {}] {:?}{}",
            serde_json::to_value(self.lemma).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            if self.variant == Variant::Control { "control" } else { "genuine" },
            self.replications,
            self.statistic,
            band(self.band.lower, "-inf"),
            band(self.band.upper, "inf"),
            self.verdict,
            if self.expectation_met() { "" } else { "  <-- unexpected" },
        )
    }
}

struct Builder {
    lemma: Lemma,
    variant: Variant,
    configuration: serde_json::Value,
    replications: u64,
    notes: Vec<String>,
}

impl Builder {
    fn new(lemma: Lemma, variant: Variant, model: &HawkesModel, extra: serde_json::Value) -> Self {
        Builder {
            lemma,
            variant,
            configuration: json!({ "model": model, "parameters": extra }),
            replications: 0,
            notes: Vec::new(),
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self, statistic: f64, band: Band, inconclusive: bool, details: serde_json::Value) -> LemmaReport {
        let verdict = if !band.contains(statistic) {
            if inconclusive {
                Verdict::Inconclusive
            } else {
                Verdict::Fail
            }
        } else if inconclusive {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        LemmaReport {
            lemma: self.lemma,
            variant: self.variant,
            configuration: self.configuration,
            replications: self.replications,
            statistic,
            band,
            verdict,
            notes: self.notes,
            details,
        }
    }
}

/// Mean and standard error of the mean.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `x / se`, with `0/0 = 0` for degenerate, exactly known quantities.
fn z_score(x: f64, se: f64) -> f64 {
    if se > 0.0 {
        x / se
    } else if x == 0.0 {
        0.0
    } else {
        x.signum() * f64::INFINITY
    }
}

/// Monte Carlo standard error of an OLS log-log slope, from the relative
/// errors `se/mean` at each horizon (delta method, independent horizons).
fn slope_mc_se(points: &[(f64, f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    points
        .iter()
        .zip(&xs)
        .map(|(p, x)| ((x - xbar) / sxx * p.2 / p.1).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// True when `slope ± 2 se` reaches across an edge of `band`.
fn straddles(band: &Band, slope: f64, se: f64) -> bool {
    let near = |edge: Option<f64>| edge.is_some_and(|e| (slope - e).abs() < 2.0 * se);
    near(band.lower) || near(band.upper)
}

fn rng_for(seed: u64, lemma: Lemma, labels: &[u64], index: u64) -> StreamRng {
    let mut path = vec![domain::VERIFY, lemma.label()];
    path.extend_from_slice(labels);
    stream(seed, &path, index)
}

/// Insertion time for replication `i` of `n`, stratified over `(lo, hi)`.
fn stratified_time(rng: &mut StreamRng, i: u64, n: u64, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    let t = lo + (hi - lo) * (i as f64 + u) / n as f64;
    t.clamp(lo + (hi - lo) * 1e-12, hi - (hi - lo) * 1e-12)
}

fn coupled(
    model: &HawkesModel,
    horizon: f64,
    t0: f64,
    coupling: Coupling,
    rng: &mut StreamRng,
) -> Result<CoupledPathResult> {
    let options = CoupledOptions {
        coupling,
        ..Default::default()
    };
    simulate_coupled_with(model, horizon, t0, &options, rng)
}

/// `E[H_T M_T] = E[∫₀^T λ_t (1 + Ĥ_T^t) dt]`, the integration-by-parts
/// formula with `F = H_T` and `Z ≡ 1`.
///
/// The time integral is estimated by one insertion time per replication,
/// stratified over `[0, T]`. The statistic is the mean paired difference,
/// accepted within three standard errors. The control drops the `1` from
/// `D H_T = 1 + Ĥ`.
pub fn check_ibp(model: &HawkesModel, horizon: f64, reps: u64, seed: u64, variant: Variant) -> Result<LemmaReport> {
    let mut b = Builder::new(
        Lemma::IntegrationByParts,
        variant,
        model,
        json!({ "horizon": horizon, "functional": "H_T", "integrand": "Z = 1" }),
    );
    b.replications = reps;
    b.note("indirect coverage of the duality relation E_t[φ(F) δ(zẐ)] = 0 through the balance it implies");
    let rows = try_map_replications(reps, |i| {
        let mut rng = rng_for(seed, Lemma::IntegrationByParts, &[], i);
        let t0 = stratified_time(&mut rng, i, reps, 0.0, horizon);
        let c = coupled(model, horizon, t0, Coupling::Shared, &mut rng)?;
        let h = c.base.count as f64;
        let lhs = h * c.base.martingale;
        let derivative = match variant {
            Variant::Genuine => 1.0 + c.extra_count as f64,
            Variant::Control => c.extra_count as f64,
        };
        let rhs = horizon * c.base_intensity_at_t0 * derivative;
        Ok::<_, Error>((lhs, rhs))
    })?;
    let lhs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let (l, l_se) = mean_se(&lhs);
    let (r, r_se) = mean_se(&rhs);
    let (d, d_se) = mean_se(&diff);
    let half = 3.0 * d_se;
    let inconclusive = half > 0.2 * l.abs() && half > 0.0;
    if inconclusive {
        b.note("band wider than 20% of the LHS magnitude");
    }
    Ok(b.finish(
        d,
        Band::new(-half, half),
        inconclusive,
        json!({ "lhs": l, "lhs_se": l_se, "rhs": r, "rhs_se": r_se, "difference_se": d_se }),
    ))
}

/// `λ̂_s ≥ 0` at every grid and event time, and every base jump is a
/// shifted jump. Pathwise: the statistic is the number of offending paths.
///
/// The control draws independent acceptance levels for the two paths.
pub fn check_derivative_positivity(
    model: &HawkesModel,
    horizon: f64,
    insertion_grid: &[f64],
    reps: u64,
    seed: u64,
    variant: Variant,
) -> Result<LemmaReport> {
    if insertion_grid.is_empty() {
        return Err(Error::Config("empty insertion grid".into()));
    }
    let mut b = Builder::new(
        Lemma::DerivativePositivity,
        variant,
        model,
        json!({ "horizon": horizon, "insertion_grid": insertion_grid }),
    );
    b.replications = reps;
    let coupling = match variant {
        Variant::Genuine => Coupling::Shared,
        Variant::Control => Coupling::Independent,
    };
    let outcomes = try_map_replications(reps, |i| {
        let mut rng = rng_for(seed, Lemma::DerivativePositivity, &[], i);
        let t0 = insertion_grid[(i % insertion_grid.len() as u64) as usize];
        let c = coupled(model, horizon, t0, coupling, &mut rng)?;
        let bad = c.min_lambda_hat < -PATHWISE_SLACK
            || c.containment_violations > 0
            || !c.base_contained_in_shifted();
        Ok::<_, Error>(bad.then(|| {
            json!({
                "replication": i,
                "t0": t0,
                "min_lambda_hat": c.min_lambda_hat,
                "containment_violations": c.containment_violations,
                "base_times": c.base.log.times,
                "shifted_times": c.shifted.log.times,
            })
        }))
    })?;
    let offending: Vec<serde_json::Value> = outcomes.into_iter().flatten().collect();
    let count = offending.len();
    let first = offending.into_iter().next();
    if let Some(path) = &first {
        b.note(format!("first offending path: replication {}", path["replication"]));
    }
    Ok(b.finish(
        count as f64,
        Band::new(0.0, 0.0),
        false,
        json!({ "violating_paths": count, "first_violation": first }),
    ))
}

/// `E[∫_{t₀}^T λ̂_s ds] ≤ ‖φ‖₁ (1 + ‖ψ‖₁)` in every insertion stratum.
///
/// The statistic is the largest standardized excess `(estimate − bound)/SE`
/// over strata, accepted up to 3. The control uses the bound `‖φ‖₁`.
pub fn check_offspring_bound(
    model: &HawkesModel,
    horizon: f64,
    strata: usize,
    reps_per_stratum: u64,
    seed: u64,
    variant: Variant,
) -> Result<LemmaReport> {
    let params = AsymptoticParams::from_model(model)?;
    let bound = match variant {
        Variant::Genuine => params.offspring_bound,
        Variant::Control => params.l1,
    };
    let mut b = Builder::new(
        Lemma::OffspringBound,
        variant,
        model,
        json!({ "horizon": horizon, "strata": strata, "bound": bound }),
    );
    b.replications = reps_per_stratum * strata as u64;
    b.note("the essential supremum over t is replaced by a maximum over stratified insertion times");
    let mut worst = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for j in 0..strata {
        let lo = horizon * j as f64 / strata as f64;
        let hi = horizon * (j + 1) as f64 / strata as f64;
        let values = try_map_replications(reps_per_stratum, |i| {
            let mut rng = rng_for(seed, Lemma::OffspringBound, &[j as u64], i);
            let t0 = stratified_time(&mut rng, i, reps_per_stratum, lo, hi);
            Ok::<_, Error>(coupled(model, horizon, t0, Coupling::Shared, &mut rng)?.lambda_hat_integral)
        })?;
        let (mean, se) = mean_se(&values);
        let z = z_score(mean - bound, se);
        worst = worst.max(z);
        rows.push(json!({ "t0_low": lo, "t0_high": hi, "mean": mean, "se": se, "z": z }));
    }
    let far_ratio = rows
        .first()
        .and_then(|r| r["mean"].as_f64())
        .map(|m| if bound > 0.0 { m / bound } else { f64::NAN });
    Ok(b.finish(
        worst,
        Band::at_most(3.0),
        false,
        json!({ "bound": bound, "strata": rows, "earliest_stratum_ratio": far_ratio }),
    ))
}

/// `M_c = H_c − Λ_c` and `M̂_c = Ĥ_c − ∫_{t₀}^c λ̂` have mean zero at each
/// checkpoint `c`.
///
/// Insertion times are stratified over `(0, min c)`. The statistic is the
/// largest `|mean|/SE`, accepted up to 4. The control drops every kernel
/// term from both compensators.
pub fn check_martingale(
    model: &HawkesModel,
    horizon: f64,
    checkpoints: &[f64],
    reps: u64,
    seed: u64,
    variant: Variant,
) -> Result<LemmaReport> {
    let first = checkpoints.iter().cloned().fold(f64::INFINITY, f64::min);
    if checkpoints.is_empty() || !(first > 0.0) || checkpoints.iter().any(|&c| c > horizon) {
        return Err(Error::Config(format!("checkpoints {checkpoints:?} must lie in (0, {horizon}]")));
    }
    let mut b = Builder::new(
        Lemma::Martingale,
        variant,
        model,
        json!({ "horizon": horizon, "checkpoints": checkpoints }),
    );
    b.replications = reps;
    let rows = try_map_replications(reps, |i| {
        let mut rng = rng_for(seed, Lemma::Martingale, &[], i);
        let t0 = stratified_time(&mut rng, i, reps, 0.0, first);
        let c = coupled(model, horizon, t0, Coupling::Shared, &mut rng)?;
        let values: Vec<(f64, f64)> = checkpoints
            .iter()
            .map(|&cp| {
                let h = c.base.log.count_until(cp) as f64;
                let extra = c.extra_count_until(cp) as f64;
                match variant {
                    Variant::Genuine => (
                        h - c.base.log.compensator_at(&model.kernel, model.mu, cp),
                        extra - c.lambda_hat_integral_until(model, cp),
                    ),
                    Variant::Control => (h - model.mu * cp, extra),
                }
            })
            .collect();
        Ok::<_, Error>(values)
    })?;
    let mut worst: f64 = 0.0;
    let mut table = Vec::new();
    for (k, &cp) in checkpoints.iter().enumerate() {
        let m: Vec<f64> = rows.iter().map(|r| r[k].0).collect();
        let mh: Vec<f64> = rows.iter().map(|r| r[k].1).collect();
        let (mm, ms) = mean_se(&m);
        let (hm, hs) = mean_se(&mh);
        let (zm, zh) = (z_score(mm, ms), z_score(hm, hs));
        worst = worst.max(zm.abs()).max(zh.abs());
        table.push(json!({ "checkpoint": cp, "m_mean": mm, "m_se": ms, "m_hat_mean": hm, "m_hat_se": hs }));
    }
    Ok(b.finish(worst, Band::new(0.0, 4.0), false, json!({ "checkpoints": table })))
}

/// `E[𝔯_T²] = O(1/T)` for the counting process, where
/// `𝔯_T = (H_T − ∫₀^T E[λ])/√T − M_T/(√T (1 − ‖φ‖₁))`.
///
/// The statistic is the log-log slope over `horizons`, accepted up to −0.8.
/// The control replaces `1/(1 − ‖φ‖₁)` by 1.
pub fn check_remainder(
    model: &HawkesModel,
    horizons: &[f64],
    reps: u64,
    seed: u64,
    variant: Variant,
) -> Result<LemmaReport> {
    if !model.marks.is_dirac_one() {
        return Err(Error::Config("the remainder check needs unit marks".into()));
    }
    let t_max = horizons.iter().cloned().fold(0.0, f64::max);
    let psi = PsiSolver::new(t_max).solve(&model.kernel)?;
    let l1 = model.l1();
    let factor = match variant {
        Variant::Genuine => 1.0 / (1.0 - l1),
        Variant::Control => 1.0,
    };
    let mut b = Builder::new(
        Lemma::Remainder,
        variant,
        model,
        json!({ "horizons": horizons, "psi_step": psi.step }),
    );
    b.replications = reps * horizons.len() as u64;
    let mut points = Vec::new();
    let mut table = Vec::new();
    for (k, &t) in horizons.iter().enumerate() {
        let mean_count = psi.expected_count(model.mu, t)?;
        let r2 = try_map_replications(reps, |i| {
            let mut rng = rng_for(seed, Lemma::Remainder, &[k as u64], i);
            let p = simulate_thinning(model, t, &mut rng)?;
            let y = (p.count as f64 - mean_count) / t.sqrt();
            let r = y - p.martingale * factor / t.sqrt();
            Ok::<_, Error>(r * r)
        })?;
        let (m, se) = mean_se(&r2);
        points.push((t, m, se));
        table.push(json!({ "horizon": t, "mean_r2": m, "se": se }));
    }
    if points.iter().all(|p| p.1 <= 1e-24) {
        b.note("remainder vanishes identically");
        return Ok(b.finish(f64::NEG_INFINITY, Band::at_most(-0.8), false, json!({ "horizons": table })));
    }
    let fit = fit_rate(&points.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>())?;
    let mc_se = slope_mc_se(&points);
    let inconclusive = straddles(&Band::at_most(-0.8), fit.slope, mc_se);
    if inconclusive {
        b.note("the band edge is within two Monte Carlo standard errors of the slope");
    }
    Ok(b.finish(
        fit.slope,
        Band::at_most(-0.8),
        inconclusive,
        json!({ "horizons": table, "fit": fit, "slope_mc_se": mc_se }),
    ))
}

/// `sup_t E[|R_{t,T}|³]` stays bounded in `T`, where `R_{t,T}` is the mark
/// sum of shifted-only jumps minus `m ∫_t^T λ̂`.
///
/// The statistic is the log-log slope of the stratum maximum against `T`,
/// accepted within ±0.15. The control measures the base path's own mark
/// sum over `(t, T]`, which grows with `T`.
pub fn check_r_third_moment(
    model: &HawkesModel,
    horizons: &[f64],
    strata: usize,
    reps_per_stratum: u64,
    seed: u64,
    variant: Variant,
) -> Result<LemmaReport> {
    let m = model.marks.moments().mean;
    let mut b = Builder::new(
        Lemma::RemainderThirdMoment,
        variant,
        model,
        json!({ "horizons": horizons, "strata": strata }),
    );
    b.replications = reps_per_stratum * (strata * horizons.len()) as u64;
    b.note("the essential supremum over t is replaced by a maximum over stratified insertion times");
    let mut points = Vec::new();
    let mut table = Vec::new();
    for (k, &t) in horizons.iter().enumerate() {
        let mut best = (0.0, 0.0);
        for j in 0..strata {
            let lo = t * j as f64 / strata as f64;
            let hi = t * (j + 1) as f64 / strata as f64;
            let cubes = try_map_replications(reps_per_stratum, |i| {
                let mut rng = rng_for(seed, Lemma::RemainderThirdMoment, &[k as u64, j as u64], i);
                let t0 = stratified_time(&mut rng, i, reps_per_stratum, lo, hi);
                let c = coupled(model, t, t0, Coupling::Shared, &mut rng)?;
                let r = match variant {
                    Variant::Genuine => c.extra_mark_sum - m * c.lambda_hat_integral,
                    Variant::Control => c.base.sum - c.base.log.mark_sum_until(t0),
                };
                Ok::<_, Error>(r.abs().powi(3))
            })?;
            let (mean, se) = mean_se(&cubes);
            if mean >= best.0 {
                best = (mean, se);
            }
        }
        points.push((t, best.0, best.1));
        table.push(json!({ "horizon": t, "max_mean_abs_cube": best.0, "se": best.1 }));
    }
    if points.iter().all(|p| p.1 == 0.0) {
        b.note("R vanishes identically");
        return Ok(b.finish(0.0, Band::new(-0.15, 0.15), false, json!({ "horizons": table })));
    }
    let fit = fit_rate(&points.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>())?;
    let band = Band::new(-0.15, 0.15);
    let mc_se = slope_mc_se(&points);
    let inconclusive = straddles(&band, fit.slope, mc_se);
    if inconclusive {
        b.note("a band edge is within two Monte Carlo standard errors of the slope");
    }
    Ok(b.finish(
        fit.slope,
        band,
        inconclusive,
        json!({ "horizons": table, "fit": fit, "slope_mc_se": mc_se }),
    ))
}

/// Checks that never touch the kernel are meaningless for `Kernel::Zero`;
/// callers use this to annotate controls that cannot fail there.
pub fn control_is_vacuous(lemma: Lemma, kernel: &Kernel) -> bool {
    matches!(kernel, Kernel::Zero)
        && matches!(lemma, Lemma::OffspringBound | Lemma::Martingale | Lemma::Remainder)
}

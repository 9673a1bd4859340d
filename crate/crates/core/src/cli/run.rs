use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::{DistanceKind, ExperimentConfig, HorizonDesign};
use crate::engine::{simulate_cluster, simulate_thinning, HawkesModel, Method, PathResult};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, PsiSolver, PsiTable};
use crate::marks::MarkDistribution;
use crate::parallel::{current_threads, try_map_replications};
use crate::rng::{derive_key, domain, stream};
use crate::stats::{
    fit_rate, k_cumulants, smooth_distance_surrogate, smooth_distance_surrogate_conditional,
    wasserstein1_to_normal, ConditionalSample, CumulantEstimates, Debias, Dictionary, DistanceEstimate,
    FunctionalTag, Normalizer, RateFit, Sample, SurrogateEstimator,
};
use crate::theory::AsymptoticParams;
use crate::verify::{self, LemmaReport, Variant};

/// Distance and cumulants at one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct HorizonResult {
    pub horizon: f64,
    pub distance: DistanceEstimate,
    pub cumulants: CumulantEstimates,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub params: AsymptoticParams,
    pub target_variance: f64,
    pub horizons: Vec<HorizonResult>,
    pub fit: RateFit,
}

/// Simulated replications at one horizon, reduced to what the estimators need.
pub struct HorizonSample {
    pub sample: Sample,
    pub conditional: ConditionalSample,
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn git_commit() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

/// Simulates the replications for every horizon and normalizes them.
pub fn simulate_horizons(
    config: &ExperimentConfig,
    model: &HawkesModel,
    params: &AsymptoticParams,
    psi: Option<&PsiTable>,
) -> Result<Vec<HorizonSample>> {
    let normalizers = config
        .horizons
        .iter()
        .map(|&t| {
            let expected = match psi {
                Some(table) => Some(table.expected_count(model.mu, t)?),
                None => None,
            };
            Normalizer::new(config.functional, params, t, expected)
        })
        .collect::<Result<Vec<_>>>()?;
    let simulate = |t: f64, k: usize, i: u64| -> Result<PathResult> {
        let mut rng = stream(config.seed, &[domain::RATES, k as u64], i);
        match config.method {
            Method::Thinning => simulate_thinning(model, t, &mut rng),
            Method::Cluster => simulate_cluster(model, t, &mut rng),
        }
    };
    let reduce = |n: &Normalizer, p: &PathResult| (n.apply(p), p.count, n.center(p));
    // rows[i][k]
    let rows: Vec<Vec<(f64, u64, f64)>> = match config.horizon_design {
        HorizonDesign::Nested => {
            let k_max = config.horizons.len() - 1;
            let t_max = config.horizons[k_max];
            try_map_replications(config.replications, |i| {
                let full = simulate(t_max, k_max, i)?;
                Ok::<_, Error>(
                    config
                        .horizons
                        .iter()
                        .zip(&normalizers)
                        .map(|(&t, n)| reduce(n, &full.restrict(model, t)))
                        .collect(),
                )
            })?
        }
        HorizonDesign::Independent => try_map_replications(config.replications, |i| {
            config
                .horizons
                .iter()
                .zip(&normalizers)
                .enumerate()
                .map(|(k, (&t, n))| Ok(reduce(n, &simulate(t, k, i)?)))
                .collect::<Result<Vec<_>>>()
        })?,
    };
    config
        .horizons
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            Ok(HorizonSample {
                sample: Sample::new(t, config.functional, rows.iter().map(|r| r[k].0).collect())?,
                conditional: ConditionalSample {
                    horizon: t,
                    counts: rows.iter().map(|r| r[k].1).collect(),
                    centers: rows.iter().map(|r| r[k].2).collect(),
                },
            })
        })
        .collect()
}

/// Distance of one horizon's sample to its Gaussian limit.
pub fn estimate_distance(
    config: &ExperimentConfig,
    marks: &MarkDistribution,
    data: &HorizonSample,
    variance: f64,
) -> Result<DistanceEstimate> {
    let debias = Debias {
        replicates: config.debias_replicates,
        seed: config.seed,
        rule: config.debias_rule,
    };
    match config.distance {
        DistanceKind::Wasserstein => wasserstein1_to_normal(&data.sample, variance, &debias),
        DistanceKind::SmoothSurrogate => {
            let dictionary = Dictionary::default();
            match config.surrogate_estimator {
                SurrogateEstimator::SampleMean => {
                    smooth_distance_surrogate(&data.sample, variance, &dictionary, &debias)
                }
                SurrogateEstimator::Conditional => smooth_distance_surrogate_conditional(
                    &data.conditional,
                    marks,
                    variance,
                    &dictionary,
                    &debias,
                ),
            }
        }
    }
}

/// Runs the full rate experiment and writes `config.json`, `distances.csv`,
/// `cumulants.csv`, `ratefit.json` and `metadata.json` into `out`.
pub fn run_rates(config: &ExperimentConfig, out: &Path) -> Result<RateReport> {
    let model = config.validate()?;
    let params = AsymptoticParams::from_model(&model)?;
    let variance = config.functional.limit_variance(&params);
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), config)?;

    let t_max = *config.horizons.last().expect("validated non-empty");
    let psi = if config.functional == FunctionalTag::MeanCount {
        Some(PsiSolver::new(t_max).solve(&model.kernel)?)
    } else {
        None
    };

    log::info!(
        "simulating {} replications at horizons {:?}",
        config.replications,
        config.horizons
    );
    let samples = simulate_horizons(config, &model, &params, psi.as_ref())?;
    let mut results = Vec::new();
    for (k, data) in samples.iter().enumerate() {
        let t = config.horizons[k];
        if config.write_samples {
            let mut w = csv::Writer::from_path(out.join(format!("sample_{k}.csv")))?;
            w.write_record(["value"])?;
            for v in &data.sample.values {
                w.write_record([v.to_string()])?;
            }
            w.flush()?;
        }
        let distance = estimate_distance(config, &model.marks, data, variance)?;
        let cumulants = k_cumulants(
            &data.sample,
            config.bootstrap,
            derive_key(config.seed, &[domain::RATES, k as u64]),
        )?;
        log::info!(
            "horizon {t}: distance {:.6} (raw {:.6}, offset {:.6}), k2 {:.4}",
            distance.debiased,
            distance.raw,
            distance.offset,
            cumulants.k[1]
        );
        results.push(HorizonResult {
            horizon: t,
            distance,
            cumulants,
        });
    }

    write_distances(&out.join("distances.csv"), &results)?;
    write_cumulants(&out.join("cumulants.csv"), &results)?;

    let points: Vec<(f64, f64)> = results.iter().map(|r| (r.horizon, r.distance.debiased)).collect();
    let fit = fit_rate(&points);
    let metadata = json!({
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "config_sha256": config_hash(config)?,
        "git_commit": git_commit(),
        "created_unix": unix_time(),
        "threads": current_threads(),
        "theory": params,
        "target_variance": variance,
        "psi_grid": psi.as_ref().map(|p| json!({
            "step": p.step, "horizon": p.horizon, "residual": p.residual, "tail_bound": p.tail_bound
        })),
        "fit_error": fit.as_ref().err().map(|e| e.to_string()),
    });
    write_json(&out.join("metadata.json"), &metadata)?;
    let fit = fit?;
    write_json(&out.join("ratefit.json"), &fit)?;
    Ok(RateReport {
        params,
        target_variance: variance,
        horizons: results,
        fit,
    })
}

pub fn write_distances(path: &Path, results: &[HorizonResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "horizon",
        "replications",
        "raw",
        "offset",
        "offset_rms",
        "rule",
        "debiased",
        "std_error",
        "target_variance",
        "debias_replicates",
        "small_sample",
    ])?;
    for r in results {
        let d = &r.distance;
        w.write_record([
            r.horizon.to_string(),
            d.sample_size.to_string(),
            d.raw.to_string(),
            d.offset.to_string(),
            d.offset_rms.to_string(),
            serde_json::to_value(d.rule)?.as_str().unwrap_or_default().to_string(),
            d.debiased.to_string(),
            d.std_error.to_string(),
            d.target_variance.to_string(),
            d.replicates.to_string(),
            d.small_sample.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cumulants(path: &Path, results: &[HorizonResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["horizon", "n", "k1", "k2", "k3", "k4", "se_k1", "se_k2", "se_k3", "se_k4"])?;
    for r in results {
        let c = &r.cumulants;
        let mut row = vec![r.horizon.to_string(), c.n.to_string()];
        row.extend(c.k.iter().map(|v| v.to_string()));
        row.extend(c.se.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every check (and its control when enabled) and writes `lemmas.json`.
pub fn run_verify(config: &ExperimentConfig, out: &Path) -> Result<Vec<LemmaReport>> {
    let model = config.validate()?;
    let s = &config.verify;
    let seed = config.seed;
    let counting = model.with_marks(MarkDistribution::dirac(1.0))?;
    let variants: &[Variant] = if s.controls {
        &[Variant::Genuine, Variant::Control]
    } else {
        &[Variant::Genuine]
    };
    let mut reports = Vec::new();
    for &v in variants {
        reports.push(verify::check_ibp(&counting, s.ibp_horizon, s.ibp_replications, seed, v)?);
        reports.push(verify::check_derivative_positivity(
            &model,
            s.positivity_horizon,
            &s.positivity_grid,
            s.positivity_replications,
            seed,
            v,
        )?);
        reports.push(verify::check_offspring_bound(
            &model,
            s.offspring_horizon,
            s.offspring_strata,
            s.offspring_replications,
            seed,
            v,
        )?);
        reports.push(verify::check_martingale(
            &model,
            s.martingale_horizon,
            &s.martingale_checkpoints,
            s.martingale_replications,
            seed,
            v,
        )?);
        reports.push(verify::check_remainder(
            &counting,
            &s.remainder_horizons,
            s.remainder_replications,
            seed,
            v,
        )?);
        reports.push(verify::check_r_third_moment(
            &model,
            &s.third_moment_horizons,
            s.third_moment_strata,
            s.third_moment_replications,
            seed,
            v,
        )?);
    }
    for r in reports.iter_mut() {
        if r.variant == Variant::Control && verify::control_is_vacuous(r.lemma, &model.kernel) {
            r.notes.push("this control cannot fail without excitation".into());
        }
    }
    fs::create_dir_all(out)?;
    write_json(
        &out.join("lemmas.json"),
        &json!({
            "config": config,
            "config_sha256": config_hash(config)?,
            // θ = 0 sits below every intensity, so the atom is always accepted.
            "inserted_atom": { "theta": 0.0, "mark": 1.0, "mark_in_sums": false },
            "reports": reports,
        }),
    )?;
    Ok(reports)
}

/// Human-readable table of lemma reports.
pub fn lemma_table(reports: &[LemmaReport]) -> String {
    let mut s = format!(
        "{:<24} {:<8} {:>9} {:>12} band verdict\n",
        "check", "variant", "reps", "statistic"
    );
    for r in reports {
        s.push_str(&r.table_row());
        s.push('\n');
    }
    s
}

/// Solves `ψ` and writes `psi.csv` plus `psi.json`.
pub fn run_psi(kernel: &Kernel, solver: &PsiSolver, out: &Path) -> Result<PsiTable> {
    let table = solver.solve(kernel)?;
    fs::create_dir_all(out)?;
    table.write_csv(BufWriter::new(File::create(out.join("psi.csv"))?))?;
    write_json(
        &out.join("psi.json"),
        &json!({
            "kernel": kernel,
            "step": table.step,
            "horizon": table.horizon,
            "tol": table.tol,
            "residual": table.residual,
            "iterations": table.iterations,
            "l1_estimate": table.l1_estimate,
            "tail_bound": table.tail_bound,
        }),
    )?;
    Ok(table)
}

/// Simulates replication `index` at the last configured horizon and writes
/// `events.csv` plus `path.json`.
pub fn run_sim(config: &ExperimentConfig, index: u64, out: &Path) -> Result<PathResult> {
    let model = config.validate()?;
    let t = *config.horizons.last().expect("validated non-empty");
    let k = config.horizons.len() - 1;
    let mut rng = stream(config.seed, &[domain::RATES, k as u64], index);
    let path = match config.method {
        Method::Thinning => simulate_thinning(&model, t, &mut rng)?,
        Method::Cluster => simulate_cluster(&model, t, &mut rng)?,
    };
    fs::create_dir_all(out)?;
    path.log.write_csv(BufWriter::new(File::create(out.join("events.csv"))?))?;
    write_json(
        &out.join("path.json"),
        &json!({
            "config": config,
            "replication": index,
            "horizon": t,
            "count": path.count,
            "sum": path.sum,
            "compensator": path.compensator,
            "martingale": path.martingale,
            "method": path.method,
        }),
    )?;
    Ok(path)
}

/// Summarizes whatever results a run directory contains.
pub fn report(dir: &Path) -> Result<String> {
    let mut s = String::new();
    let distances = dir.join("distances.csv");
    let lemmas = dir.join("lemmas.json");
    if !distances.exists() && !lemmas.exists() {
        return Err(Error::Config(format!("{} holds no results", dir.display())));
    }
    if distances.exists() {
        let mut r = csv::Reader::from_path(&distances)?;
        let headers = r.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (h, d, e) = (col("horizon"), col("debiased"), col("std_error"));
        let _ = writeln!(s, "{:>10} {:>14} {:>12}", "horizon", "distance", "std_error");
        for rec in r.records() {
            let rec = rec?;
            let get = |i: Option<usize>| i.and_then(|i| rec.get(i)).unwrap_or("?").to_string();
            let _ = writeln!(s, "{:>10} {:>14} {:>12}", get(h), get(d), get(e));
        }
        let fit = dir.join("ratefit.json");
        if fit.exists() {
            let fit: RateFit = serde_json::from_str(&fs::read_to_string(fit)?)?;
            let _ = writeln!(
                s,
                "slope {:.4} ± {:.4}  R² {:.4}  intercept {:.4}",
                fit.slope, fit.slope_se, fit.r2, fit.intercept
            );
        }
    }
    if lemmas.exists() {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(lemmas)?)?;
        for r in v["reports"].as_array().into_iter().flatten() {
            let _ = writeln!(
                s,
                "{:<24} {:<8} statistic {:>12} verdict {}",
                r["lemma"].as_str().unwrap_or("?"),
                r["variant"].as_str().unwrap_or("?"),
                r["statistic"],
                r["verdict"].as_str().unwrap_or("?"),
            );
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(distance: DistanceKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::reference();
        c.horizons = vec![5.0, 10.0, 20.0];
        c.replications = 300;
        c.debias_replicates = 8;
        c.bootstrap = 20;
        c.distance = distance;
        c
    }

    #[test]
    fn rates_writes_the_run_layout() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_rates(&small(DistanceKind::Wasserstein), dir.path()).unwrap();
        for f in ["config.json", "distances.csv", "cumulants.csv", "ratefit.json", "metadata.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(report.horizons.len(), 3);
        let echoed = ExperimentConfig::load(&dir.path().join("config.json")).unwrap();
        assert_eq!(echoed, small(DistanceKind::Wasserstein));
        let summary = report_text(dir.path());
        assert!(summary.contains("slope"));
    }

    fn report_text(p: &Path) -> String {
        report(p).unwrap()
    }

    #[test]
    fn identical_configs_give_identical_csv() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let c = small(DistanceKind::SmoothSurrogate);
        run_rates(&c, a.path()).ok();
        crate::parallel::with_threads(2, || run_rates(&c, b.path()).ok());
        for f in ["distances.csv", "cumulants.csv"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn unstable_kernel_aborts_before_simulation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(DistanceKind::Wasserstein);
        c.kernel = Kernel::exponential(3.0, 2.0);
        let err = run_rates(&c, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!dir.path().join("distances.csv").exists());
    }

    #[test]
    fn mean_count_centering_uses_psi() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(DistanceKind::Wasserstein);
        c.functional = FunctionalTag::MeanCount;
        c.output = None;
        run_rates(&c, dir.path()).ok();
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
        assert!(meta["psi_grid"]["step"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn psi_and_sim_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let table = run_psi(&Kernel::exponential(1.0, 2.0), &PsiSolver::new(10.0), dir.path()).unwrap();
        assert!((table.l1_estimate - 1.0).abs() < 0.01);
        let text = fs::read_to_string(dir.path().join("psi.csv")).unwrap();
        assert!(text.starts_with("t,psi\n0,1\n"));
        let path = run_sim(&small(DistanceKind::Wasserstein), 0, dir.path()).unwrap();
        let events = fs::read_to_string(dir.path().join("events.csv")).unwrap();
        assert_eq!(events.lines().count(), path.count as usize + 1);
    }
}

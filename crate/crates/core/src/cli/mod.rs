//! Command line front end: configuration, orchestration and output files.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{DistanceKind, ExperimentConfig, HorizonDesign, VerifySuiteConfig, SCHEMA_VERSION};
pub use run::{lemma_table, report, run_psi, run_rates, run_sim, run_verify, RateReport};

use crate::error::{Error, Result};
use crate::kernel::PsiSolver;
use crate::parallel::with_threads;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hawkes-clt", version, about = "Gaussian approximation diagnostics for compound Hawkes processes")]
pub struct Cli {
    /// Experiment configuration (JSON). Defaults to the reference configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the configuration's `output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the renewal equation for the configured kernel.
    Psi {
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 50.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Simulate one path at the last configured horizon.
    Sim {
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Distances to the Gaussian limit across horizons and a rate fit.
    Rates,
    /// Monte Carlo checks of the structural lemmas.
    Verify {
        /// Also run the deliberately broken variants.
        #[arg(long)]
        controls: bool,
    },
    /// Summarize an existing run directory.
    Report,
}

impl Cli {
    fn load_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::reference(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output = Some(out.clone());
        }
        Ok(config)
    }

    fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        config
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("runs/seed-{}", config.seed)))
    }
}

/// Runs the parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    let config = cli.load_config()?;
    let out = cli.out_dir(&config);
    with_threads(cli.threads, || match &cli.command {
        Command::Psi { step, horizon, tol } => {
            let mut solver = PsiSolver::new(*horizon).tol(*tol);
            if let Some(h) = step {
                solver = solver.step(*h);
            }
            let table = run_psi(&config.kernel, &solver, &out)?;
            println!(
                "psi: {} nodes, step {}, residual {:e}, l1 estimate {:.6} (tail bound {:e}) -> {}",
                table.values.len(),
                table.step,
                table.residual,
                table.l1_estimate,
                table.tail_bound,
                out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Sim { replication } => {
            let path = run_sim(&config, *replication, &out)?;
            println!(
                "{} events, S_T = {}, compensator {:.6} -> {}",
                path.count,
                path.sum,
                path.compensator,
                out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Rates => {
            let report = run_rates(&config, &out)?;
            println!("{}", run::report(&out)?);
            println!(
                "target variance {:.6}; fitted slope {:.4}",
                report.target_variance, report.fit.slope
            );
            Ok(EXIT_OK)
        }
        Command::Verify { controls } => {
            let mut config = config.clone();
            config.verify.controls |= *controls;
            let reports = run_verify(&config, &out)?;
            print!("{}", lemma_table(&reports));
            Ok(if reports.iter().all(|r| r.expectation_met()) {
                EXIT_OK
            } else {
                EXIT_VERIFICATION_FAILED
            })
        }
        Command::Report => {
            let dir = cli.out.clone().or(config.output.clone()).ok_or_else(|| {
                Error::Config("report needs --out <run directory>".into())
            })?;
            print!("{}", report(&dir)?);
            Ok(EXIT_OK)
        }
    })
}

//! Command-line front end: selection, calibration, sensitivity profiles, and
//! the benchmark harness.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dp_topk::accountant::{calibrate, DpBudget, MechanismSpec};
use dp_topk::bench::{load_config, run_experiment};
use dp_topk::histogram::SelectionOutcome;
use dp_topk::io::ingest_histogram;
use dp_topk::mechanisms::{
    em_top_k_peel, ptr_gaussian, ptr_laplace, stable_top_k_adaptive, stable_top_k_fixed,
    Regularizer,
};
use dp_topk::noise::RngStream;
use dp_topk::sensitivity;

#[derive(Parser)]
#[command(
    name = "dptopk",
    version,
    about = "Differentially private top-k selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MechanismId {
    Adaptive,
    Fixed,
    Em,
    PtrGauss,
    PtrLap,
}

#[derive(Subcommand)]
enum Command {
    /// Run one selection mechanism on a histogram CSV and print a receipt.
    Select {
        #[arg(long, value_enum)]
        mechanism: MechanismId,
        /// Histogram CSV (`item_id,count`).
        #[arg(long)]
        histogram: PathBuf,
        /// Target k (required for fixed, em, ptr-gauss, ptr-lap).
        #[arg(long)]
        k: Option<usize>,
        /// Per-query zCDP-scale budget knob.
        #[arg(long)]
        rho: f64,
        /// Failure mass of the stability test.
        #[arg(long, default_value_t = 1e-6)]
        delta_t: f64,
        /// Regularizer weight pulling the chosen rank toward k (fixed only).
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Delta at which the consumed curve is converted for the receipt.
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Calibrate mechanism noise against a target (eps, delta) budget.
    Calibrate {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        /// Per-query failure mass.
        #[arg(long, default_value_t = 0.0)]
        delta_t: f64,
        /// Number of composed queries.
        #[arg(long, default_value_t = 1)]
        queries: u32,
        #[arg(long, value_enum)]
        mechanism: MechanismId,
        /// Peeling rounds for the em mechanism.
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
    /// Print the sensitivity profile of a histogram's top-k release.
    Sensitivity {
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        beta: f64,
        /// Shortcut horizon for the smooth envelope.
        #[arg(long)]
        d0: usize,
    },
    /// Run an experiment config and emit a JSONL report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel trials.
        #[arg(long)]
        threads: Option<usize>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Serialize)]
struct Receipt {
    outcome: SelectionOutcome,
    chosen_k: Option<usize>,
    eps_at_delta: f64,
    delta_total: f64,
}

fn require_k(k: Option<usize>) -> anyhow::Result<usize> {
    k.context("--k is required for this mechanism")
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Select {
            mechanism,
            histogram,
            k,
            rho,
            delta_t,
            lambda,
            delta,
            seed,
        } => {
            let h = ingest_histogram(&histogram, None)?;
            let mut rng = RngStream::new(seed);
            let (outcome, chosen_k, curve) = match mechanism {
                MechanismId::Adaptive => {
                    let r = stable_top_k_adaptive(&h, &Regularizer::Zero, rho, delta_t, &mut rng)?;
                    (r.outcome, r.chosen_k, r.curve)
                }
                MechanismId::Fixed => {
                    let r = stable_top_k_fixed(&h, require_k(k)?, lambda, rho, delta_t, &mut rng)?;
                    (r.outcome, r.chosen_k, r.curve)
                }
                MechanismId::Em => {
                    let k = require_k(k)?;
                    let eps_round = (8.0 * rho / k as f64).sqrt();
                    let (set, curve) = em_top_k_peel(&h, k, eps_round, &mut rng)?;
                    (SelectionOutcome::Indices(set), Some(k), curve)
                }
                MechanismId::PtrGauss => {
                    let k = require_k(k)?;
                    let sigma = (1.0 / (2.0 * rho)).sqrt();
                    let (out, curve) = ptr_gaussian(&h.sorted(), k, sigma, delta_t, &mut rng)?;
                    (out, Some(k), curve)
                }
                MechanismId::PtrLap => {
                    let k = require_k(k)?;
                    let eps = (2.0 * rho).sqrt();
                    let (out, curve) = ptr_laplace(&h.sorted(), k, eps, delta_t, &mut rng)?;
                    (out, Some(k), curve)
                }
            };
            let budget = curve.to_dp(delta)?;
            let receipt = Receipt {
                outcome,
                chosen_k,
                eps_at_delta: budget.eps,
                delta_total: budget.delta,
            };
            println!("{}", serde_json::to_string_pretty(&receipt)?);
        }
        Command::Calibrate {
            eps,
            delta,
            delta_t,
            queries,
            mechanism,
            k,
        } => {
            let spec = match mechanism {
                MechanismId::Adaptive => MechanismSpec::AdaptiveStableTopK,
                MechanismId::Fixed => MechanismSpec::FixedStableTopK,
                MechanismId::Em => MechanismSpec::EmPeel { rounds: k },
                MechanismId::PtrGauss => MechanismSpec::PtrGaussian,
                MechanismId::PtrLap => MechanismSpec::PtrLaplace,
            };
            let cal = calibrate(DpBudget::new(eps, delta)?, delta_t, queries, spec)?;
            println!("{}", serde_json::to_string_pretty(&cal)?);
        }
        Command::Sensitivity {
            histogram,
            k,
            beta,
            d0,
        } => {
            let h = ingest_histogram(&histogram, None)?;
            let profile = sensitivity::profile(&h.sorted(), k, beta, d0)?;
            println!("{}", serde_json::to_string_pretty(&profile)?);
        }
        Command::Bench {
            config,
            out,
            threads,
            seed,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let report = if let Some(n) = threads {
                if n == 0 {
                    bail!("--threads must be >= 1");
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .context("building thread pool")?
                    .install(|| run_experiment(&cfg))?
            } else {
                run_experiment(&cfg)?
            };
            match out {
                Some(path) => std::fs::write(&path, report.to_jsonl())
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", report.to_jsonl()),
            }
        }
    }
    Ok(())
}

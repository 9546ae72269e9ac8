//! Experiment harness: synthetic instances, calibrated mechanism runs over
//! repeated trials, and JSONL report emission.
//!
//! A run is specified by [`ExperimentConfig`]: one mechanism, one dataset
//! source, a list of `k` values and `(eps, delta)` targets, and a trial
//! count. Per cell the harness calibrates once, forks one RNG stream per
//! trial, executes trials in parallel, and reports mean recall, its standard
//! deviation across trials, the refusal rate, and the converted privacy cost
//! of the full composition.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{calibrate, DpBudget, MechanismSpec};
use crate::error::{Error, Result};
use crate::histogram::{Histogram, SelectionOutcome};
use crate::io::ingest_histogram;
use crate::mechanisms::{
    em_top_k_peel, ptr_gaussian, ptr_laplace, stable_top_k_adaptive, stable_top_k_fixed,
    Regularizer,
};
use crate::noise::RngStream;

/// First `heavy_k` bins at `heavy_count`, the rest zero.
pub fn synthetic_histogram(bins: usize, heavy_k: usize, heavy_count: u64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::param("bins", "must be >= 1"));
    }
    if heavy_k > bins {
        return Err(Error::param("heavy_k", "must not exceed bins"));
    }
    let mut counts = vec![0u64; bins];
    counts[..heavy_k].fill(heavy_count);
    Histogram::from_counts(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MechanismConfig {
    /// Stable top-k with a data-chosen k and zero regularizer.
    Adaptive,
    /// Stable top-k forced to return exactly k indices.
    Fixed { lambda: f64 },
    /// One-shot Gumbel top-k baseline.
    Em,
    /// Gaussian stability test at the requested k.
    PtrGauss,
    /// Laplace stability test at the requested k.
    PtrLap,
}

impl MechanismConfig {
    pub fn id(&self) -> &'static str {
        match self {
            MechanismConfig::Adaptive => "adaptive",
            MechanismConfig::Fixed { .. } => "fixed",
            MechanismConfig::Em => "em",
            MechanismConfig::PtrGauss => "ptr-gauss",
            MechanismConfig::PtrLap => "ptr-lap",
        }
    }

    fn spec(&self, k: usize) -> MechanismSpec {
        match self {
            MechanismConfig::Adaptive => MechanismSpec::AdaptiveStableTopK,
            MechanismConfig::Fixed { .. } => MechanismSpec::FixedStableTopK,
            MechanismConfig::Em => MechanismSpec::EmPeel { rounds: k as u32 },
            MechanismConfig::PtrGauss => MechanismSpec::PtrGaussian,
            MechanismConfig::PtrLap => MechanismSpec::PtrLaplace,
        }
    }

    /// Stability tests carry failure mass; the EM baseline is pure RDP.
    fn uses_delta_t(&self) -> bool {
        !matches!(self, MechanismConfig::Em)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DatasetSource {
    VotesCsv {
        path: PathBuf,
    },
    HistogramCsv {
        path: PathBuf,
    },
    Synthetic {
        bins: usize,
        /// Number of heavy bins; defaults to the `k` under evaluation.
        heavy_k: Option<usize>,
        heavy_count: u64,
    },
    /// Directory of per-day histogram CSVs, composed as a query sequence.
    DailyDir {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mechanism: MechanismConfig,
    pub dataset: DatasetSource,
    pub ks: Vec<usize>,
    pub budgets: Vec<BudgetSpec>,
    pub trials: u32,
    pub seed: u64,
    /// Per-query failure mass; defaults to half of delta spread over the
    /// query count.
    #[serde(default)]
    pub delta_t: Option<f64>,
}

/// One (mechanism, k, eps) cell of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub mechanism: String,
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    pub trials: u32,
    pub mean_recall: f64,
    pub recall_std: f64,
    pub bottom_rate: f64,
    pub converted_eps: f64,
    pub converted_delta: f64,
    pub rho: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<ReportCell>,
}

impl ExperimentReport {
    /// JSON lines, one cell per line.
    pub fn to_jsonl(&self) -> String {
        self.cells
            .iter()
            .map(|c| serde_json::to_string(c).expect("report cells serialize"))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }
}

fn load_days(source: &DatasetSource, k: usize) -> Result<Vec<Histogram>> {
    match source {
        DatasetSource::VotesCsv { path } => Ok(vec![crate::io::ingest_votes(path, None)?]),
        DatasetSource::HistogramCsv { path } => Ok(vec![ingest_histogram(path, None)?]),
        DatasetSource::Synthetic {
            bins,
            heavy_k,
            heavy_count,
        } => Ok(vec![synthetic_histogram(
            *bins,
            heavy_k.unwrap_or(k),
            *heavy_count,
        )?]),
        DatasetSource::DailyDir { path } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(Error::param("daily-dir", "no .csv files found"));
            }
            files.iter().map(|p| ingest_histogram(p, None)).collect()
        }
    }
}

struct TrialStats {
    recall: f64,
    bottoms: u32,
}

fn run_trial(
    mechanism: &MechanismConfig,
    days: &[Histogram],
    truths: &[std::collections::BTreeSet<usize>],
    k: usize,
    rho: f64,
    delta_t: f64,
    stream: &mut RngStream,
) -> Result<TrialStats> {
    let mut recall_sum = 0.0;
    let mut bottoms = 0;
    for (h, truth) in days.iter().zip(truths) {
        let outcome = match mechanism {
            MechanismConfig::Adaptive => {
                stable_top_k_adaptive(h, &Regularizer::Zero, rho, delta_t, stream)?.outcome
            }
            MechanismConfig::Fixed { lambda } => {
                stable_top_k_fixed(h, k, *lambda, rho, delta_t, stream)?.outcome
            }
            MechanismConfig::Em => {
                let eps_round = (8.0 * rho / k as f64).sqrt();
                SelectionOutcome::Indices(em_top_k_peel(h, k, eps_round, stream)?.0)
            }
            MechanismConfig::PtrGauss => {
                let sigma = (1.0 / (2.0 * rho)).sqrt();
                ptr_gaussian(&h.sorted(), k, sigma, delta_t, stream)?.0
            }
            MechanismConfig::PtrLap => {
                let eps = (2.0 * rho).sqrt();
                ptr_laplace(&h.sorted(), k, eps, delta_t, stream)?.0
            }
        };
        match outcome {
            SelectionOutcome::Bottom => bottoms += 1,
            SelectionOutcome::Indices(set) => {
                recall_sum += set.intersection(truth).count() as f64 / k as f64;
            }
        }
    }
    Ok(TrialStats {
        recall: recall_sum / days.len() as f64,
        bottoms,
    })
}

/// Runs every (k, budget) cell of the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.trials < 1 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    let root = RngStream::new(cfg.seed);
    let mut cells = Vec::new();
    for (cell_idx, (&k, budget)) in cfg
        .ks
        .iter()
        .flat_map(|k| cfg.budgets.iter().map(move |b| (k, b)))
        .enumerate()
    {
        let start = Instant::now();
        let days = load_days(&cfg.dataset, k)?;
        let queries = days.len() as u32;
        let truths: Vec<_> = days.iter().map(|h| h.sorted().top_k_set(k)).collect();

        let target = DpBudget::new(budget.eps, budget.delta)?;
        let delta_t = if cfg.mechanism.uses_delta_t() {
            cfg.delta_t.unwrap_or(budget.delta / (2.0 * queries as f64))
        } else {
            0.0
        };
        let cal = calibrate(target, delta_t, queries, cfg.mechanism.spec(k))?;
        debug_assert!(cal.achieved.eps <= target.eps);

        // Each trial gets a stream derived from the cell and trial indices so
        // the schedule cannot influence the draws.
        let cell_root = root.fork(cell_idx as u64);
        let stats: Vec<TrialStats> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut stream = cell_root.fork(t as u64);
                run_trial(
                    &cfg.mechanism,
                    &days,
                    &truths,
                    k,
                    cal.params.rho,
                    delta_t,
                    &mut stream,
                )
            })
            .collect::<Result<_>>()?;

        let n = cfg.trials as f64;
        let mean = stats.iter().map(|s| s.recall).sum::<f64>() / n;
        let var = stats.iter().map(|s| (s.recall - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let bottoms: u32 = stats.iter().map(|s| s.bottoms).sum();

        cells.push(ReportCell {
            mechanism: cfg.mechanism.id().to_string(),
            k,
            eps: budget.eps,
            delta: budget.delta,
            trials: cfg.trials,
            mean_recall: mean,
            recall_std: var.sqrt(),
            bottom_rate: bottoms as f64 / (n * queries as f64),
            converted_eps: cal.achieved.eps,
            converted_delta: cal.achieved.delta,
            rho: cal.params.rho,
            wall_ms: start.elapsed().as_millis() as u64,
        });
    }
    Ok(ExperimentReport { cells })
}

/// Loads an [`ExperimentConfig`] from a JSON file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })
}

//! Experiments: configuration files, parallel replications, summary
//! statistics and output files.

mod commands;
mod output;
mod sweep;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forensics::ForensicsError;
use crate::game::{GameConfig, GameError, MinerConfig, MinerId, PayoffReport};
use crate::math::MathError;
use crate::strategy::StrategySpec;

pub use commands::{
    cmd_simulate, cmd_sweep, cmd_verify, simulate, verify, SimulationResult, VerifyResult,
};
pub use output::decimal17;
pub use sweep::{run_sweep, SweepRow, SweepSpec, SweepVariable};

/// Overrides the number of worker threads.
pub const WORKERS_ENV: &str = "INERTIA_WORKERS";

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Forensics(#[from] ForensicsError),
    #[error(transparent)]
    Math(#[from] MathError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Replication seeds: an explicit list, or `replications` consecutive seeds
/// starting at `base_seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range(SeedRange),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub base_seed: u64,
    pub replications: u64,
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range(r) => (0..r.replications)
                .map(|i| r.base_seed.wrapping_add(i))
                .collect(),
        }
    }
}

/// Output paths, relative to the working directory. A `{seed}` in `trace`
/// writes one trace per replication; otherwise only the first is written.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate_json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forensics_json: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub miners: Vec<MinerConfig>,
    pub horizon: u64,
    /// Blocks below the final tip left out of payoffs and kill accounting.
    /// Defaults to twice the inertia, or 2 under the standard protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settlement: Option<u64>,
    pub seeds: Seeds,
    #[serde(
        rename = "analysis_J",
        alias = "analysis_j",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub analysis_j: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<MinerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema != SCHEMA_VERSION {
            return Err(HarnessError::Invalid(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.seeds.to_vec().is_empty() {
            return Err(HarnessError::Invalid(
                "at least one replication is required".into(),
            ));
        }
        if self.settlement() > self.horizon {
            return Err(GameError::SettlementExceedsHorizon {
                settlement: self.settlement(),
                horizon: self.horizon,
            }
            .into());
        }
        let deviants = self
            .miners
            .iter()
            .filter(|m| !m.strategy.is_protocol())
            .count();
        if deviants > 1 {
            return Err(HarnessError::Invalid(format!(
                "at most one non-protocol strategy per experiment, found {deviants}"
            )));
        }
        if self.analysis_j == Some(0) {
            return Err(HarnessError::Invalid("analysis_J must be positive".into()));
        }
        // Builds a game once to surface power and strategy errors early.
        crate::game::GameState::new(&self.game_config(0))?;
        Ok(())
    }

    /// Inertia of the protocol side, if it plays the inertial rule.
    pub fn protocol_inertia(&self) -> Option<u32> {
        self.miners.iter().find_map(|m| match m.strategy {
            StrategySpec::Inertial { inertia } => Some(inertia),
            _ => None,
        })
    }

    pub fn settlement(&self) -> u64 {
        self.settlement
            .unwrap_or_else(|| self.protocol_inertia().map_or(2, |i| 2 * i as u64))
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.to_vec()
    }

    /// The miner whose payoff is tracked: the configured subject, else the
    /// deviant, else the lowest index.
    pub fn subject(&self) -> Option<&MinerConfig> {
        if let Some(s) = self.subject {
            return self.miners.iter().find(|m| m.index == s);
        }
        self.miners
            .iter()
            .find(|m| !m.strategy.is_protocol())
            .or_else(|| self.miners.iter().min_by_key(|m| m.index))
    }

    pub fn game_config(&self, seed: u64) -> GameConfig {
        GameConfig {
            miners: self.miners.clone(),
            seed,
            record_events: false,
            subject: self.subject,
        }
    }

    /// Worker threads: the environment override, then the config, then the
    /// machine's available parallelism.
    pub fn workers(&self) -> usize {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .or(self.workers)
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

/// Runs `job` once per seed on a pool of `workers` threads. Results come
/// back in seed order regardless of completion order.
pub fn run_replications<T, F>(seeds: &[u64], workers: usize, job: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(u64) -> Result<T, HarnessError> + Sync,
{
    let mut order: Vec<u64> = seeds.to_vec();
    order.sort_unstable();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| order.par_iter().map(|&s| job(s)).collect())
}

/// Payoffs of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub report: PayoffReport,
}

/// Mean share of one miner across replications, with standard error and
/// 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareSummary {
    pub miner: MinerId,
    pub power: f64,
    pub mean_share: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replications: usize,
    pub horizon: u64,
    pub settlement: u64,
    pub subject: Option<MinerId>,
    /// Replications whose final chain was not unique.
    pub ties_at_horizon: usize,
    pub miners: Vec<ShareSummary>,
}

impl Aggregate {
    pub fn miner(&self, id: MinerId) -> Option<&ShareSummary> {
        self.miners.iter().find(|m| m.miner == id)
    }
}

/// Sample mean and standard error of the mean (0 for a single value).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(config: &ExperimentConfig, reps: &[Replication]) -> Aggregate {
    let mut reps: Vec<&Replication> = reps.iter().collect();
    reps.sort_by_key(|r| r.seed);
    let mut miners: Vec<&MinerConfig> = config.miners.iter().collect();
    miners.sort_by_key(|m| m.index);
    let summaries = miners
        .iter()
        .map(|m| {
            let shares: Vec<f64> = reps
                .iter()
                .map(|r| r.report.share(m.index).unwrap_or(0.0))
                .collect();
            let (mean, se) = mean_se(&shares);
            ShareSummary {
                miner: m.index,
                power: m.power,
                mean_share: mean,
                se,
                ci_low: mean - 1.96 * se,
                ci_high: mean + 1.96 * se,
            }
        })
        .collect();
    Aggregate {
        replications: reps.len(),
        horizon: config.horizon,
        settlement: config.settlement(),
        subject: config.subject().map(|m| m.index),
        ties_at_horizon: reps.iter().filter(|r| r.report.tie_at_horizon).count(),
        miners: summaries,
    }
}

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::forensics::{self, ForensicReport};
use crate::game::{self, PayoffReport, Trace};
use crate::harness::output::{csv_float, write_csv, write_json, write_trace};
use crate::harness::{
    run_replications, summarize, Aggregate, ExperimentConfig, HarnessError, Replication,
};
use crate::math;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub replications: Vec<Replication>,
    pub aggregate: Aggregate,
}

fn trace_path(config: &ExperimentConfig, seed: u64) -> Option<PathBuf> {
    let path = config.outputs.trace.as_ref()?;
    let text = path.to_string_lossy();
    if text.contains("{seed}") {
        Some(PathBuf::from(text.replace("{seed}", &seed.to_string())))
    } else if config.seeds().first() == Some(&seed) {
        Some(path.clone())
    } else {
        None
    }
}

/// Plays one replication, writing its JSONL trace if the config asks for it.
pub(crate) fn replicate(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(Trace, PayoffReport), HarnessError> {
    let trace_to = trace_path(config, seed);
    let mut game_config = config.game_config(seed);
    game_config.record_events = trace_to.is_some();
    let (mut trace, report) = game::run(&game_config, config.horizon, config.settlement())?;
    if let (Some(path), Some(events)) = (trace_to, trace.events.take()) {
        write_trace(&path, &events)?;
    }
    Ok((trace, report))
}

/// Runs every replication of `config` and summarizes the shares.
pub fn simulate(config: &ExperimentConfig) -> Result<SimulationResult, HarnessError> {
    let replications = run_replications(&config.seeds(), config.workers(), |seed| {
        let (_, report) = replicate(config, seed)?;
        Ok(Replication { seed, report })
    })?;
    let aggregate = summarize(config, &replications);
    Ok(SimulationResult {
        replications,
        aggregate,
    })
}

const REPORT_HEADER: [&str; 5] = [
    "seed",
    "miner",
    "blocks_on_chain",
    "total_on_chain",
    "share",
];

fn report_rows(reps: &[Replication]) -> impl Iterator<Item = Vec<String>> + '_ {
    reps.iter().flat_map(|r| {
        r.report.miners.iter().map(move |m| {
            vec![
                r.seed.to_string(),
                m.miner.0.to_string(),
                m.blocks_on_chain.to_string(),
                r.report.total_on_chain.to_string(),
                csv_float(m.share),
            ]
        })
    })
}

fn write_payoffs(config: &ExperimentConfig, result: &SimulationResult) -> Result<(), HarnessError> {
    if let Some(path) = &config.outputs.report_csv {
        write_csv(path, &REPORT_HEADER, report_rows(&result.replications))?;
    }
    if let Some(path) = &config.outputs.aggregate_json {
        write_json(path, &result.aggregate)?;
    }
    Ok(())
}

/// `simulate <config.json>`.
pub fn cmd_simulate(path: &Path) -> Result<SimulationResult, HarnessError> {
    let config = ExperimentConfig::from_path(path)?;
    let result = simulate(&config)?;
    write_payoffs(&config, &result)?;
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyResult {
    #[serde(rename = "J")]
    pub j: u32,
    pub per_seed: Vec<ForensicReport>,
    pub aggregate: ForensicReport,
    #[serde(skip)]
    pub payoffs: SimulationResult,
}

impl VerifyResult {
    /// Every per-seed and pooled check passed.
    pub fn pass(&self) -> bool {
        self.aggregate.pass() && self.per_seed.iter().all(ForensicReport::pass)
    }
}

/// The configured `J`, or the calculator's `J` for the subject's power,
/// capped at `I - 1`.
pub fn analysis_j(config: &ExperimentConfig) -> Result<u32, HarnessError> {
    if let Some(j) = config.analysis_j {
        return Ok(j);
    }
    let alpha = config
        .subject()
        .ok_or_else(|| HarnessError::Invalid("subject is not a configured miner".into()))?
        .power;
    let j = math::sufficient_inertia(alpha, 0.0)?.j;
    Ok(match config.protocol_inertia() {
        Some(i) => j.min(i.saturating_sub(1)).max(1),
        None => j,
    })
}

/// Runs every replication and applies the forensic accounting to each.
pub fn verify(config: &ExperimentConfig) -> Result<VerifyResult, HarnessError> {
    let j = analysis_j(config)?;
    let runs = run_replications(&config.seeds(), config.workers(), |seed| {
        let (trace, report) = replicate(config, seed)?;
        let classification = forensics::classify(&trace)?;
        let chain = forensics::canonical_chain(&trace.tree, config.settlement())?;
        let attribution = forensics::killer_attribution(&trace, &classification, &chain, j)?;
        let forensic = ForensicReport::new(Some(seed), &attribution)?;
        Ok((Replication { seed, report }, forensic))
    })?;
    let (replications, per_seed): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let aggregate = ForensicReport::aggregate(&per_seed).expect("at least one replication");
    let summary = summarize(config, &replications);
    Ok(VerifyResult {
        j,
        per_seed,
        aggregate,
        payoffs: SimulationResult {
            replications,
            aggregate: summary,
        },
    })
}

/// `verify <config.json>`. The caller turns [`VerifyResult::pass`] into the
/// exit code.
pub fn cmd_verify(path: &Path) -> Result<VerifyResult, HarnessError> {
    let config = ExperimentConfig::from_path(path)?;
    let result = verify(&config)?;
    if let Some(out) = &config.outputs.forensics_json {
        write_json(out, &result)?;
    }
    write_payoffs(&config, &result.payoffs)?;
    Ok(result)
}

/// `sweep <sweep.json>`.
pub fn cmd_sweep(path: &Path) -> Result<Vec<crate::harness::SweepRow>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let spec: crate::harness::SweepSpec = serde_json::from_str(&text)?;
    let rows = crate::harness::run_sweep(&spec)?;
    if let Some(out) = &spec.output_csv {
        crate::harness::sweep::write_rows(out, &rows)?;
    }
    Ok(rows)
}

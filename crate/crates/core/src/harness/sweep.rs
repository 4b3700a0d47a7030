use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::output::{csv_float, write_csv};
use crate::harness::{simulate, ExperimentConfig, HarnessError, SCHEMA_VERSION};
use crate::math;
use crate::strategy::StrategySpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// The subject's power; the other miners keep their relative powers.
    Alpha,
    /// Tie bias of standard miners.
    Gamma,
    /// Inertia of inertial miners.
    #[serde(alias = "I")]
    Inertia,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema: u32,
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    /// Experiment run at every grid point after substituting the variable.
    pub template: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_csv: Option<PathBuf>,
}

/// One grid point. Analytic columns are NaN where they do not apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub inertia: Option<u32>,
    pub replications: usize,
    pub mean_share: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub selfish_revenue: f64,
    pub threshold: f64,
}

impl SweepSpec {
    /// The template with the sweep variable set to `value`.
    pub fn point(&self, value: f64) -> Result<ExperimentConfig, HarnessError> {
        let mut config = self.template.clone();
        // Outputs of individual points would overwrite each other.
        config.outputs = Default::default();
        match self.variable {
            SweepVariable::Alpha => {
                if !(value > 0.0 && value < 1.0) {
                    return Err(HarnessError::Invalid(format!(
                        "alpha {value} not in (0, 1)"
                    )));
                }
                let subject = config
                    .subject()
                    .ok_or_else(|| HarnessError::Invalid("sweep template has no subject".into()))?
                    .index;
                let rest: f64 = config
                    .miners
                    .iter()
                    .filter(|m| m.index != subject)
                    .map(|m| m.power)
                    .sum();
                for m in &mut config.miners {
                    m.power = if m.index == subject {
                        value
                    } else {
                        m.power / rest * (1.0 - value)
                    };
                }
            }
            SweepVariable::Gamma => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(HarnessError::Invalid(format!(
                        "gamma {value} not in [0, 1]"
                    )));
                }
                for m in &mut config.miners {
                    if let StrategySpec::Standard { gamma } = &mut m.strategy {
                        *gamma = Some(value);
                    }
                }
            }
            SweepVariable::Inertia => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(HarnessError::Invalid(format!(
                        "inertia {value} is not a positive integer"
                    )));
                }
                for m in &mut config.miners {
                    if let StrategySpec::Inertial { inertia } = &mut m.strategy {
                        *inertia = value as u32;
                    }
                }
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn honest_gamma(config: &ExperimentConfig) -> Option<f64> {
    let mut standard = config.miners.iter().filter_map(|m| match m.strategy {
        StrategySpec::Standard { gamma } => Some(gamma.unwrap_or(0.5)),
        _ => None,
    });
    let g = standard.next()?;
    let selfish = config
        .miners
        .iter()
        .any(|m| matches!(m.strategy, StrategySpec::Selfish));
    selfish.then_some(g)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, HarnessError> {
    if spec.schema != SCHEMA_VERSION {
        return Err(HarnessError::Invalid(format!(
            "unsupported schema {} (expected {SCHEMA_VERSION})",
            spec.schema
        )));
    }
    if spec.grid.is_empty() {
        return Err(HarnessError::Invalid("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(spec.grid.len());
    for &value in &spec.grid {
        let config = spec.point(value)?;
        let result = simulate(&config)?;
        let subject = config.subject().expect("validated config has a subject");
        let share = result
            .aggregate
            .miner(subject.index)
            .expect("subject is summarized");
        let alpha = subject.power;
        let gamma = honest_gamma(&config);
        let (revenue, threshold) = match gamma {
            Some(g) if alpha < 0.5 => (
                math::selfish_revenue(alpha, g)?,
                math::selfish_threshold(g)?,
            ),
            _ => (f64::NAN, f64::NAN),
        };
        rows.push(SweepRow {
            value,
            alpha,
            gamma: gamma.unwrap_or(f64::NAN),
            inertia: config.protocol_inertia(),
            replications: result.aggregate.replications,
            mean_share: share.mean_share,
            se: share.se,
            ci_low: share.ci_low,
            ci_high: share.ci_high,
            selfish_revenue: revenue,
            threshold,
        });
    }
    Ok(rows)
}

pub(crate) fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let header = [
        "value",
        "alpha",
        "gamma",
        "inertia",
        "replications",
        "mean_share",
        "se",
        "ci_low",
        "ci_high",
        "selfish_revenue",
        "threshold",
    ];
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                csv_float(r.value),
                csv_float(r.alpha),
                csv_float(r.gamma),
                r.inertia.map(|i| i.to_string()).unwrap_or_default(),
                r.replications.to_string(),
                csv_float(r.mean_share),
                csv_float(r.se),
                csv_float(r.ci_low),
                csv_float(r.ci_high),
                csv_float(r.selfish_revenue),
                csv_float(r.threshold),
            ]
        }),
    )
}

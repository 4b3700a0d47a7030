//! Per-miner decision rules.
//!
//! A strategy is asked twice per period: once for its mining target, before
//! the lottery, and once for the blocks it releases, after the lottery.
//! The two protocol rules (standard and inertial) are pure functions of the
//! public view, the randomization value and the previous target; deviants
//! carry their own state.

mod protocol;
mod scripted;
mod selfish;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::game::{BlockId, GameError, ObservedHistory};

pub use protocol::{inertial_target, pick_uniform, standard_target, Protocol, TieBreak};
pub use scripted::{
    scripted_decide, Script, ScriptPublish, ScriptStep, ScriptTarget, ScriptedMiner,
};
pub use selfish::{LeadState, SelfishMiner, SelfishState};

/// Result of the period's lottery, as seen by one miner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MiningOutcome {
    /// This miner found the period's block. Exactly one block is found per
    /// period, so `false` means another miner found it.
    pub won: bool,
    pub own_block: Option<BlockId>,
}

pub trait Strategy: Send {
    /// Block to mine on in the current period.
    fn choose_target(&mut self, view: &ObservedHistory<'_>) -> Result<BlockId, GameError>;

    /// Own unpublished blocks to release at the end of the current period.
    fn choose_publication(
        &mut self,
        view: &ObservedHistory<'_>,
        outcome: MiningOutcome,
    ) -> Result<Vec<BlockId>, GameError>;

    fn lead_occupancy(&self) -> Option<&BTreeMap<LeadState, u64>> {
        None
    }
}

/// Strategy section of a miner's configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// Longest public chain, ties broken by the public randomization value.
    Standard {
        /// Experiment-only tie bias: with probability `gamma` the earliest
        /// mined of the tied tips is chosen. Absent means uniform ties.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Inertial {
        inertia: u32,
    },
    Selfish,
    Scripted {
        script: Script,
        /// Rule for periods the script does not cover; defaults to the rule
        /// followed by the other miners.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback_inertia: Option<u32>,
    },
}

impl StrategySpec {
    pub fn standard() -> Self {
        StrategySpec::Standard { gamma: None }
    }

    pub fn inertial(inertia: u32) -> Self {
        StrategySpec::Inertial { inertia }
    }

    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            StrategySpec::Standard { .. } | StrategySpec::Inertial { .. }
        )
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            StrategySpec::Standard { gamma: Some(g) } if !(0.0..=1.0).contains(g) => {
                Err(format!("gamma must lie in [0, 1], got {g}"))
            }
            StrategySpec::Inertial { inertia: 0 } => Err("inertia must be at least 1".into()),
            StrategySpec::Scripted {
                fallback_inertia: Some(0),
                ..
            } => Err("fallback inertia must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

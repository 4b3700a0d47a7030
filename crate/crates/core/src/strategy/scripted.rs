use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::game::{BlockId, GameError, ObservedHistory, StrategyDecision};
use crate::strategy::{MiningOutcome, Protocol, Strategy};

/// Where a scripted miner mines in one period.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptTarget {
    /// Whatever the fallback protocol would choose.
    #[default]
    Protocol,
    /// Tip of the longest public chain, ties to the smallest id.
    LongestPublic,
    /// Deepest own unpublished block; the protocol target if there is none.
    OwnPrivateTip,
    Block(BlockId),
    /// The `k mod n`-th of the `n` visible blocks, sorted by id.
    Visible(u64),
}

/// Which own unpublished blocks a scripted miner releases.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptPublish {
    #[default]
    All,
    None,
    Blocks(Vec<BlockId>),
    /// Bit `i` releases the `i`-th own unpublished block in id order.
    Mask(u64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptStep {
    pub target: ScriptTarget,
    pub publish: ScriptPublish,
}

/// Per-period instructions. Periods without a step behave like the
/// fallback protocol. With `cycle = Some(c)`, period `t` plays step
/// `((t - 1) mod c) + 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Script {
    #[serde(deserialize_with = "period_keys")]
    pub steps: BTreeMap<u64, ScriptStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<u64>,
}

// JSON object keys are strings; inside a tagged strategy section serde
// buffers them and no longer converts to integers on its own.
fn period_keys<'de, D>(de: D) -> Result<BTreeMap<u64, ScriptStep>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize, PartialEq, Eq, PartialOrd, Ord)]
    #[serde(untagged)]
    enum Key {
        Number(u64),
        Text(String),
    }
    BTreeMap::<Key, ScriptStep>::deserialize(de)?
        .into_iter()
        .map(|(k, step)| {
            let period = match k {
                Key::Number(n) => n,
                Key::Text(s) => s.parse().map_err(|_| {
                    serde::de::Error::custom(format!("script period must be an integer, got {s:?}"))
                })?,
            };
            Ok((period, step))
        })
        .collect()
}

impl Script {
    pub fn step(&self, period: u64) -> Option<&ScriptStep> {
        let key = match self.cycle {
            Some(c) if c > 0 && period > 0 => (period - 1) % c + 1,
            _ => period,
        };
        self.steps.get(&key)
    }
}

fn resolve_target(
    view: &ObservedHistory<'_>,
    target: &ScriptTarget,
    fallback: BlockId,
) -> Result<BlockId, GameError> {
    Ok(match *target {
        ScriptTarget::Protocol => fallback,
        ScriptTarget::LongestPublic => view.longest_chains()[0].0,
        ScriptTarget::OwnPrivateTip => view
            .own_unpublished()
            .iter()
            .map(|&b| (view.depth(b).unwrap_or(0), std::cmp::Reverse(b)))
            .max()
            .map(|(_, b)| b.0)
            .unwrap_or(fallback),
        ScriptTarget::Block(b) => {
            if !view.is_visible(b) {
                return Err(GameError::ScriptUnknownBlock {
                    period: view.period(),
                    block: b,
                });
            }
            b
        }
        ScriptTarget::Visible(k) => {
            let visible = view.visible_blocks();
            visible[(k % visible.len() as u64) as usize]
        }
    })
}

fn resolve_publish(
    view: &ObservedHistory<'_>,
    publish: &ScriptPublish,
) -> Result<Vec<BlockId>, GameError> {
    let mut own = view.own_unpublished().to_vec();
    own.sort_unstable();
    Ok(match publish {
        ScriptPublish::All => own,
        ScriptPublish::None => Vec::new(),
        ScriptPublish::Blocks(ids) => {
            if let Some(&b) = ids.iter().find(|b| view.block(**b).is_none()) {
                return Err(GameError::ScriptUnknownBlock {
                    period: view.period(),
                    block: b,
                });
            }
            ids.clone()
        }
        ScriptPublish::Mask(bits) => own
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| i < 64 && bits >> i & 1 == 1)
            .map(|(_, b)| b)
            .collect(),
    })
}

/// Replays `script` at the view's period against one view. `fallback` is
/// the protocol target used for uncovered periods and `protocol` targets.
pub fn scripted_decide(
    view: &ObservedHistory<'_>,
    script: &Script,
    fallback: BlockId,
) -> Result<StrategyDecision, GameError> {
    let default = ScriptStep::default();
    let step = script.step(view.period()).unwrap_or(&default);
    Ok(StrategyDecision {
        target: resolve_target(view, &step.target, fallback)?,
        publish: resolve_publish(view, &step.publish)?,
    })
}

/// Deterministic deviant driven by a [`Script`].
#[derive(Clone, Debug)]
pub struct ScriptedMiner {
    script: Script,
    fallback: Protocol,
}

impl ScriptedMiner {
    pub fn new(script: Script, fallback: Protocol) -> Self {
        ScriptedMiner { script, fallback }
    }
}

impl Strategy for ScriptedMiner {
    fn choose_target(&mut self, view: &ObservedHistory<'_>) -> Result<BlockId, GameError> {
        // The fallback rule runs every period so that its memory stays
        // current; it remembers the miner's own previous target when that
        // target is public.
        if let Protocol::Inertial { previous, .. } = &mut self.fallback {
            if view.is_public(view.previous_target()) {
                *previous = view.previous_target();
            }
        }
        let fallback = self.fallback.decide_target(view)?;
        let step = self.script.step(view.period()).cloned().unwrap_or_default();
        resolve_target(view, &step.target, fallback)
    }

    fn choose_publication(
        &mut self,
        view: &ObservedHistory<'_>,
        _outcome: MiningOutcome,
    ) -> Result<Vec<BlockId>, GameError> {
        match self.script.step(view.period()) {
            Some(step) => resolve_publish(view, &step.publish),
            None => Ok(view.own_unpublished().to_vec()),
        }
    }
}

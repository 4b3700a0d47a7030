use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::game::{BlockId, GameError, ObservedHistory};
use crate::strategy::{MiningOutcome, Protocol, Strategy};

/// Position of the selfish miner relative to the protocol side, sampled at
/// the start of each period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadState {
    /// No private branch.
    Zero,
    /// Two public tips of equal depth, one of them the attacker's.
    Race,
    /// Private branch ahead of the protocol side's head by this many blocks.
    Lead(u64),
}

/// Bookkeeping of the withholding attack.
///
/// `private_chain` holds the attacker's blocks built on `fork_base`, oldest
/// first. Blocks already released form a prefix of it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SelfishState {
    pub private_chain: Vec<BlockId>,
    pub fork_base: BlockId,
    /// Depth of the private head minus depth of the protocol side's head.
    pub lead: i64,
    pub race: bool,
}

impl SelfishState {
    pub fn head(&self) -> BlockId {
        self.private_chain.last().copied().unwrap_or(self.fork_base)
    }
}

/// Eyal–Sirer selfish mining, written in terms of depths so that it also
/// runs against the inertial protocol.
///
/// The attacker needs to know where the protocol side mines. That target is
/// a deterministic function of the public tree and `xi`, so the miner keeps
/// a private copy of the protocol rule and evaluates it alongside.
#[derive(Clone, Debug)]
pub struct SelfishMiner {
    shadow: Protocol,
    state: SelfishState,
    honest_head: BlockId,
    occupancy: BTreeMap<LeadState, u64>,
}

impl SelfishMiner {
    /// `protocol_side` is the rule followed by every other miner.
    pub fn new(protocol_side: Protocol) -> Self {
        SelfishMiner {
            shadow: protocol_side,
            state: SelfishState::default(),
            honest_head: BlockId::GENESIS,
            occupancy: BTreeMap::new(),
        }
    }

    pub fn state(&self) -> &SelfishState {
        &self.state
    }

    fn check_rooted(&self, view: &ObservedHistory<'_>) -> Result<(), GameError> {
        let mut parent = self.state.fork_base;
        for &b in &self.state.private_chain {
            let block = view.block(b).ok_or_else(|| {
                GameError::InconsistentSelfishState(format!("{b} is not visible"))
            })?;
            if block.parent != parent || !view.is_own(b) {
                return Err(GameError::InconsistentSelfishState(format!(
                    "{b} does not extend {parent}"
                )));
            }
            parent = b;
        }
        Ok(())
    }

    fn adopt(&mut self, head: BlockId) {
        self.state.private_chain.clear();
        self.state.fork_base = head;
    }

    fn unpublished(&self, view: &ObservedHistory<'_>) -> Vec<BlockId> {
        self.state
            .private_chain
            .iter()
            .copied()
            .filter(|&b| view.block(b).is_some_and(|b| !b.is_published()))
            .collect()
    }
}

fn depth(view: &ObservedHistory<'_>, b: BlockId) -> i64 {
    view.depth(b)
        .expect("selfish miner only tracks visible blocks") as i64
}

impl Strategy for SelfishMiner {
    fn choose_target(&mut self, view: &ObservedHistory<'_>) -> Result<BlockId, GameError> {
        let h = self.shadow.decide_target(view)?;
        self.honest_head = h;
        let dh = depth(view, h);
        if self.state.private_chain.is_empty() {
            if depth(view, self.state.fork_base) <= dh {
                self.state.fork_base = h;
            }
        } else if depth(view, self.state.head()) < dh {
            self.adopt(h);
        }
        self.check_rooted(view)?;

        let head = self.state.head();
        let lead = depth(view, head) - dh;
        let chain_empty = self.state.private_chain.is_empty();
        self.state.lead = lead;
        self.state.race = !chain_empty && lead == 0;
        let label = if chain_empty {
            LeadState::Zero
        } else if self.state.race {
            LeadState::Race
        } else {
            LeadState::Lead(lead as u64)
        };
        *self.occupancy.entry(label).or_default() += 1;
        Ok(head)
    }

    fn choose_publication(
        &mut self,
        view: &ObservedHistory<'_>,
        outcome: MiningOutcome,
    ) -> Result<Vec<BlockId>, GameError> {
        if let Some(b) = outcome.own_block {
            self.state.private_chain.push(b);
            if self.state.race {
                // Winning the race: release and start over from the new tip.
                let release = self.unpublished(view);
                self.adopt(b);
                self.state.race = false;
                return Ok(release);
            }
            self.state.lead += 1;
            return Ok(Vec::new());
        }
        if self.state.private_chain.is_empty() {
            return Ok(Vec::new());
        }
        // The protocol side has just extended its head by one.
        let release = match self.state.lead {
            i64::MIN..=0 => {
                self.adopt(self.honest_head);
                Vec::new()
            }
            1 => self.unpublished(view),
            2 => {
                let all = self.unpublished(view);
                let head = self.state.head();
                self.adopt(head);
                all
            }
            _ => self.unpublished(view).into_iter().take(1).collect(),
        };
        self.state.lead -= 1;
        Ok(release)
    }

    fn lead_occupancy(&self) -> Option<&BTreeMap<LeadState, u64>> {
        Some(&self.occupancy)
    }
}

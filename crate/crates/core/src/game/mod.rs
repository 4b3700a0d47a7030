//! The mining game: world state, the per-period loop, and the information
//! each miner is allowed to see.
//!
//! Every period proceeds in four phases:
//!
//! 1. the public randomization value `xi` is drawn and revealed;
//! 2. every miner picks a mining target from what it can see (the public
//!    tree as of the previous period plus its own blocks);
//! 3. nature picks the winner with probability equal to its power, and the
//!    winner's new block is appended privately on top of its target;
//! 4. every miner picks a set of its own unpublished blocks to release; all
//!    releases are applied simultaneously.

mod rng;
mod trace;
mod tree;

use std::collections::BTreeMap;

use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forensics::{self, CanonicalChain, ForensicsError};
use crate::strategy::{
    LeadState, MiningOutcome, Protocol, ScriptedMiner, SelfishMiner, Strategy, StrategySpec,
};

pub use rng::{mix_seed, seeded_rng, uniform};
pub use trace::{write_jsonl, MinerDecision, TraceEvent};
pub use tree::{Block, BlockId, BlockTree, Children, MinerId};

/// Tolerance on the sum of miner powers.
pub const POWER_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("no miners configured")]
    NoMiners,
    #[error("{miner}: power {power} must be positive and finite")]
    NonPositivePower { miner: MinerId, power: f64 },
    #[error("powers must sum to 1 (got {0})")]
    PowerSum(f64),
    #[error("duplicate miner index {0}")]
    DuplicateMiner(MinerId),
    #[error("invalid strategy for {miner}: {reason}")]
    InvalidStrategy { miner: MinerId, reason: String },
    #[error("block {0} does not exist")]
    UnknownBlock(BlockId),
    #[error("block {0} already exists")]
    DuplicateBlock(BlockId),
    #[error("block ids are sequential: expected {expected}, got {got}")]
    NonSequentialId { expected: BlockId, got: BlockId },
    #[error("parent {parent} of block {block} does not exist")]
    UnknownParent { block: BlockId, parent: BlockId },
    #[error("block {0} is already published")]
    AlreadyPublished(BlockId),
    #[error("block {0} cannot be published before it is mined")]
    PublishedBeforeMined(BlockId),
    #[error("block {0} is not connected to genesis in the public tree")]
    NotConnected(BlockId),
    #[error("{miner} targeted {target}, which it cannot see")]
    UnknownTarget { miner: MinerId, target: BlockId },
    #[error("{miner} tried to publish {block}, which it does not own")]
    NotOwned { miner: MinerId, block: BlockId },
    #[error("selfish state inconsistent: {0}")]
    InconsistentSelfishState(String),
    #[error("script references unknown block {block} in period {period}")]
    ScriptUnknownBlock { period: u64, block: BlockId },
    #[error("settlement window exceeds horizon ({settlement} > {horizon})")]
    SettlementExceedsHorizon { settlement: u64, horizon: u64 },
    #[error(transparent)]
    Forensics(#[from] Box<ForensicsError>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerConfig {
    pub index: MinerId,
    pub power: f64,
    pub strategy: StrategySpec,
}

/// Everything needed to start a game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameConfig {
    pub miners: Vec<MinerConfig>,
    /// Seed handed directly to the period RNG (see [`seeded_rng`]).
    pub seed: u64,
    /// Keep a full [`TraceEvent`] per period.
    pub record_events: bool,
    /// Miner whose payoff the forensics account for; defaults to the unique
    /// deviant, or the lowest index when everyone follows a protocol.
    pub subject: Option<MinerId>,
}

impl GameConfig {
    pub fn new(miners: Vec<MinerConfig>, seed: u64) -> Self {
        GameConfig {
            miners,
            seed,
            record_events: false,
            subject: None,
        }
    }
}

/// What a miner's strategy decided in one period.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyDecision {
    pub target: BlockId,
    pub publish: Vec<BlockId>,
}

/// Read-only view of the game available to one miner: the public tree as of
/// the previous period, the miner's own blocks, and the randomization values
/// drawn so far.
#[derive(Clone, Copy)]
pub struct ObservedHistory<'a> {
    tree: &'a BlockTree,
    miner: MinerId,
    period: u64,
    xi: &'a [f64],
    own_unpublished: &'a [BlockId],
    previous_target: BlockId,
}

impl<'a> ObservedHistory<'a> {
    pub fn new(
        tree: &'a BlockTree,
        miner: MinerId,
        period: u64,
        xi: &'a [f64],
        own_unpublished: &'a [BlockId],
        previous_target: BlockId,
    ) -> Self {
        ObservedHistory {
            tree,
            miner,
            period,
            xi,
            own_unpublished,
            previous_target,
        }
    }

    pub fn miner(&self) -> MinerId {
        self.miner
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    /// The current period's randomization value.
    pub fn xi(&self) -> f64 {
        self.xi.last().copied().unwrap_or(0.0)
    }

    pub fn xi_history(&self) -> &'a [f64] {
        self.xi
    }

    /// This miner's target in the previous period (genesis before period 1).
    pub fn previous_target(&self) -> BlockId {
        self.previous_target
    }

    /// Published, or mined by this miner.
    pub fn is_visible(&self, id: BlockId) -> bool {
        match self.tree.get(id) {
            Some(b) => b.published_at.is_some() || b.miner == Some(self.miner),
            None => false,
        }
    }

    pub fn block(&self, id: BlockId) -> Option<&'a Block> {
        if self.is_visible(id) {
            self.tree.get(id)
        } else {
            None
        }
    }

    pub fn depth(&self, id: BlockId) -> Option<u64> {
        self.is_visible(id).then(|| self.tree.depth(id))
    }

    /// Connected to genesis through published blocks.
    pub fn is_public(&self, id: BlockId) -> bool {
        self.tree.is_connected(id)
    }

    pub fn is_own(&self, id: BlockId) -> bool {
        self.tree.get(id).and_then(|b| b.miner) == Some(self.miner)
    }

    pub fn own_unpublished(&self) -> &'a [BlockId] {
        self.own_unpublished
    }

    /// Public leaves, deepest first.
    pub fn public_tips(&self) -> impl Iterator<Item = (BlockId, u64)> + 'a {
        self.tree.public_tips()
    }

    pub fn public_tip_count(&self) -> usize {
        self.tree.public_tip_count()
    }

    pub fn max_public_depth(&self) -> u64 {
        self.tree.max_public_depth()
    }

    pub fn longest_chains(&self) -> Vec<(BlockId, u64)> {
        self.tree.longest_chains()
    }

    pub fn chains_through(&self, b: BlockId) -> Result<Vec<BlockId>, GameError> {
        self.tree.chains_through(b)
    }

    /// Every visible block, sorted by id.
    pub fn visible_blocks(&self) -> Vec<BlockId> {
        self.tree
            .blocks()
            .iter()
            .filter(|b| b.published_at.is_some() || b.miner == Some(self.miner))
            .map(|b| b.id)
            .collect()
    }
}

enum Behavior {
    Protocol { group: usize },
    Custom(Box<dyn Strategy>),
}

struct Slot {
    config: MinerConfig,
    behavior: Behavior,
    unpublished: Vec<BlockId>,
    last_target: BlockId,
}

/// Protocol followers with an identical rule decide once per period.
struct ProtocolGroup {
    spec: StrategySpec,
    rule: Protocol,
    members: Vec<usize>,
}

pub struct GameState {
    period: u64,
    tree: BlockTree,
    slots: Vec<Slot>,
    groups: Vec<ProtocolGroup>,
    cumulative: Vec<f64>,
    rng: Xoshiro256PlusPlus,
    xi: Vec<f64>,
    protocol_targets: Option<Vec<BlockId>>,
    events: Option<Vec<TraceEvent>>,
    fork_periods: u64,
    blocks_by_miner: Vec<u64>,
    subject: MinerId,
    deviants: usize,
    seed: u64,
}

/// Validates `config` and returns the initial state: genesis only, every
/// miner's previous target set to genesis.
pub fn new_game(config: &GameConfig) -> Result<GameState, GameError> {
    GameState::new(config)
}

impl GameState {
    pub fn new(config: &GameConfig) -> Result<Self, GameError> {
        validate_miners(&config.miners)?;
        let mut miners = config.miners.clone();
        miners.sort_by_key(|m| m.index);

        let mut groups: Vec<ProtocolGroup> = Vec::new();
        let mut protocol_of = vec![None; miners.len()];
        for (slot, m) in miners.iter().enumerate() {
            if let Some(rule) = Protocol::from_spec(&m.strategy) {
                let g = match groups.iter().position(|g| g.spec == m.strategy) {
                    Some(g) => g,
                    None => {
                        groups.push(ProtocolGroup {
                            spec: m.strategy.clone(),
                            rule,
                            members: Vec::new(),
                        });
                        groups.len() - 1
                    }
                };
                groups[g].members.push(slot);
                protocol_of[slot] = Some(g);
            }
        }

        let protocol_side = (groups.len() == 1).then(|| groups[0].rule.clone());
        let mut slots = Vec::with_capacity(miners.len());
        let mut deviants = Vec::new();
        for (slot, m) in miners.iter().enumerate() {
            let behavior = match protocol_of[slot] {
                Some(group) => Behavior::Protocol { group },
                None => {
                    deviants.push(m.index);
                    let side = protocol_side
                        .clone()
                        .ok_or_else(|| GameError::InvalidStrategy {
                            miner: m.index,
                            reason:
                                "a deviant needs exactly one protocol rule among the other miners"
                                    .into(),
                        })?;
                    match &m.strategy {
                        StrategySpec::Selfish => {
                            Behavior::Custom(Box::new(SelfishMiner::new(side)))
                        }
                        StrategySpec::Scripted {
                            script,
                            fallback_inertia,
                        } => {
                            let fallback = match fallback_inertia {
                                Some(i) => Protocol::inertial(*i),
                                None => side,
                            };
                            Behavior::Custom(Box::new(ScriptedMiner::new(script.clone(), fallback)))
                        }
                        _ => unreachable!("protocol specs are grouped above"),
                    }
                }
            };
            slots.push(Slot {
                config: m.clone(),
                behavior,
                unpublished: Vec::new(),
                last_target: BlockId::GENESIS,
            });
        }
        let selfish = miners
            .iter()
            .filter(|m| matches!(m.strategy, StrategySpec::Selfish))
            .count();
        if selfish > 1 {
            return Err(GameError::InvalidStrategy {
                miner: miners[0].index,
                reason: "at most one selfish miner per run".into(),
            });
        }

        let subject = match (config.subject, deviants.as_slice()) {
            (Some(s), _) => {
                if !miners.iter().any(|m| m.index == s) {
                    return Err(GameError::InvalidStrategy {
                        miner: s,
                        reason: "subject is not a configured miner".into(),
                    });
                }
                s
            }
            (None, [d]) => *d,
            (None, _) => miners[0].index,
        };

        let mut acc = 0.0;
        let cumulative = miners
            .iter()
            .map(|m| {
                acc += m.power;
                acc
            })
            .collect();

        Ok(GameState {
            period: 0,
            tree: BlockTree::new(),
            blocks_by_miner: vec![0; slots.len()],
            slots,
            protocol_targets: (groups.len() == 1).then(Vec::new),
            groups,
            cumulative,
            rng: seeded_rng(config.seed),
            xi: Vec::new(),
            events: config.record_events.then(Vec::new),
            fork_periods: 0,
            subject,
            deviants: deviants.len(),
            seed: config.seed,
        })
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn miners(&self) -> impl Iterator<Item = &MinerConfig> {
        self.slots.iter().map(|s| &s.config)
    }

    /// Periods that ended with more than one public leaf.
    pub fn fork_periods(&self) -> u64 {
        self.fork_periods
    }

    /// Blocks mined so far, per miner in index order.
    pub fn blocks_by_miner(&self) -> &[u64] {
        &self.blocks_by_miner
    }

    /// Period occupancy of the selfish miner's lead states, if there is one.
    pub fn lead_occupancy(&self) -> Option<BTreeMap<LeadState, u64>> {
        self.slots.iter().find_map(|s| match &s.behavior {
            Behavior::Custom(c) => c.lead_occupancy().cloned(),
            _ => None,
        })
    }

    fn view(&self, slot: usize) -> ObservedHistory<'_> {
        let s = &self.slots[slot];
        ObservedHistory::new(
            &self.tree,
            s.config.index,
            self.period,
            &self.xi,
            &s.unpublished,
            s.last_target,
        )
    }

    /// Plays one period and returns its full record.
    pub fn step(&mut self) -> Result<TraceEvent, GameError> {
        Ok(self.play_period(true)?.expect("event requested"))
    }

    /// Plays one period without building a [`TraceEvent`] unless the state
    /// records events.
    pub fn advance(&mut self) -> Result<(), GameError> {
        let record = self.events.is_some();
        self.play_period(record).map(|_| ())
    }

    fn play_period(&mut self, build_event: bool) -> Result<Option<TraceEvent>, GameError> {
        self.period += 1;
        let t = self.period;
        let xi = uniform(&mut self.rng);
        self.xi.push(xi);

        // Targets. Protocol groups decide once, on the first member's view.
        let mut group_targets = Vec::with_capacity(self.groups.len());
        for g in 0..self.groups.len() {
            let first = self.groups[g].members[0];
            let view = ObservedHistory::new(
                &self.tree,
                self.slots[first].config.index,
                t,
                &self.xi,
                &self.slots[first].unpublished,
                self.slots[first].last_target,
            );
            let target = self.groups[g].rule.decide_target(&view)?;
            group_targets.push(target);
        }
        let mut targets = Vec::with_capacity(self.slots.len());
        for slot in 0..self.slots.len() {
            let target = match &self.slots[slot].behavior {
                Behavior::Protocol { group } => group_targets[*group],
                Behavior::Custom(_) => {
                    let s = &mut self.slots[slot];
                    let view = ObservedHistory::new(
                        &self.tree,
                        s.config.index,
                        t,
                        &self.xi,
                        &s.unpublished,
                        s.last_target,
                    );
                    let Behavior::Custom(strategy) = &mut s.behavior else {
                        unreachable!()
                    };
                    strategy.choose_target(&view)?
                }
            };
            if !self.view(slot).is_visible(target) {
                return Err(GameError::UnknownTarget {
                    miner: self.slots[slot].config.index,
                    target,
                });
            }
            targets.push(target);
        }

        // Mining lottery.
        let u = uniform(&mut self.rng);
        let winner = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.slots.len() - 1);
        let parent = targets[winner];
        let new_block = self.tree.insert(Block {
            id: self.tree.next_id(),
            parent,
            miner: Some(self.slots[winner].config.index),
            mined_at: t,
            published_at: None,
        })?;
        self.slots[winner].unpublished.push(new_block);
        self.blocks_by_miner[winner] += 1;

        // Publication choices, made against the pre-publication public tree.
        let mut releases: Vec<Vec<BlockId>> = Vec::with_capacity(self.slots.len());
        for (slot, &target) in targets.iter().enumerate() {
            let outcome = MiningOutcome {
                won: slot == winner,
                own_block: (slot == winner).then_some(new_block),
            };
            let release = match &self.slots[slot].behavior {
                Behavior::Protocol { .. } => self.slots[slot].unpublished.clone(),
                Behavior::Custom(_) => {
                    let s = &mut self.slots[slot];
                    let view = ObservedHistory::new(
                        &self.tree,
                        s.config.index,
                        t,
                        &self.xi,
                        &s.unpublished,
                        target,
                    );
                    let Behavior::Custom(strategy) = &mut s.behavior else {
                        unreachable!()
                    };
                    strategy.choose_publication(&view, outcome)?
                }
            };
            self.check_release(slot, &release)?;
            releases.push(release);
        }
        for (slot, release) in releases.iter().enumerate() {
            for &id in release {
                self.tree.publish(id, t)?;
            }
            if !release.is_empty() {
                self.slots[slot]
                    .unpublished
                    .retain(|b| !release.contains(b));
            }
            self.slots[slot].last_target = targets[slot];
        }

        if self.tree.public_tip_count() > 1 {
            self.fork_periods += 1;
        }
        if let Some(pt) = &mut self.protocol_targets {
            pt.push(group_targets[0]);
        }

        let event = build_event.then(|| TraceEvent {
            period: t,
            xi,
            winner: self.slots[winner].config.index,
            new_block: Some(new_block),
            parent,
            decisions: self
                .slots
                .iter()
                .zip(targets.iter().zip(releases))
                .map(|(s, (&target, publish))| MinerDecision {
                    miner: s.config.index,
                    decision: StrategyDecision { target, publish },
                })
                .collect(),
            public_tips: {
                let mut tips: Vec<_> = self.tree.public_tips().collect();
                tips.sort_unstable();
                tips
            },
        });
        if let (Some(events), Some(e)) = (&mut self.events, &event) {
            events.push(e.clone());
        }
        Ok(event)
    }

    fn check_release(&self, slot: usize, release: &[BlockId]) -> Result<(), GameError> {
        let miner = self.slots[slot].config.index;
        for (i, &id) in release.iter().enumerate() {
            let owned = self
                .tree
                .get(id)
                .map(|b| b.miner == Some(miner))
                .unwrap_or(false);
            if !owned {
                return Err(GameError::NotOwned { miner, block: id });
            }
            if self.tree.is_published(id) || release[..i].contains(&id) {
                return Err(GameError::AlreadyPublished(id));
            }
        }
        Ok(())
    }

    /// Consumes the state into its replayable record.
    pub fn into_trace(self) -> Trace {
        let lead_occupancy = self.lead_occupancy();
        Trace {
            seed: self.seed,
            miners: self.slots.into_iter().map(|s| s.config).collect(),
            horizon: self.period,
            tree: self.tree,
            xi: self.xi,
            protocol_targets: self.protocol_targets,
            events: self.events,
            fork_periods: self.fork_periods,
            subject: self.subject,
            deviants: self.deviants,
            lead_occupancy,
        }
    }

    #[cfg(test)]
    pub(crate) fn inject_private_block(&mut self, miner: MinerId, parent: BlockId) -> BlockId {
        let slot = self
            .slots
            .iter()
            .position(|s| s.config.index == miner)
            .unwrap();
        let id = self
            .tree
            .insert(Block {
                id: self.tree.next_id(),
                parent,
                miner: Some(miner),
                mined_at: self.period,
                published_at: None,
            })
            .unwrap();
        self.slots[slot].unpublished.push(id);
        id
    }

    #[cfg(test)]
    pub(crate) fn peek_targets(&mut self) -> Vec<BlockId> {
        // Decision phase of the next period on a throwaway copy of the strategies'
        // inputs: only protocol miners are evaluated, which is what the
        // information-hiding test needs.
        let mut xi = self.xi.clone();
        xi.push(0.5);
        self.slots
            .iter()
            .map(|s| match &s.behavior {
                Behavior::Protocol { group } => {
                    let view = ObservedHistory::new(
                        &self.tree,
                        s.config.index,
                        self.period + 1,
                        &xi,
                        &s.unpublished,
                        s.last_target,
                    );
                    self.groups[*group]
                        .rule
                        .clone()
                        .decide_target(&view)
                        .unwrap()
                }
                Behavior::Custom(_) => BlockId::GENESIS,
            })
            .collect()
    }
}

fn validate_miners(miners: &[MinerConfig]) -> Result<(), GameError> {
    if miners.is_empty() {
        return Err(GameError::NoMiners);
    }
    let mut sum = 0.0;
    for (i, m) in miners.iter().enumerate() {
        if !(m.power.is_finite() && m.power > 0.0) {
            return Err(GameError::NonPositivePower {
                miner: m.index,
                power: m.power,
            });
        }
        if miners[..i].iter().any(|o| o.index == m.index) {
            return Err(GameError::DuplicateMiner(m.index));
        }
        m.strategy
            .validate()
            .map_err(|reason| GameError::InvalidStrategy {
                miner: m.index,
                reason,
            })?;
        sum += m.power;
    }
    if (sum - 1.0).abs() > POWER_SUM_TOLERANCE {
        return Err(GameError::PowerSum(sum));
    }
    Ok(())
}

/// The complete record of one run.
#[derive(Clone, Debug)]
pub struct Trace {
    pub seed: u64,
    pub miners: Vec<MinerConfig>,
    pub horizon: u64,
    pub tree: BlockTree,
    /// Realized randomization values, period 1 first.
    pub xi: Vec<f64>,
    /// Target of the protocol side in each period, when exactly one protocol
    /// rule is in play.
    pub protocol_targets: Option<Vec<BlockId>>,
    pub events: Option<Vec<TraceEvent>>,
    pub fork_periods: u64,
    pub subject: MinerId,
    pub deviants: usize,
    pub lead_occupancy: Option<BTreeMap<LeadState, u64>>,
}

impl Trace {
    pub fn miner(&self, id: MinerId) -> Option<&MinerConfig> {
        self.miners.iter().find(|m| m.index == id)
    }

    pub fn subject_power(&self) -> f64 {
        self.miner(self.subject).map(|m| m.power).unwrap_or(0.0)
    }

    /// Inertia of the protocol side, if it is inertial.
    pub fn protocol_inertia(&self) -> Option<u32> {
        self.miners.iter().find_map(|m| match m.strategy {
            StrategySpec::Inertial { inertia } if m.index != self.subject || self.deviants == 0 => {
                Some(inertia)
            }
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinerPayoff {
    pub miner: MinerId,
    pub blocks_on_chain: u64,
    pub share: f64,
}

/// Finite-horizon payoff: each miner's share of the settled canonical chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffReport {
    pub settlement: u64,
    pub chain_depth: u64,
    pub total_on_chain: u64,
    pub tie_at_horizon: bool,
    pub fork_periods: u64,
    pub miners: Vec<MinerPayoff>,
}

impl PayoffReport {
    pub fn share(&self, miner: MinerId) -> Option<f64> {
        self.miners
            .iter()
            .find(|m| m.miner == miner)
            .map(|m| m.share)
    }
}

/// Shares of settled canonical-chain blocks (genesis excluded).
pub fn payoff(trace: &Trace, chain: &CanonicalChain) -> PayoffReport {
    let settled = chain.settled_depth();
    let mut counts: BTreeMap<MinerId, u64> = trace.miners.iter().map(|m| (m.index, 0)).collect();
    let mut total = 0;
    for &id in chain.blocks.iter().take(settled as usize).skip(1) {
        if let Some(m) = trace.tree.block(id).miner {
            *counts.entry(m).or_default() += 1;
            total += 1;
        }
    }
    PayoffReport {
        settlement: chain.settlement,
        chain_depth: chain.depth(),
        total_on_chain: total,
        tie_at_horizon: chain.tie_at_horizon,
        fork_periods: trace.fork_periods,
        miners: counts
            .into_iter()
            .map(|(miner, n)| MinerPayoff {
                miner,
                blocks_on_chain: n,
                share: if total == 0 {
                    0.0
                } else {
                    n as f64 / total as f64
                },
            })
            .collect(),
    }
}

/// Plays `horizon` periods and scores the result with settlement window
/// `settlement`.
pub fn run(
    config: &GameConfig,
    horizon: u64,
    settlement: u64,
) -> Result<(Trace, PayoffReport), GameError> {
    if settlement > horizon {
        return Err(GameError::SettlementExceedsHorizon {
            settlement,
            horizon,
        });
    }
    let mut state = GameState::new(config)?;
    for _ in 0..horizon {
        state.advance()?;
    }
    let trace = state.into_trace();
    let chain = forensics::canonical_chain(&trace.tree, settlement).map_err(Box::new)?;
    let report = payoff(&trace, &chain);
    Ok((trace, report))
}

#[cfg(test)]
mod tests;

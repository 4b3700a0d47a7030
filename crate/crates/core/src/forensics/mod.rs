//! Accounting on a finished run: which blocks made the final chain, which
//! were mined dishonestly, and which dishonest block is charged with each
//! protocol block that fell off the chain.
//!
//! Block `t` is the block mined in period `t`, so per-block and per-period
//! series share an index.

mod bounds;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::game::{BlockId, BlockTree, MinerId, Trace};
use crate::math::MathError;

pub use bounds::{
    check_qr_bound, late_kill_tail, ForensicReport, LagBin, QrBound, BATCHES, MIN_QR_PERIODS,
};

#[derive(Debug, Error, PartialEq)]
pub enum ForensicsError {
    #[error("settlement exceeds chain: window {settlement} on a chain of depth {depth}")]
    SettlementExceedsChain { settlement: u64, depth: u64 },
    #[error("trace has no per-period protocol targets (needs exactly one protocol rule)")]
    MissingDecisions,
    #[error("accounting needs a single deviant, found {0}")]
    MultipleDeviants(usize),
    #[error("J = {j} out of range: need 1 <= J <= {max}")]
    JOutOfRange { j: u32, max: u32 },
    #[error("too few periods for the bound check: {periods} < {required}")]
    TooFewPeriods { periods: usize, required: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    DegenerateAlpha(f64),
    #[error("killed block {block} has honest cousin {cousin}")]
    HonestCousin { block: BlockId, cousin: BlockId },
    #[error(transparent)]
    Math(#[from] MathError),
}

/// The deepest public chain at the end of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalChain {
    /// Genesis first; `blocks[d - 1]` has depth `d`.
    pub blocks: Vec<BlockId>,
    pub settlement: u64,
    /// More than one public chain had the maximal depth.
    pub tie_at_horizon: bool,
}

impl CanonicalChain {
    pub fn depth(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn tip(&self) -> BlockId {
        *self.blocks.last().expect("chain holds genesis")
    }

    /// Depth of the last block counted for payoffs.
    pub fn settled_depth(&self) -> u64 {
        self.depth() - self.settlement
    }

    pub fn at_depth(&self, depth: u64) -> Option<BlockId> {
        depth
            .checked_sub(1)
            .and_then(|i| self.blocks.get(i as usize).copied())
    }

    pub fn contains(&self, tree: &BlockTree, b: BlockId) -> bool {
        self.at_depth(tree.depth(b)) == Some(b)
    }
}

/// Deepest public chain, ties to the smallest tip id.
pub fn canonical_chain(
    tree: &BlockTree,
    settlement: u64,
) -> Result<CanonicalChain, ForensicsError> {
    let longest = tree.longest_chains();
    let (tip, depth) = longest[0];
    if settlement >= depth {
        return Err(ForensicsError::SettlementExceedsChain { settlement, depth });
    }
    Ok(CanonicalChain {
        blocks: tree.path_to(tip),
        settlement,
        tie_at_horizon: longest.len() > 1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockTag {
    Honest,
    Dishonest,
    /// Dishonest, on top of an honest parent.
    Initial,
}

impl BlockTag {
    pub fn is_dishonest(self) -> bool {
        self != BlockTag::Honest
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockClassification {
    /// Indexed by block id (= mining period).
    pub tags: Vec<BlockTag>,
    /// The protocol side's target in each period; `protocol_target[0]` is
    /// genesis, standing in for period 0.
    pub protocol_target: Vec<BlockId>,
}

impl BlockClassification {
    pub fn tag(&self, b: BlockId) -> BlockTag {
        self.tags[b.index()]
    }
}

/// A block mined in period `t` is dishonest if it was not published in
/// period `t` or does not extend the protocol side's period-`t` target.
pub fn classify(trace: &Trace) -> Result<BlockClassification, ForensicsError> {
    if trace.deviants > 1 {
        return Err(ForensicsError::MultipleDeviants(trace.deviants));
    }
    let targets = trace
        .protocol_targets
        .as_ref()
        .ok_or(ForensicsError::MissingDecisions)?;
    if targets.len() + 1 < trace.tree.len() {
        return Err(ForensicsError::MissingDecisions);
    }
    let mut protocol_target = Vec::with_capacity(targets.len() + 1);
    protocol_target.push(BlockId::GENESIS);
    protocol_target.extend_from_slice(targets);

    let blocks = trace.tree.blocks();
    let mut tags = Vec::with_capacity(blocks.len());
    tags.push(BlockTag::Honest);
    for b in &blocks[1..] {
        let t = b.mined_at;
        let dishonest = b.published_at != Some(t) || b.parent != protocol_target[t as usize];
        tags.push(if !dishonest {
            BlockTag::Honest
        } else if tags[b.parent.index()] == BlockTag::Honest {
            BlockTag::Initial
        } else {
            BlockTag::Dishonest
        });
    }
    Ok(BlockClassification {
        tags,
        protocol_target,
    })
}

/// Deepest ancestor of `b` on the chain, `b` itself if it is on it.
pub fn nearest_ancestor_on_chain(tree: &BlockTree, chain: &CanonicalChain, b: BlockId) -> BlockId {
    let mut x = b;
    while !chain.contains(tree, x) {
        x = tree.parent(x);
    }
    x
}

/// The chain block at the depth of `b`, if the chain reaches that deep.
pub fn cousin(tree: &BlockTree, chain: &CanonicalChain, b: BlockId) -> Option<BlockId> {
    chain.at_depth(tree.depth(b))
}

/// Kills charged to dishonest blocks and the per-period series derived
/// from them.
#[derive(Clone, Debug, PartialEq)]
pub struct KillerAttribution {
    pub subject: MinerId,
    pub alpha: f64,
    pub j: u32,
    /// Protocol-side blocks off the chain that were charged to a killer.
    pub killed: Vec<BlockId>,
    pub killer_of: BTreeMap<BlockId, BlockId>,
    /// Killed blocks deeper than the chain tip.
    pub excluded_beyond_tip: u64,
    /// Killed blocks within the settlement window.
    pub excluded_settlement: u64,
    /// `k[t - 1]`: blocks killed by the block of period `t`.
    pub k: Vec<u32>,
    /// `l[t - 1]`: the block of period `t` is the subject's and on the chain.
    pub l: Vec<u8>,
}

impl KillerAttribution {
    pub fn periods(&self) -> usize {
        self.k.len()
    }

    pub fn excluded(&self) -> u64 {
        self.excluded_beyond_tip + self.excluded_settlement
    }

    /// Every protocol-side block off the chain, charged or excluded.
    pub fn killed_total(&self) -> u64 {
        self.killed.len() as u64 + self.excluded()
    }

    /// `S_t = alpha K_t + (1 - alpha) L_t`.
    pub fn s(&self) -> Vec<f64> {
        self.k
            .iter()
            .zip(&self.l)
            .map(|(&k, &l)| self.alpha * k as f64 + (1.0 - self.alpha) * l as f64)
            .collect()
    }
}

/// Largest admissible `J` given the protocol side's rule.
pub fn max_j(trace: &Trace) -> u32 {
    match trace.protocol_inertia() {
        Some(i) => i.saturating_sub(1),
        None => u32::MAX,
    }
}

/// Charges every protocol-side block that is off `chain` to a dishonest
/// block: its cousin when the cousin lies within `j` blocks of the first
/// block of the dishonest run ending at the cousin, that first block
/// otherwise.
pub fn killer_attribution(
    trace: &Trace,
    classification: &BlockClassification,
    chain: &CanonicalChain,
    j: u32,
) -> Result<KillerAttribution, ForensicsError> {
    let max = max_j(trace);
    if j < 1 || j > max {
        return Err(ForensicsError::JOutOfRange { j, max });
    }
    let tree = &trace.tree;
    let subject = trace.subject;

    // run_start[d - 1]: depth of the first block of the dishonest run on the
    // chain that ends at depth d (d itself if that block is honest).
    let mut run_start = Vec::with_capacity(chain.blocks.len());
    for (i, &b) in chain.blocks.iter().enumerate() {
        let d = i as u64 + 1;
        let start = if classification.tag(b).is_dishonest() && i > 0 {
            let prev = run_start[i - 1];
            if classification.tag(chain.blocks[i - 1]).is_dishonest() {
                prev
            } else {
                d
            }
        } else {
            d
        };
        run_start.push(start);
    }

    let periods = tree.len() - 1;
    let mut k = vec![0u32; periods];
    let mut l = vec![0u8; periods];
    let mut killed = Vec::new();
    let mut killer_of = BTreeMap::new();
    let (mut beyond, mut settlement) = (0, 0);
    let settled = chain.settled_depth();

    for block in &tree.blocks()[1..] {
        let id = block.id;
        let on_chain = chain.contains(tree, id);
        if block.miner == Some(subject) {
            if on_chain {
                l[id.index() - 1] = 1;
            }
            continue;
        }
        if on_chain {
            continue;
        }
        let d = tree.depth(id);
        if d > chain.depth() {
            beyond += 1;
            continue;
        }
        if d > settled {
            settlement += 1;
            continue;
        }
        let c = chain.blocks[d as usize - 1];
        if !classification.tag(c).is_dishonest() {
            return Err(ForensicsError::HonestCousin {
                block: id,
                cousin: c,
            });
        }
        let w_depth = run_start[d as usize - 1];
        let killer = if d <= w_depth + j as u64 {
            c
        } else {
            chain.blocks[w_depth as usize - 1]
        };
        k[killer.index() - 1] += 1;
        killed.push(id);
        killer_of.insert(id, killer);
    }

    Ok(KillerAttribution {
        subject,
        alpha: trace.subject_power(),
        j,
        killed,
        killer_of,
        excluded_beyond_tip: beyond,
        excluded_settlement: settlement,
        k,
        l,
    })
}

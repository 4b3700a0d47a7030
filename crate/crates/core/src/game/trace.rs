use std::io::{self, Write};

use serde::Serialize;

use crate::game::{BlockId, MinerId, StrategyDecision};
use crate::harness::decimal17;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinerDecision {
    pub miner: MinerId,
    pub decision: StrategyDecision,
}

/// Record of one period.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub period: u64,
    pub xi: f64,
    pub winner: MinerId,
    pub new_block: Option<BlockId>,
    pub parent: BlockId,
    pub decisions: Vec<MinerDecision>,
    /// Public leaves after publication, as `(id, depth)` sorted by id.
    pub public_tips: Vec<(BlockId, u64)>,
}

#[derive(Serialize)]
struct DecisionLine<'a> {
    miner: MinerId,
    target: BlockId,
    publish: &'a [BlockId],
}

#[derive(Serialize)]
struct TipLine {
    id: BlockId,
    depth: u64,
}

#[derive(Serialize)]
struct EventLine<'a> {
    period: u64,
    xi: String,
    winner: MinerId,
    new_block: Option<BlockId>,
    parent: BlockId,
    decisions: Vec<DecisionLine<'a>>,
    tips: Vec<TipLine>,
}

impl TraceEvent {
    /// One JSONL line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        let line = EventLine {
            period: self.period,
            xi: decimal17(self.xi),
            winner: self.winner,
            new_block: self.new_block,
            parent: self.parent,
            decisions: self
                .decisions
                .iter()
                .map(|d| DecisionLine {
                    miner: d.miner,
                    target: d.decision.target,
                    publish: &d.decision.publish,
                })
                .collect(),
            tips: self
                .public_tips
                .iter()
                .map(|&(id, depth)| TipLine { id, depth })
                .collect(),
        };
        serde_json::to_string(&line).expect("trace events always serialize")
    }
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    for e in events {
        out.write_all(e.to_json_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

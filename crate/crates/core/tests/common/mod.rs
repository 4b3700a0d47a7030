//! Helpers shared by the integration tests, including a direct,
//! block-by-block implementation of the killer definition used as an oracle
//! for the library's single-pass attribution.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use inertial_mining::game::{
    seeded_rng, uniform, BlockId, GameConfig, MinerConfig, MinerId, Trace,
};
use inertial_mining::harness::ExperimentConfig;
use inertial_mining::strategy::{Script, ScriptPublish, ScriptStep, ScriptTarget, StrategySpec};

pub fn fixture(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    let mut config = ExperimentConfig::from_path(&path).expect("fixture parses");
    config.outputs = Default::default();
    config
}

pub fn miner(index: u32, power: f64, strategy: StrategySpec) -> MinerConfig {
    MinerConfig {
        index: MinerId(index),
        power,
        strategy,
    }
}

/// Withholds for `cycle - 1` periods on its private branch, then releases
/// everything.
pub fn periodic_withholder(cycle: u64) -> StrategySpec {
    let hold = ScriptStep {
        target: ScriptTarget::OwnPrivateTip,
        publish: ScriptPublish::None,
    };
    let mut steps: BTreeMap<u64, ScriptStep> = (1..cycle).map(|t| (t, hold.clone())).collect();
    steps.insert(
        cycle,
        ScriptStep {
            target: ScriptTarget::OwnPrivateTip,
            publish: ScriptPublish::All,
        },
    );
    StrategySpec::Scripted {
        script: Script {
            steps,
            cycle: Some(cycle),
        },
        fallback_inertia: None,
    }
}

/// A random short script against inertial miners, for the attribution
/// oracle. Returns the game config, horizon, settlement and `J`.
pub fn random_scripted_game(seed: u64) -> (GameConfig, u64, u64, u32) {
    let mut rng = seeded_rng(seed ^ 0x5eed);
    let mut next = |n: u64| (uniform(&mut rng) * n as f64) as u64;
    let horizon = 8 + next(13);
    let inertia = 2 + next(4) as u32;
    let j = 1 + next(inertia as u64 - 1) as u32;
    let mut steps = BTreeMap::new();
    for t in 1..=horizon {
        let target = match next(5) {
            0 => ScriptTarget::Protocol,
            1 => ScriptTarget::LongestPublic,
            2 | 3 => ScriptTarget::OwnPrivateTip,
            _ => ScriptTarget::Visible(next(64)),
        };
        let publish = match next(4) {
            0 => ScriptPublish::All,
            1 => ScriptPublish::None,
            _ => ScriptPublish::Mask(next(16)),
        };
        steps.insert(t, ScriptStep { target, publish });
    }
    let alpha = 0.3 + 0.4 * next(1000) as f64 / 1000.0;
    let honest = 1 + next(2) as u32;
    let mut miners = vec![miner(
        0,
        alpha,
        StrategySpec::Scripted {
            script: Script { steps, cycle: None },
            fallback_inertia: None,
        },
    )];
    for h in 1..=honest {
        miners.push(miner(
            h,
            (1.0 - alpha) / honest as f64,
            StrategySpec::inertial(inertia),
        ));
    }
    let settlement = next(3);
    (GameConfig::new(miners, seed), horizon, settlement, j)
}

/// Result of applying the killer definition directly.
#[derive(Debug, PartialEq)]
pub struct BruteAttribution {
    pub killer_of: BTreeMap<BlockId, BlockId>,
    pub k: Vec<u32>,
    pub l: Vec<u8>,
    pub excluded: u64,
}

/// Straight transcription of the definitions, one killed block at a time:
/// walk up from the cousin while blocks stay dishonest to find the initial
/// block, then compare depths.
pub fn brute_force_attribution(trace: &Trace, settlement: u64, j: u32) -> BruteAttribution {
    let tree = &trace.tree;
    let blocks = tree.blocks();
    let depth = |mut b: BlockId| {
        let mut d = 1u64;
        while b != BlockId::GENESIS {
            b = blocks[b.0 as usize].parent;
            d += 1;
        }
        d
    };
    let public_path = |b: BlockId| {
        let mut x = b;
        loop {
            if blocks[x.0 as usize].published_at.is_none() {
                return false;
            }
            if x == BlockId::GENESIS {
                return true;
            }
            x = blocks[x.0 as usize].parent;
        }
    };
    // Deepest public chain, smallest tip id on ties.
    let mut tip = BlockId::GENESIS;
    for b in blocks {
        if public_path(b.id) && depth(b.id) > depth(tip) {
            tip = b.id;
        }
    }
    let chain_depth = depth(tip);
    let mut on_chain = vec![false; blocks.len()];
    let mut chain_at = vec![BlockId::GENESIS; chain_depth as usize + 1];
    let mut x = tip;
    loop {
        on_chain[x.0 as usize] = true;
        chain_at[depth(x) as usize] = x;
        if x == BlockId::GENESIS {
            break;
        }
        x = blocks[x.0 as usize].parent;
    }

    let targets = trace
        .protocol_targets
        .as_ref()
        .expect("single protocol rule");
    let dishonest = |b: BlockId| {
        if b == BlockId::GENESIS {
            return false;
        }
        let block = &blocks[b.0 as usize];
        let t = block.mined_at;
        block.published_at != Some(t) || block.parent != targets[t as usize - 1]
    };

    let periods = blocks.len() - 1;
    let mut killer_of = BTreeMap::new();
    let mut k = vec![0u32; periods];
    let mut l = vec![0u8; periods];
    let mut excluded = 0;
    for b in &blocks[1..] {
        let t = b.mined_at as usize;
        if b.miner == Some(trace.subject) {
            if on_chain[b.id.0 as usize] {
                l[t - 1] = 1;
            }
            continue;
        }
        if on_chain[b.id.0 as usize] {
            continue;
        }
        let d = depth(b.id);
        if d > chain_depth || d + settlement > chain_depth {
            excluded += 1;
            continue;
        }
        let cousin = chain_at[d as usize];
        assert!(
            dishonest(cousin),
            "cousin of a killed block must be dishonest"
        );
        let mut w = cousin;
        while dishonest(blocks[w.0 as usize].parent) {
            w = blocks[w.0 as usize].parent;
        }
        let killer = if d <= depth(w) + j as u64 { cousin } else { w };
        killer_of.insert(b.id, killer);
        k[blocks[killer.0 as usize].mined_at as usize - 1] += 1;
    }
    BruteAttribution {
        killer_of,
        k,
        l,
        excluded,
    }
}

use super::*;
use crate::strategy::{Script, ScriptPublish, ScriptStep, ScriptTarget};

fn miner(index: u32, power: f64, strategy: StrategySpec) -> MinerConfig {
    MinerConfig {
        index: MinerId(index),
        power,
        strategy,
    }
}

fn inertial_pair(inertia: u32, seed: u64) -> GameConfig {
    GameConfig::new(
        vec![
            miner(0, 0.3, StrategySpec::inertial(inertia)),
            miner(1, 0.7, StrategySpec::inertial(inertia)),
        ],
        seed,
    )
}

fn withholder() -> StrategySpec {
    let step = ScriptStep {
        target: ScriptTarget::OwnPrivateTip,
        publish: ScriptPublish::None,
    };
    StrategySpec::Scripted {
        script: Script {
            steps: [(1, step)].into_iter().collect(),
            cycle: Some(1),
        },
        fallback_inertia: None,
    }
}

#[test]
fn initial_state() {
    let state = new_game(&inertial_pair(3, 1)).unwrap();
    assert_eq!(state.tree().len(), 1);
    assert_eq!(state.tree().max_public_depth(), 1);
    assert_eq!(state.period(), 0);
}

#[test]
fn invalid_configs() {
    let bad = GameConfig::new(
        vec![
            miner(0, 0.5, StrategySpec::standard()),
            miner(1, 0.6, StrategySpec::standard()),
        ],
        1,
    );
    let err = new_game(&bad).err().unwrap();
    assert!(err.to_string().contains("powers must sum to 1"));

    let dup = GameConfig::new(
        vec![
            miner(0, 0.5, StrategySpec::standard()),
            miner(0, 0.5, StrategySpec::standard()),
        ],
        1,
    );
    assert!(matches!(new_game(&dup), Err(GameError::DuplicateMiner(_))));

    let zero = GameConfig::new(
        vec![
            miner(0, 0.0, StrategySpec::standard()),
            miner(1, 1.0, StrategySpec::standard()),
        ],
        1,
    );
    assert!(matches!(
        new_game(&zero),
        Err(GameError::NonPositivePower { .. })
    ));

    assert!(matches!(
        new_game(&GameConfig::new(vec![], 1)),
        Err(GameError::NoMiners)
    ));

    let two_selfish = GameConfig::new(
        vec![
            miner(0, 0.2, StrategySpec::Selfish),
            miner(1, 0.2, StrategySpec::Selfish),
            miner(2, 0.6, StrategySpec::standard()),
        ],
        1,
    );
    assert!(new_game(&two_selfish).is_err());

    let zero_inertia = GameConfig::new(vec![miner(0, 1.0, StrategySpec::inertial(0))], 1);
    assert!(matches!(
        new_game(&zero_inertia),
        Err(GameError::InvalidStrategy { .. })
    ));
}

#[test]
fn single_miner_owns_everything() {
    let config = GameConfig::new(vec![miner(4, 1.0, StrategySpec::inertial(2))], 9);
    let (trace, report) = run(&config, 500, 4).unwrap();
    assert!(trace.tree.blocks()[1..]
        .iter()
        .all(|b| b.miner == Some(MinerId(4))));
    assert_eq!(report.share(MinerId(4)), Some(1.0));
    assert_eq!(report.total_on_chain, 500 - 4);
}

#[test]
fn deterministic_events() {
    let mut config = GameConfig::new(
        vec![
            miner(0, 0.35, StrategySpec::Selfish),
            miner(1, 0.65, StrategySpec::standard()),
        ],
        77,
    );
    config.record_events = true;
    let (a, _) = run(&config, 2_000, 2).unwrap();
    let (b, _) = run(&config, 2_000, 2).unwrap();
    let lines = |t: &Trace| {
        t.events
            .as_ref()
            .unwrap()
            .iter()
            .map(|e| e.to_json_line())
            .collect::<Vec<_>>()
    };
    assert_eq!(lines(&a), lines(&b));
    assert_eq!(a.xi, b.xi);
}

#[test]
fn block_conservation_and_winner_frequencies() {
    let powers = [0.2, 0.3, 0.5];
    let miners = powers
        .iter()
        .enumerate()
        .map(|(i, &p)| miner(i as u32, p, StrategySpec::inertial(3)))
        .collect();
    let n = 1_000_000u64;
    let mut state = new_game(&GameConfig::new(miners, 2024)).unwrap();
    for _ in 0..n {
        state.advance().unwrap();
    }
    assert_eq!(state.tree().len() as u64, n + 1);
    let counts = state.blocks_by_miner().to_vec();
    assert_eq!(counts.iter().sum::<u64>(), n);
    let chi2: f64 = counts
        .iter()
        .zip(powers)
        .map(|(&c, p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // Two degrees of freedom: the survival function is exp(-x / 2).
    let p_value = (-chi2 / 2.0).exp();
    assert!(p_value > 1e-6, "chi2 = {chi2}");
}

#[test]
fn inertial_runs_stay_on_a_single_path() {
    for inertia in 1..=5 {
        let mut state = new_game(&inertial_pair(inertia, inertia as u64)).unwrap();
        for _ in 0..3_000 {
            let depth_before = state.tree().max_public_depth();
            let e = state.step().unwrap();
            assert_eq!(e.public_tips.len(), 1);
            let new = e.new_block.unwrap();
            assert_eq!(state.tree().depth(new), depth_before + 1);
            assert_eq!(state.tree().block(new).published_at, Some(e.period));
        }
        assert_eq!(state.fork_periods(), 0);
    }
}

#[test]
fn standard_and_inertial_agree_on_path() {
    let standard = GameConfig::new(
        vec![
            miner(0, 0.4, StrategySpec::standard()),
            miner(1, 0.6, StrategySpec::standard()),
        ],
        5,
    );
    let inertial = GameConfig::new(
        vec![
            miner(0, 0.4, StrategySpec::inertial(6)),
            miner(1, 0.6, StrategySpec::inertial(6)),
        ],
        5,
    );
    let mut a = new_game(&standard).unwrap();
    let mut b = new_game(&inertial).unwrap();
    for _ in 0..5_000 {
        assert_eq!(a.step().unwrap(), b.step().unwrap());
    }
}

#[test]
fn public_set_only_grows() {
    let config = GameConfig::new(
        vec![
            miner(0, 0.4, StrategySpec::Selfish),
            miner(1, 0.6, StrategySpec::standard()),
        ],
        3,
    );
    let mut state = new_game(&config).unwrap();
    let mut published: Vec<BlockId> = vec![BlockId::GENESIS];
    for _ in 0..3_000 {
        state.advance().unwrap();
        assert!(published.iter().all(|&b| state.tree().is_published(b)));
        published = state
            .tree()
            .blocks()
            .iter()
            .filter(|b| b.is_published())
            .map(|b| b.id)
            .collect();
    }
}

#[test]
fn withheld_block_leaves_public_tips_unchanged() {
    let config = GameConfig::new(
        vec![
            miner(0, 0.5, withholder()),
            miner(1, 0.5, StrategySpec::inertial(3)),
        ],
        11,
    );
    let mut state = new_game(&config).unwrap();
    let mut seen = 0;
    for _ in 0..200 {
        let before: Vec<_> = {
            let mut t: Vec<_> = state.tree().public_tips().collect();
            t.sort_unstable();
            t
        };
        let e = state.step().unwrap();
        if e.winner == MinerId(0) {
            assert_eq!(e.public_tips, before);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn private_blocks_do_not_leak() {
    let config = GameConfig::new(
        vec![
            miner(0, 0.3, withholder()),
            miner(1, 0.3, StrategySpec::standard()),
            miner(2, 0.4, StrategySpec::standard()),
        ],
        8,
    );
    let mut state = new_game(&config).unwrap();
    for period in 0..300 {
        let before = state.peek_targets();
        let tip = state.tree().longest_chains()[0].0;
        state.inject_private_block(MinerId(0), tip);
        assert_eq!(state.peek_targets(), before, "period {period}");
        state.advance().unwrap();
    }
}

#[test]
fn unknown_target_is_rejected() {
    let script = Script {
        steps: [(
            2,
            ScriptStep {
                target: ScriptTarget::Block(BlockId(40)),
                publish: ScriptPublish::All,
            },
        )]
        .into_iter()
        .collect(),
        cycle: None,
    };
    let config = GameConfig::new(
        vec![
            miner(
                0,
                0.5,
                StrategySpec::Scripted {
                    script,
                    fallback_inertia: None,
                },
            ),
            miner(1, 0.5, StrategySpec::inertial(2)),
        ],
        1,
    );
    let mut state = new_game(&config).unwrap();
    state.advance().unwrap();
    assert!(matches!(
        state.advance(),
        Err(GameError::ScriptUnknownBlock { period: 2, .. })
    ));
}

#[test]
fn settlement_longer_than_horizon() {
    assert!(matches!(
        run(&inertial_pair(2, 1), 3, 5),
        Err(GameError::SettlementExceedsHorizon { .. })
    ));
}

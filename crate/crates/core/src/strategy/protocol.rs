use crate::game::{BlockId, GameError, ObservedHistory};
use crate::strategy::{MiningOutcome, Strategy, StrategySpec};

/// How the standard protocol resolves a tie between longest public chains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TieBreak {
    /// Uniform over the tied tips sorted by id, driven by the shared `xi`.
    Uniform,
    /// With probability `gamma` take the earliest mined tied tip, otherwise
    /// uniform over the rest. Used to sweep the tie parameter of
    /// selfish-mining experiments; not part of either protocol.
    EarliestMined { gamma: f64 },
}

/// Maps `xi` in `[0, 1)` to one of `items`, each with equal probability.
pub fn pick_uniform<T: Copy>(items: &[T], xi: f64) -> T {
    debug_assert!(!items.is_empty());
    let n = items.len();
    let i = ((xi * n as f64) as usize).min(n - 1);
    items[i]
}

/// Standard Bitcoin rule: the tip of the longest public chain.
pub fn standard_target(view: &ObservedHistory<'_>, tie: TieBreak) -> BlockId {
    let max = view.max_public_depth();
    let mut tips = view.public_tips();
    let (first, _) = tips.next().expect("genesis is always public");
    let ties = 1 + tips.take_while(|t| t.1 == max).count();
    if ties == 1 {
        return first;
    }
    let xi = view.xi();
    match tie {
        TieBreak::Uniform => {
            // `public_tips` runs in descending id order within a depth.
            let i = ((xi * ties as f64) as usize).min(ties - 1);
            view.public_tips()
                .nth(ties - 1 - i)
                .expect("tie index in range")
                .0
        }
        TieBreak::EarliestMined { gamma } => {
            let mut tied: Vec<BlockId> = view.public_tips().take(ties).map(|t| t.0).collect();
            tied.sort_unstable();
            let earliest = *tied
                .iter()
                .min_by_key(|&&b| (view.block(b).map(|b| b.mined_at).unwrap_or(0), b))
                .expect("non-empty");
            if xi < gamma {
                earliest
            } else {
                tied.retain(|&b| b != earliest);
                let rescaled = if gamma < 1.0 {
                    (xi - gamma) / (1.0 - gamma)
                } else {
                    0.0
                };
                pick_uniform(&tied, rescaled)
            }
        }
    }
}

/// Inertial rule with parameter `inertia`: follow the unique longest chain
/// only when it leads every other chain by at least `inertia` blocks;
/// otherwise stay among the chains through the previous target.
pub fn inertial_target(
    view: &ObservedHistory<'_>,
    inertia: u32,
    previous: BlockId,
) -> Result<BlockId, GameError> {
    if !view.is_public(previous) {
        return Err(match view.block(previous) {
            Some(_) => GameError::NotConnected(previous),
            None => GameError::UnknownBlock(previous),
        });
    }
    let mut tips = view.public_tips();
    let (top, longest) = tips.next().expect("genesis is always public");
    match tips.next() {
        None => return Ok(top),
        Some((_, runner_up)) if longest >= runner_up + inertia as u64 => return Ok(top),
        Some(_) => {}
    }
    let through = view.chains_through(previous)?;
    Ok(pick_uniform(&through, view.xi()))
}

/// A protocol rule together with the state it needs between periods.
#[derive(Clone, Debug, PartialEq)]
pub enum Protocol {
    Standard { tie: TieBreak },
    Inertial { inertia: u32, previous: BlockId },
}

impl Protocol {
    pub fn standard() -> Self {
        Protocol::Standard {
            tie: TieBreak::Uniform,
        }
    }

    pub fn inertial(inertia: u32) -> Self {
        Protocol::Inertial {
            inertia,
            previous: BlockId::GENESIS,
        }
    }

    pub fn from_spec(spec: &StrategySpec) -> Option<Self> {
        match *spec {
            StrategySpec::Standard { gamma } => Some(Protocol::Standard {
                tie: match gamma {
                    Some(gamma) => TieBreak::EarliestMined { gamma },
                    None => TieBreak::Uniform,
                },
            }),
            StrategySpec::Inertial { inertia } => Some(Protocol::inertial(inertia)),
            _ => None,
        }
    }

    pub fn inertia(&self) -> Option<u32> {
        match self {
            Protocol::Inertial { inertia, .. } => Some(*inertia),
            Protocol::Standard { .. } => None,
        }
    }

    /// The rule's target for the current period; advances the inertial
    /// rule's memory of its previous target.
    pub fn decide_target(&mut self, view: &ObservedHistory<'_>) -> Result<BlockId, GameError> {
        match self {
            Protocol::Standard { tie } => Ok(standard_target(view, *tie)),
            Protocol::Inertial { inertia, previous } => {
                let target = inertial_target(view, *inertia, *previous)?;
                *previous = target;
                Ok(target)
            }
        }
    }
}

impl Strategy for Protocol {
    fn choose_target(&mut self, view: &ObservedHistory<'_>) -> Result<BlockId, GameError> {
        self.decide_target(view)
    }

    fn choose_publication(
        &mut self,
        view: &ObservedHistory<'_>,
        _outcome: MiningOutcome,
    ) -> Result<Vec<BlockId>, GameError> {
        Ok(view.own_unpublished().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Block, BlockTree, MinerId};

    const ME: MinerId = MinerId(0);

    struct Fixture {
        tree: BlockTree,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                tree: BlockTree::new(),
            }
        }

        fn add(&mut self, parent: BlockId) -> BlockId {
            let id = self.tree.next_id();
            self.tree
                .insert(Block {
                    id,
                    parent,
                    miner: Some(MinerId(1)),
                    mined_at: id.0,
                    published_at: Some(id.0),
                })
                .unwrap()
        }

        fn chain(&mut self, from: BlockId, n: usize) -> BlockId {
            (0..n).fold(from, |b, _| self.add(b))
        }

        fn view<'a>(&'a self, xi: &'a [f64]) -> ObservedHistory<'a> {
            ObservedHistory::new(&self.tree, ME, 1, xi, &[], BlockId::GENESIS)
        }
    }

    #[test]
    fn standard_follows_unique_tip() {
        let mut f = Fixture::new();
        let tip = f.chain(BlockId::GENESIS, 6);
        assert_eq!(f.tree.depth(tip), 7);
        assert_eq!(standard_target(&f.view(&[0.99]), TieBreak::Uniform), tip);
    }

    #[test]
    fn standard_two_way_tie() {
        let mut f = Fixture::new();
        let a = f.add(BlockId::GENESIS);
        let b = f.add(BlockId::GENESIS);
        assert!(a < b);
        assert_eq!(standard_target(&f.view(&[0.49]), TieBreak::Uniform), a);
        assert_eq!(standard_target(&f.view(&[0.5]), TieBreak::Uniform), b);
    }

    #[test]
    fn standard_three_way_tie() {
        let mut f = Fixture::new();
        let ids: Vec<_> = (0..3).map(|_| f.add(BlockId::GENESIS)).collect();
        assert_eq!(standard_target(&f.view(&[0.1]), TieBreak::Uniform), ids[0]);
        assert_eq!(
            standard_target(&f.view(&[1.0 / 3.0]), TieBreak::Uniform),
            ids[1]
        );
        assert_eq!(standard_target(&f.view(&[0.6]), TieBreak::Uniform), ids[1]);
        assert_eq!(
            standard_target(&f.view(&[2.0 / 3.0]), TieBreak::Uniform),
            ids[2]
        );
    }

    #[test]
    fn biased_tie_prefers_earliest_mined() {
        let mut f = Fixture::new();
        let a = f.add(BlockId::GENESIS);
        let b = f.add(BlockId::GENESIS);
        let tie = TieBreak::EarliestMined { gamma: 0.8 };
        assert_eq!(standard_target(&f.view(&[0.79]), tie), a);
        assert_eq!(standard_target(&f.view(&[0.81]), tie), b);
        let always = TieBreak::EarliestMined { gamma: 1.0 };
        assert_eq!(standard_target(&f.view(&[0.999]), always), a);
        let never = TieBreak::EarliestMined { gamma: 0.0 };
        assert_eq!(standard_target(&f.view(&[0.0]), never), b);
    }

    #[test]
    fn inertial_switches_at_exactly_inertia() {
        for inertia in 1..5u32 {
            let mut f = Fixture::new();
            let fork = f.chain(BlockId::GENESIS, 3);
            let short = f.chain(fork, 1);
            // Branch depths: short = 5, long = 5 + inertia.
            let long = f.chain(fork, 1 + inertia as usize);
            assert_eq!(f.tree.depth(short), 5);
            assert_eq!(f.tree.depth(long), 5 + inertia as u64);
            assert_eq!(
                inertial_target(&f.view(&[0.3]), inertia, short).unwrap(),
                long
            );
        }
    }

    #[test]
    fn inertial_stays_when_deficit_below_inertia() {
        for inertia in 2..6u32 {
            let mut f = Fixture::new();
            let fork = f.chain(BlockId::GENESIS, 3);
            let short = f.chain(fork, 1);
            let long = f.chain(fork, inertia as usize);
            assert_eq!(f.tree.depth(long), 5 + inertia as u64 - 1);
            assert_eq!(
                inertial_target(&f.view(&[0.99]), inertia, short).unwrap(),
                short
            );
        }
    }

    #[test]
    fn inertial_stay_side_tie_uses_xi() {
        let mut f = Fixture::new();
        let base = f.chain(BlockId::GENESIS, 2);
        let x = f.add(base);
        let y = f.add(base);
        assert_eq!(inertial_target(&f.view(&[0.9]), 3, base).unwrap(), y);
        assert_eq!(inertial_target(&f.view(&[0.1]), 3, base).unwrap(), x);
    }

    #[test]
    fn inertial_single_chain_and_unknown_previous() {
        let mut f = Fixture::new();
        let tip = f.chain(BlockId::GENESIS, 4);
        assert_eq!(
            inertial_target(&f.view(&[0.2]), 7, BlockId::GENESIS).unwrap(),
            tip
        );
        let err = inertial_target(&f.view(&[0.2]), 7, BlockId(99));
        assert!(matches!(err, Err(GameError::UnknownBlock(_))));
    }

    #[test]
    fn inertial_with_one_is_standard_off_ties() {
        let mut f = Fixture::new();
        let a = f.chain(BlockId::GENESIS, 2);
        let b = f.chain(BlockId::GENESIS, 3);
        assert_eq!(inertial_target(&f.view(&[0.0]), 1, a).unwrap(), b);
        assert_eq!(standard_target(&f.view(&[0.0]), TieBreak::Uniform), b);
    }
}

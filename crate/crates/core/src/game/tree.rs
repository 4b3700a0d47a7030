//! Block tree with depth bookkeeping and an incrementally maintained public view.
//!
//! Block ids are issued sequentially, so the tree stores blocks in dense
//! vectors indexed by id. The public view only contains published blocks whose
//! whole ancestry is published ("connected" blocks); a published block sitting
//! on an unpublished parent stays dangling until that parent is published.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GameError;

/// Unique block identifier within a run. Id 0 is reserved for genesis.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BlockId(pub u64);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Index of a miner (player) in the game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MinerId(pub u32);

impl std::fmt::Display for MinerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "miner {}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    /// Genesis is its own parent.
    pub parent: BlockId,
    /// `None` only for genesis.
    pub miner: Option<MinerId>,
    pub mined_at: u64,
    pub published_at: Option<u64>,
}

impl Block {
    pub fn genesis() -> Self {
        Block {
            id: BlockId::GENESIS,
            parent: BlockId::GENESIS,
            miner: None,
            mined_at: 0,
            published_at: Some(0),
        }
    }

    pub fn is_published(&self) -> bool {
        self.published_at.is_some()
    }
}

const NONE: u64 = u64::MAX;

#[derive(Clone, Debug)]
pub struct BlockTree {
    blocks: Vec<Block>,
    depth: Vec<u64>,
    first_child: Vec<u64>,
    last_child: Vec<u64>,
    next_sibling: Vec<u64>,
    connected: Vec<bool>,
    /// Public leaves as (depth, id); iteration in reverse yields the deepest first.
    tips: BTreeSet<(u64, BlockId)>,
    published: usize,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    /// A tree holding only the (published) genesis block.
    pub fn new() -> Self {
        let mut tips = BTreeSet::new();
        tips.insert((1, BlockId::GENESIS));
        BlockTree {
            blocks: vec![Block::genesis()],
            depth: vec![1],
            first_child: vec![NONE],
            last_child: vec![NONE],
            next_sibling: vec![NONE],
            connected: vec![true],
            tips,
            published: 1,
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut tree = Self::new();
        tree.blocks.reserve(n);
        tree.depth.reserve(n);
        tree.first_child.reserve(n);
        tree.last_child.reserve(n);
        tree.next_sibling.reserve(n);
        tree.connected.reserve(n);
        tree
    }

    /// Number of blocks, genesis included.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn next_id(&self) -> BlockId {
        BlockId(self.blocks.len() as u64)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        id.index() < self.blocks.len()
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.index())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// # Panics
    /// If `id` is not in the tree.
    #[inline]
    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.index()]
    }

    #[inline]
    pub fn depth(&self, id: BlockId) -> u64 {
        self.depth[id.index()]
    }

    #[inline]
    pub fn parent(&self, id: BlockId) -> BlockId {
        self.blocks[id.index()].parent
    }

    #[inline]
    pub fn is_published(&self, id: BlockId) -> bool {
        self.blocks[id.index()].published_at.is_some()
    }

    /// Published, with every ancestor published as well.
    #[inline]
    pub fn is_connected(&self, id: BlockId) -> bool {
        self.connected.get(id.index()).copied().unwrap_or(false)
    }

    pub fn published_count(&self) -> usize {
        self.published
    }

    /// Appends a new block. Its id must be the next sequential id and its
    /// parent must already be present.
    pub fn insert(&mut self, block: Block) -> Result<BlockId, GameError> {
        let id = block.id;
        if self.contains(id) {
            return Err(GameError::DuplicateBlock(id));
        }
        if id != self.next_id() {
            return Err(GameError::NonSequentialId {
                expected: self.next_id(),
                got: id,
            });
        }
        if !self.contains(block.parent) {
            return Err(GameError::UnknownParent {
                block: id,
                parent: block.parent,
            });
        }
        if let Some(p) = block.published_at {
            if p < block.mined_at {
                return Err(GameError::PublishedBeforeMined(id));
            }
        }
        let parent = block.parent;
        let published_at = block.published_at;
        self.depth.push(self.depth(parent) + 1);
        self.first_child.push(NONE);
        self.last_child.push(NONE);
        self.next_sibling.push(NONE);
        self.connected.push(false);
        self.blocks.push(Block {
            published_at: None,
            ..block
        });

        let p = parent.index();
        if self.last_child[p] == NONE {
            self.first_child[p] = id.0;
        } else {
            let last = self.last_child[p] as usize;
            self.next_sibling[last] = id.0;
        }
        self.last_child[p] = id.0;

        if let Some(period) = published_at {
            self.publish(id, period)?;
        }
        Ok(id)
    }

    /// Marks `id` as published in `period`, connecting it (and any dangling
    /// published descendants) to the public view when its parent is public.
    pub fn publish(&mut self, id: BlockId, period: u64) -> Result<(), GameError> {
        let block = self
            .blocks
            .get_mut(id.index())
            .ok_or(GameError::UnknownBlock(id))?;
        if block.published_at.is_some() {
            return Err(GameError::AlreadyPublished(id));
        }
        if period < block.mined_at {
            return Err(GameError::PublishedBeforeMined(id));
        }
        block.published_at = Some(period);
        self.published += 1;
        if self.is_connected(self.parent(id)) {
            self.connect(id);
        }
        Ok(())
    }

    fn connect(&mut self, root: BlockId) {
        let mut stack = vec![root];
        while let Some(b) = stack.pop() {
            self.connected[b.index()] = true;
            let parent = self.parent(b);
            self.tips.remove(&(self.depth(parent), parent));
            if !self.has_public_child(b) {
                self.tips.insert((self.depth(b), b));
            }
            let mut c = self.first_child[b.index()];
            while c != NONE {
                let child = BlockId(c);
                if self.is_published(child) && !self.is_connected(child) {
                    stack.push(child);
                }
                c = self.next_sibling[c as usize];
            }
        }
    }

    fn has_public_child(&self, id: BlockId) -> bool {
        self.children(id).any(|c| self.is_connected(c))
    }

    /// All children of `id` in insertion (ascending id) order, public or not.
    pub fn children(&self, id: BlockId) -> Children<'_> {
        Children {
            tree: self,
            next: self.first_child.get(id.index()).copied().unwrap_or(NONE),
        }
    }

    pub fn public_children(&self, id: BlockId) -> impl Iterator<Item = BlockId> + '_ {
        self.children(id).filter(move |c| self.is_connected(*c))
    }

    /// Public leaves, deepest first; equal depths in descending id order.
    pub fn public_tips(&self) -> impl Iterator<Item = (BlockId, u64)> + '_ {
        self.tips.iter().rev().map(|&(d, id)| (id, d))
    }

    pub fn public_tip_count(&self) -> usize {
        self.tips.len()
    }

    /// Depth of the deepest public chain.
    pub fn max_public_depth(&self) -> u64 {
        self.tips.iter().next_back().map(|t| t.0).unwrap_or(1)
    }

    /// All tips of maximal depth, sorted by id.
    pub fn longest_chains(&self) -> Vec<(BlockId, u64)> {
        let max = self.max_public_depth();
        let mut out: Vec<_> = self.public_tips().take_while(|t| t.1 == max).collect();
        out.reverse();
        out
    }

    /// Tips of every public chain through `b`: the public leaves of the
    /// subtree rooted at `b`, sorted by id.
    pub fn chains_through(&self, b: BlockId) -> Result<Vec<BlockId>, GameError> {
        if !self.contains(b) {
            return Err(GameError::UnknownBlock(b));
        }
        if !self.is_connected(b) {
            return Err(GameError::NotConnected(b));
        }
        let mut leaves = Vec::new();
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            let before = stack.len();
            stack.extend(self.public_children(x));
            if stack.len() == before {
                leaves.push(x);
            }
        }
        leaves.sort_unstable();
        Ok(leaves)
    }

    /// Whether `ancestor` lies on the path from genesis to `id` (inclusive).
    pub fn is_ancestor(&self, ancestor: BlockId, id: BlockId) -> bool {
        let target = self.depth(ancestor);
        let mut x = id;
        while self.depth(x) > target {
            x = self.parent(x);
        }
        x == ancestor
    }

    /// Path from genesis to `tip`, inclusive.
    pub fn path_to(&self, tip: BlockId) -> Vec<BlockId> {
        let mut path = Vec::with_capacity(self.depth(tip) as usize);
        let mut x = tip;
        loop {
            path.push(x);
            if x == BlockId::GENESIS {
                break;
            }
            x = self.parent(x);
        }
        path.reverse();
        path
    }
}

pub struct Children<'a> {
    tree: &'a BlockTree,
    next: u64,
}

impl Iterator for Children<'_> {
    type Item = BlockId;

    fn next(&mut self) -> Option<BlockId> {
        if self.next == NONE {
            return None;
        }
        let id = BlockId(self.next);
        self.next = self.tree.next_sibling[id.index()];
        Some(id)
    }
}

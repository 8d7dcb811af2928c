use std::cmp::Ordering;

use super::{PriorityContext, Strategy};

/// Root strategy: newest local task first, oldest remote task first.
///
/// Its comparator always ties; the LIFO/FIFO fall-through applied to every
/// comparison does the work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LifoFifo;

impl Strategy for LifoFifo {}

/// First-in-first-out at every place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Fifo;

impl Strategy for Fifo {
    fn prioritize(&self, _other: &Self, ctx: &PriorityContext<'_>) -> Ordering {
        let this = (ctx.this_seq(), ctx.this_place());
        let other = (ctx.other_seq(), ctx.other_place());
        other.cmp(&this)
    }
}

/// Depth-first for locally spawned tasks, breadth-first for tasks spawned
/// elsewhere, local tasks before remote ones. Meant for tree-shaped
/// computations where the whole subtree below a task is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthFirst {
    depth: u32,
    weight: u64,
}

impl DepthFirst {
    /// Work is exponential in the remaining height `max_depth - depth`,
    /// which must stay below 64.
    pub fn new(depth: u32, max_depth: u32) -> Self {
        let height = max_depth.saturating_sub(depth).min(63);
        DepthFirst {
            depth,
            weight: 1u64 << height,
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }
}

impl Strategy for DepthFirst {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> Ordering {
        match (ctx.this_is_local(), ctx.other_is_local()) {
            (true, true) => self.depth.cmp(&other.depth),
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => other.depth.cmp(&self.depth),
        }
    }

    fn transitive_weight(&self) -> u64 {
        self.weight
    }

    fn allow_call_conversion(&self) -> bool {
        true
    }
}

//! Scheduling strategies.
//!
//! A strategy is attached to every spawned task. It tells the scheduler how
//! much work the task carries (its transitive weight), whether the spawn may
//! be turned into a plain call, whether the task became obsolete, and how it
//! ranks against other tasks of the same strategy type as seen from a given
//! place.
//!
//! Strategy types form a rooted tree ([`StrategyHierarchy`]) with
//! [`LifoFifo`] at the root. Tasks of different types are ranked by the
//! comparator of their lowest common ancestor type, on payloads projected
//! onto that ancestor. Every comparator tie falls through to the LIFO/FIFO
//! rule on `(place, seq)`, so each place sees a strict total order.

mod builtin;
mod hierarchy;

use std::any::Any;
use std::cmp::Ordering;
use std::fmt;

pub use builtin::{DepthFirst, Fifo, LifoFifo};
pub use hierarchy::{StrategyError, StrategyHierarchy, StrategyTypeId};

use crate::machine::{MachineTree, PlaceId};

/// Where a priority comparison is evaluated: the querying place and whether
/// it is ranking tasks for its own execution or for a steal.
#[derive(Clone, Copy)]
pub struct Viewpoint<'a> {
    place: PlaceId,
    stealing: bool,
    tree: &'a MachineTree,
}

impl<'a> Viewpoint<'a> {
    pub fn owner(tree: &'a MachineTree, place: PlaceId) -> Self {
        Viewpoint {
            place,
            stealing: false,
            tree,
        }
    }

    pub fn thief(tree: &'a MachineTree, place: PlaceId) -> Self {
        Viewpoint {
            place,
            stealing: true,
            tree,
        }
    }

    pub fn place(&self) -> PlaceId {
        self.place
    }

    pub fn stealing(&self) -> bool {
        self.stealing
    }

    pub fn tree(&self) -> &'a MachineTree {
        self.tree
    }
}

impl fmt::Debug for Viewpoint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Viewpoint")
            .field("place", &self.place)
            .field("stealing", &self.stealing)
            .finish()
    }
}

/// Information available to [`Strategy::prioritize`] besides the payloads.
#[derive(Clone, Copy, Debug)]
pub struct PriorityContext<'a> {
    viewpoint: Viewpoint<'a>,
    this_place: PlaceId,
    other_place: PlaceId,
    this_seq: u64,
    other_seq: u64,
}

impl PriorityContext<'_> {
    /// Place requesting the ordering.
    pub fn at(&self) -> PlaceId {
        self.viewpoint.place
    }

    /// True when the ordering is used to pick tasks to steal.
    pub fn stealing(&self) -> bool {
        self.viewpoint.stealing
    }

    pub fn this_place(&self) -> PlaceId {
        self.this_place
    }

    pub fn other_place(&self) -> PlaceId {
        self.other_place
    }

    pub fn this_is_local(&self) -> bool {
        self.this_place == self.viewpoint.place
    }

    pub fn other_is_local(&self) -> bool {
        self.other_place == self.viewpoint.place
    }

    /// Spawn sequence numbers; unique per spawning place.
    pub fn this_seq(&self) -> u64 {
        self.this_seq
    }

    pub fn other_seq(&self) -> u64 {
        self.other_seq
    }

    /// Memory distance from the querying place to `place`.
    pub fn distance(&self, place: PlaceId) -> usize {
        self.viewpoint
            .tree
            .memory_distance(self.viewpoint.place, place)
            .unwrap_or(usize::MAX)
    }

    pub fn this_distance(&self) -> usize {
        self.distance(self.this_place)
    }

    pub fn other_distance(&self) -> usize {
        self.distance(self.other_place)
    }
}

/// Per-task scheduling strategy.
///
/// `prioritize` returns [`Ordering::Greater`] when `self`'s task should run
/// before `other`'s at the querying place. It must induce a strict weak order
/// for a fixed context; ties are broken by the scheduler.
pub trait Strategy: Send + Sync + 'static {
    fn prioritize(&self, _other: &Self, _ctx: &PriorityContext<'_>) -> Ordering {
        Ordering::Equal
    }

    /// Estimate of the work of the task and all its descendants. At least 1.
    fn transitive_weight(&self) -> u64 {
        1
    }

    fn allow_call_conversion(&self) -> bool {
        false
    }

    /// Once a strategy reports dead it must stay dead.
    fn dead(&self) -> bool {
        false
    }

    /// Place the task is associated with; `None` means the spawning place.
    fn place(&self) -> Option<PlaceId> {
        None
    }
}

/// Object-safe view of a [`Strategy`], used for payloads stored in
/// descriptors and for projections onto ancestor types.
pub trait AnyStrategy: Send + Sync + 'static {
    fn as_any(&self) -> &dyn Any;
    fn type_name(&self) -> &'static str;
    fn prioritize_dyn(&self, other: &dyn AnyStrategy, ctx: &PriorityContext<'_>) -> Ordering;
    fn dead_dyn(&self) -> bool;
}

impl<S: Strategy> AnyStrategy for S {
    fn as_any(&self) -> &dyn Any {
        self
    }

    fn type_name(&self) -> &'static str {
        std::any::type_name::<S>()
    }

    fn prioritize_dyn(&self, other: &dyn AnyStrategy, ctx: &PriorityContext<'_>) -> Ordering {
        let other = other
            .as_any()
            .downcast_ref::<S>()
            .expect("payloads compared at one hierarchy level share a type");
        self.prioritize(other, ctx)
    }

    fn dead_dyn(&self) -> bool {
        self.dead()
    }
}

/// Scheduling record of one spawned task. Immutable after spawn.
pub struct StrategyDescriptor {
    type_id: StrategyTypeId,
    depth: usize,
    strategy: Box<dyn AnyStrategy>,
    // projections onto proper ancestors, parent first, root excluded
    ancestors: Vec<Box<dyn AnyStrategy>>,
    transitive_weight: u64,
    allow_call_conversion: bool,
    place: PlaceId,
    origin: PlaceId,
    seq: u64,
}

impl StrategyDescriptor {
    pub fn type_id(&self) -> StrategyTypeId {
        self.type_id
    }

    pub fn transitive_weight(&self) -> u64 {
        self.transitive_weight
    }

    pub fn allow_call_conversion(&self) -> bool {
        self.allow_call_conversion
    }

    /// Place the task is associated with (the spawning place by default).
    pub fn place(&self) -> PlaceId {
        self.place
    }

    /// Place that spawned the task.
    pub fn origin(&self) -> PlaceId {
        self.origin
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn strategy(&self) -> &dyn AnyStrategy {
        &*self.strategy
    }

    /// Typed access to the payload.
    pub fn downcast<S: Strategy>(&self) -> Option<&S> {
        self.strategy.as_any().downcast_ref()
    }

    pub fn dead(&self) -> bool {
        self.strategy.dead_dyn()
    }

    /// Payload as seen by the ancestor type at `depth` (1 ..= own depth).
    fn payload_at(&self, depth: usize) -> &dyn AnyStrategy {
        debug_assert!(depth >= 1 && depth <= self.depth);
        if depth == self.depth {
            &*self.strategy
        } else {
            &*self.ancestors[self.depth - 1 - depth]
        }
    }

    /// LIFO/FIFO rule: local before remote, newest local first, oldest
    /// remote first.
    pub(crate) fn lifo_fifo(&self, other: &Self, at: PlaceId) -> Ordering {
        let key = |d: &Self| (d.seq, d.origin);
        match (self.place == at, other.place == at) {
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (true, true) => key(self).cmp(&key(other)),
            (false, false) => key(other).cmp(&key(self)),
        }
    }
}

impl fmt::Debug for StrategyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrategyDescriptor")
            .field("type_id", &self.type_id)
            .field("strategy", &self.strategy.type_name())
            .field("transitive_weight", &self.transitive_weight)
            .field("allow_call_conversion", &self.allow_call_conversion)
            .field("place", &self.place)
            .field("origin", &self.origin)
            .field("seq", &self.seq)
            .finish()
    }
}

//! Unbalanced tree search: count the nodes of a tree that is generated on
//! the fly from a root seed.
//!
//! A node is a 64-bit state. Its child count follows a geometric law with
//! mean `b0 * (1 - depth / h_max)`, drawn from `mix64(state)`; child `i` has
//! state `mix64(state ^ GOLDEN * (i + 1))`. The tree depends only on the
//! parameters, never on the schedule.

use std::cmp::Ordering as CmpOrdering;
use std::sync::atomic::{AtomicU64, Ordering};

use stratsched_core::{Ctx, PriorityContext, Scheduler, Strategy, StrategyHierarchy};

use crate::{execute, mix64, spawn_in, Exec, KernelMode, Outcome};

pub const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Cap on the weight exponent.
pub const WEIGHT_CAP: u32 = 30;

/// Default mean root branching factor. With `h_max = 20` and the default
/// seed the tree has [`DEFAULT_NODES`] nodes.
pub const DEFAULT_B0: f64 = 4.0;
pub const DEFAULT_H_MAX: u32 = 20;
pub const DEFAULT_SEED: u64 = 14;
pub const DEFAULT_M_MAX: u32 = 64;
/// Node count of the default tree, from a sequential traversal.
pub const DEFAULT_NODES: u64 = 3_970_005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtsParams {
    pub b0: f64,
    pub h_max: u32,
    pub seed: u64,
    /// Upper limit on the number of children of one node.
    pub m_max: u32,
}

impl Default for UtsParams {
    fn default() -> Self {
        UtsParams {
            b0: DEFAULT_B0,
            h_max: DEFAULT_H_MAX,
            seed: DEFAULT_SEED,
            m_max: DEFAULT_M_MAX,
        }
    }
}

impl UtsParams {
    pub fn root(&self) -> u64 {
        mix64(self.seed)
    }

    /// Number of children of a node.
    pub fn child_count(&self, state: u64, depth: u32) -> u32 {
        if depth >= self.h_max {
            return 0;
        }
        let b = self.b0 * (1.0 - depth as f64 / self.h_max as f64);
        if b <= 0.0 {
            return 0;
        }
        // uniform in (0, 1)
        let u = ((mix64(state) >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let k = (u.ln() / (1.0 - 1.0 / (1.0 + b)).ln()).floor();
        (k as u32).min(self.m_max)
    }

    pub fn child(state: u64, i: u32) -> u64 {
        mix64(state ^ GOLDEN.wrapping_mul(i as u64 + 1))
    }

    pub fn children(&self, state: u64, depth: u32) -> Vec<u64> {
        (0..self.child_count(state, depth))
            .map(|i| Self::child(state, i))
            .collect()
    }

    /// `2^min(h_max - depth, cap)`.
    pub fn weight(&self, depth: u32) -> u64 {
        1u64 << self.h_max.saturating_sub(depth).min(WEIGHT_CAP)
    }
}

/// Strategy of a tree-node task: deeper nodes first locally, shallower
/// nodes first for remote tasks, local before remote.
pub struct UtsStrategy {
    depth: u32,
    weight: u64,
}

impl UtsStrategy {
    pub fn new(depth: u32, params: &UtsParams) -> Self {
        UtsStrategy {
            depth,
            weight: params.weight(depth),
        }
    }
}

impl Strategy for UtsStrategy {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> CmpOrdering {
        match (ctx.this_is_local(), ctx.other_is_local()) {
            (true, true) => self.depth.cmp(&other.depth),
            (true, false) => CmpOrdering::Greater,
            (false, true) => CmpOrdering::Less,
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

pub fn register(h: &mut StrategyHierarchy) {
    h.ensure::<UtsStrategy>();
}

#[repr(align(128))]
#[derive(Default)]
struct Padded(AtomicU64);

/// Shared state of one tree search.
pub struct Uts {
    params: UtsParams,
    counts: Vec<Padded>,
}

impl Uts {
    pub fn new(params: UtsParams, places: usize) -> Self {
        Uts {
            params,
            counts: (0..places.max(1)).map(|_| Padded::default()).collect(),
        }
    }

    pub fn nodes(&self) -> u64 {
        self.counts.iter().map(|c| c.0.load(Ordering::Relaxed)).sum()
    }

    /// Spawn the root node into the current finish region.
    pub fn spawn_root<'env>(&'env self, ctx: &Ctx<'_, 'env>, mode: KernelMode) {
        let root = self.params.root();
        spawn_in(
            ctx,
            mode,
            || UtsStrategy::new(0, &self.params),
            move |ctx| self.visit(ctx, root, 0, mode),
        );
    }

    fn visit<'env>(&'env self, ctx: &Ctx<'_, 'env>, state: u64, depth: u32, mode: KernelMode) {
        self.counts[ctx.place().index() % self.counts.len()]
            .0
            .fetch_add(1, Ordering::Relaxed);
        for i in 0..self.params.child_count(state, depth) {
            let child = UtsParams::child(state, i);
            spawn_in(
                ctx,
                mode,
                || UtsStrategy::new(depth + 1, &self.params),
                move |ctx| self.visit(ctx, child, depth + 1, mode),
            );
        }
    }
}

/// Count the nodes of the tree.
pub fn run(sched: &Scheduler, exec: Exec, params: UtsParams, mode: KernelMode) -> Outcome<u64> {
    let uts = Uts::new(params, sched.threads());
    let u = &uts;
    let ((), wall, report) = execute(sched, exec, move |ctx| u.spawn_root(ctx, mode));
    Outcome {
        result: uts.nodes(),
        wall,
        metrics: report.metrics,
    }
}

/// Node count by a sequential depth-first traversal.
pub fn count_sequential(params: &UtsParams) -> u64 {
    let mut stack = vec![(params.root(), 0u32)];
    let mut count = 0;
    while let Some((state, depth)) = stack.pop() {
        count += 1;
        for i in 0..params.child_count(state, depth) {
            stack.push((UtsParams::child(state, i), depth + 1));
        }
    }
    count
}

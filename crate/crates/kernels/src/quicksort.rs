//! Parallel quicksort. Each partition step spawns one task per side;
//! subsequences shorter than the cutoff are sorted inline.
//!
//! The weight of a task over `n` elements is `n' * ceil(log2 n')` with
//! `n' = ceil(n / b)`. Thieves take the largest subsequence; locally the
//! smallest runs first, and tasks spawned here run before remote ones.

use std::cmp::Ordering as CmpOrdering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratsched_core::{Ctx, PriorityContext, Scheduler, Strategy, StrategyHierarchy};

use crate::{execute, spawn_in, Exec, KernelMode, Outcome};

pub const DEFAULT_CUTOFF: usize = 256;
pub const DEFAULT_BLOCK: usize = 256;

pub struct QuicksortStrategy {
    len: usize,
    weight: u64,
}

impl QuicksortStrategy {
    pub fn new(len: usize, block: usize) -> Self {
        QuicksortStrategy {
            len,
            weight: weight(len, block),
        }
    }
}

/// `max(1, n' * ceil(log2 n'))` with `n' = ceil(len / block)`.
pub fn weight(len: usize, block: usize) -> u64 {
    let n = len.div_ceil(block.max(1)) as u64;
    let log = if n <= 1 { 0 } else { 64 - (n - 1).leading_zeros() as u64 };
    n.saturating_mul(log).max(1)
}

impl Strategy for QuicksortStrategy {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> CmpOrdering {
        if ctx.stealing() {
            return self.len.cmp(&other.len);
        }
        match (ctx.this_is_local(), ctx.other_is_local()) {
            (true, true) => other.len.cmp(&self.len),
            (true, false) => CmpOrdering::Greater,
            (false, true) => CmpOrdering::Less,
            (false, false) => self.len.cmp(&other.len),
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
    h.ensure::<QuicksortStrategy>();
}

#[derive(Debug, Clone, Copy)]
pub struct QuicksortParams {
    pub cutoff: usize,
    pub block: usize,
}

impl Default for QuicksortParams {
    fn default() -> Self {
        QuicksortParams {
            cutoff: DEFAULT_CUTOFF,
            block: DEFAULT_BLOCK,
        }
    }
}

fn median_of_three(v: &[u64]) -> u64 {
    let (a, b, c) = (v[0], v[v.len() / 2], v[v.len() - 1]);
    a.max(b).min(a.min(b).max(c))
}

/// Three-way partition around `pivot`: returns `(lt, gt)` such that
/// `v[..lt] < pivot`, `v[lt..gt] == pivot` and `v[gt..] > pivot`.
fn partition(v: &mut [u64], pivot: u64) -> (usize, usize) {
    let (mut lt, mut i, mut gt) = (0, 0, v.len());
    while i < gt {
        match v[i].cmp(&pivot) {
            CmpOrdering::Less => {
                v.swap(lt, i);
                lt += 1;
                i += 1;
            }
            CmpOrdering::Greater => {
                gt -= 1;
                v.swap(i, gt);
            }
            CmpOrdering::Equal => i += 1,
        }
    }
    (lt, gt)
}

fn sort_task<'env>(ctx: &Ctx<'_, 'env>, v: &'env mut [u64], params: QuicksortParams, mode: KernelMode) {
    if v.len() < params.cutoff.max(2) {
        v.sort_unstable();
        return;
    }
    let (lt, gt) = partition(v, median_of_three(v));
    let (left, rest) = v.split_at_mut(lt);
    let right = &mut rest[gt - lt..];
    for part in [left, right] {
        if part.len() > 1 {
            let len = part.len();
            spawn_in(
                ctx,
                mode,
                || QuicksortStrategy::new(len, params.block),
                move |ctx| sort_task(ctx, part, params, mode),
            );
        }
    }
}

/// Sort `data` in place.
pub fn run(
    sched: &Scheduler,
    exec: Exec,
    data: &mut [u64],
    params: QuicksortParams,
    mode: KernelMode,
) -> Outcome<()> {
    let ((), wall, report) = execute(sched, exec, move |ctx| {
        if data.len() > 1 {
            let len = data.len();
            spawn_in(
                ctx,
                mode,
                || QuicksortStrategy::new(len, params.block),
                move |ctx| sort_task(ctx, data, params, mode),
            );
        }
    });
    Outcome {
        result: (),
        wall,
        metrics: report.metrics,
    }
}

/// Uniform random array. With `distinct` false the values repeat often.
pub fn generate(len: usize, seed: u64, distinct: bool) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if distinct {
        (0..len).map(|_| rng.gen()).collect()
    } else {
        let range = (len as u64 / 8).max(1);
        (0..len).map(|_| rng.gen_range(0..range)).collect()
    }
}

//! Blocked inclusive prefix sums (wrapping `u64` addition) that adapt to the
//! available parallelism.
//!
//! A block whose predecessors are all final when it starts adds the
//! predecessor's last value to its first element and is done after one pass.
//! Any other block scans locally, publishes its total and later receives a
//! second pass adding the offset. A shared counter marks how many leading
//! blocks are final; it is advanced by in-order blocks and over blocks whose
//! local scan is complete.
//!
//! The strategy makes the place that started the kernel take blocks in
//! increasing order and every other place in decreasing order, so with a
//! single worker no block needs a second pass.

use std::cmp::Ordering as CmpOrdering;
use std::sync::atomic::{AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::Mutex;

use stratsched_core::{Ctx, PlaceId, PriorityContext, Scheduler, Strategy, StrategyHierarchy};

use crate::{execute, spawn_in, Exec, KernelMode, Outcome};

const PENDING: u8 = 0;
const SCANNED: u8 = 1;
const FINAL: u8 = 2;

/// Strategy of a block task.
pub struct PrefixStrategy {
    block: usize,
    anchor: PlaceId,
}

impl PrefixStrategy {
    pub fn new(block: usize, anchor: PlaceId) -> Self {
        PrefixStrategy { block, anchor }
    }
}

impl Strategy for PrefixStrategy {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> CmpOrdering {
        if ctx.at() == self.anchor {
            other.block.cmp(&self.block)
        } else {
            self.block.cmp(&other.block)
        }
    }
}

pub fn register(h: &mut StrategyHierarchy) {
    h.ensure::<PrefixStrategy>();
}

/// Shared state of one prefix-sum kernel instance.
pub struct PrefixSum<'a> {
    blocks: Vec<Mutex<&'a mut [u64]>>,
    state: Vec<AtomicU8>,
    // local block sum, valid once the block is scanned
    total: Vec<AtomicU64>,
    // final last value of the block, valid once the block is final
    end: Vec<AtomicU64>,
    // number of leading final blocks
    front: AtomicUsize,
    second_pass: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefixStats {
    pub blocks: usize,
    pub second_pass_blocks: usize,
}

fn lock<'m, T>(m: &'m Mutex<T>) -> std::sync::MutexGuard<'m, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn scan(block: &mut [u64]) -> u64 {
    let mut acc = 0u64;
    for x in block.iter_mut() {
        acc = acc.wrapping_add(*x);
        *x = acc;
    }
    acc
}

impl<'a> PrefixSum<'a> {
    /// # Panics
    /// If `block_size` is zero.
    pub fn new(data: &'a mut [u64], block_size: usize) -> Self {
        assert!(block_size > 0, "block size must be positive");
        let blocks: Vec<_> = data.chunks_mut(block_size).map(Mutex::new).collect();
        let n = blocks.len();
        PrefixSum {
            blocks,
            state: (0..n).map(|_| AtomicU8::new(PENDING)).collect(),
            total: (0..n).map(|_| AtomicU64::new(0)).collect(),
            end: (0..n).map(|_| AtomicU64::new(0)).collect(),
            front: AtomicUsize::new(0),
            second_pass: AtomicUsize::new(0),
        }
    }

    pub fn stats(&self) -> PrefixStats {
        PrefixStats {
            blocks: self.blocks.len(),
            second_pass_blocks: self.second_pass.load(Ordering::Relaxed),
        }
    }

    /// Spawn one task per block into the current finish region. The calling
    /// place becomes the in-order place.
    pub fn spawn_all<'env>(&'env self, ctx: &Ctx<'_, 'env>, mode: KernelMode)
    where
        'a: 'env,
    {
        let anchor = ctx.place();
        for i in 0..self.blocks.len() {
            spawn_in(
                ctx,
                mode,
                || PrefixStrategy::new(i, anchor),
                move |ctx| self.block_task(ctx, i, mode, anchor),
            );
        }
    }

    fn block_task<'env>(&'env self, ctx: &Ctx<'_, 'env>, i: usize, mode: KernelMode, anchor: PlaceId)
    where
        'a: 'env,
    {
        if self.front.load(Ordering::SeqCst) == i {
            let offset = if i == 0 {
                0
            } else {
                self.end[i - 1].load(Ordering::Acquire)
            };
            let mut block = lock(&self.blocks[i]);
            block[0] = block[0].wrapping_add(offset);
            let last = scan(&mut block);
            drop(block);
            self.end[i].store(last, Ordering::Release);
            self.state[i].store(FINAL, Ordering::SeqCst);
            self.front.store(i + 1, Ordering::SeqCst);
        } else {
            let total = scan(&mut lock(&self.blocks[i]));
            self.total[i].store(total, Ordering::Release);
            self.state[i].store(SCANNED, Ordering::SeqCst);
        }
        self.advance(ctx, mode, anchor);
    }

    /// Move the front over blocks that only lack their offset, spawning the
    /// offset pass for each.
    fn advance<'env>(&'env self, ctx: &Ctx<'_, 'env>, mode: KernelMode, anchor: PlaceId)
    where
        'a: 'env,
    {
        loop {
            let f = self.front.load(Ordering::SeqCst);
            if f >= self.blocks.len()
                || self.state[f]
                    .compare_exchange(SCANNED, FINAL, Ordering::SeqCst, Ordering::SeqCst)
                    .is_err()
            {
                return;
            }
            // f > 0: block 0 always finds the front at 0
            let offset = self.end[f - 1].load(Ordering::Acquire);
            let total = self.total[f].load(Ordering::Acquire);
            self.end[f].store(offset.wrapping_add(total), Ordering::Release);
            self.front.store(f + 1, Ordering::SeqCst);
            self.second_pass.fetch_add(1, Ordering::Relaxed);
            spawn_in(
                ctx,
                mode,
                || PrefixStrategy::new(f, anchor),
                move |_| {
                    for x in lock(&self.blocks[f]).iter_mut() {
                        *x = x.wrapping_add(offset);
                    }
                },
            );
        }
    }
}

/// Replace `data` by its inclusive prefix sums.
pub fn prefix_sum(
    sched: &Scheduler,
    exec: Exec,
    data: &mut [u64],
    block_size: usize,
    mode: KernelMode,
) -> Outcome<PrefixStats> {
    let kernel = PrefixSum::new(data, block_size);
    let k = &kernel;
    let ((), wall, report) = execute(sched, exec, move |ctx| k.spawn_all(ctx, mode));
    Outcome {
        result: kernel.stats(),
        wall,
        metrics: report.metrics,
    }
}

/// Sequential inclusive scan.
pub fn sequential_prefix_sum(data: &mut [u64]) {
    scan(data);
}

//! Benchmark kernels, each with its own scheduling strategies: branch and
//! bound graph bipartitioning, adaptive prefix sums, unbalanced tree search,
//! triangle strip generation, single-source shortest paths and quicksort.
//!
//! Every kernel runs either with its strategies or with the plain LIFO/FIFO
//! strategy for comparison, and comes with a problem generator and a result
//! verifier.

pub mod bb;
pub mod composed;
pub mod prefix;
pub mod quicksort;
pub mod sssp;
pub mod tristrip;
pub mod uts;

use std::time::{Duration, Instant};

use stratsched_core::{Ctx, RunMetrics, RunReport, Scheduler, Strategy, StrategyHierarchy};

/// Which strategies a kernel spawns its tasks with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelMode {
    /// The kernel's own strategies.
    Strategy,
    /// Every task uses the root LIFO/FIFO strategy.
    LifoFifo,
}

/// How a kernel run is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    /// All places of the scheduler.
    Parallel,
    /// One place, no stealing.
    Sequential,
}

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result of a kernel together with the time spent inside its finish region
/// and the scheduler counters of the run.
#[derive(Debug, Clone)]
pub struct Outcome<R> {
    pub result: R,
    pub wall: Duration,
    pub metrics: RunMetrics,
}

/// Hierarchy with the strategy types of every kernel registered.
pub fn hierarchy() -> StrategyHierarchy {
    let mut h = StrategyHierarchy::new();
    register_all(&mut h);
    h
}

pub fn register_all(h: &mut StrategyHierarchy) {
    bb::register(h);
    prefix::register(h);
    uts::register(h);
    tristrip::register(h);
    sssp::register(h);
    quicksort::register(h);
}

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn spawn_in<'env, S: Strategy>(
    ctx: &Ctx<'_, 'env>,
    mode: KernelMode,
    strategy: impl FnOnce() -> S,
    f: impl for<'b> FnOnce(&Ctx<'b, 'env>) + Send + 'env,
) {
    match mode {
        KernelMode::Strategy => ctx.spawn_s(strategy(), f),
        KernelMode::LifoFifo => ctx.spawn(f),
    }
}

pub(crate) fn execute<'env, R>(
    sched: &Scheduler,
    exec: Exec,
    body: impl for<'a> FnOnce(&Ctx<'a, 'env>) -> R + 'env,
) -> (R, Duration, RunReport) {
    let timed = move |ctx: &Ctx<'_, 'env>| {
        let start = Instant::now();
        let r = ctx.finish(body);
        (r, start.elapsed())
    };
    let ((r, wall), report) = match exec {
        Exec::Parallel => sched.run_report(timed),
        Exec::Sequential => sched.run_sequential(timed),
    };
    (r, wall, report)
}

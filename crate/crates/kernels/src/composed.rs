//! Prefix sum and unbalanced tree search launched together in one finish
//! region, each with its own strategies.

use stratsched_core::Scheduler;

use crate::prefix::{PrefixStats, PrefixSum};
use crate::uts::{Uts, UtsParams};
use crate::{execute, Exec, KernelMode, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposedResult {
    pub prefix: PrefixStats,
    pub uts_nodes: u64,
}

/// Replace `data` by its prefix sums and count the nodes of the tree given
/// by `uts`, sharing one scheduler run.
pub fn run(
    sched: &Scheduler,
    exec: Exec,
    data: &mut [u64],
    block_size: usize,
    uts: UtsParams,
    mode: KernelMode,
) -> Outcome<ComposedResult> {
    let prefix = PrefixSum::new(data, block_size);
    let tree = Uts::new(uts, sched.threads());
    let (p, t) = (&prefix, &tree);
    let ((), wall, report) = execute(sched, exec, move |ctx| {
        p.spawn_all(ctx, mode);
        t.spawn_root(ctx, mode);
    });
    Outcome {
        result: ComposedResult {
            prefix: prefix.stats(),
            uts_nodes: tree.nodes(),
        },
        wall,
        metrics: report.metrics,
    }
}

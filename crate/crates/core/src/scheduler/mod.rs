//! Strategy-aware work-stealing runtime.
//!
//! One worker per place. Spawning is help-first: the child goes into the
//! spawning place's task storage and the parent continues, unless the child's
//! strategy permits call conversion and its weight is small relative to the
//! local queue, in which case it runs immediately as a plain call. Idle
//! workers steal from the nearest places first and take records in their own
//! priority order until half of the victim's queued weight is covered.
//!
//! Synchronization is through finish regions: [`Ctx::finish`] returns only
//! after every task spawned inside it, transitively, has completed or was
//! discarded as dead.

mod report;
mod worker;

use std::any::Any;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

pub use report::{RunMetrics, RunReport, TaskId, TraceEvent};

use crate::machine::{MachineError, MachineTree, PlaceId, Topology};
use crate::storage::{StorageConfig, TaskRecord};
use crate::strategy::{LifoFifo, Strategy, StrategyHierarchy};
use worker::{Shared, Worker};

/// Default call-conversion divisor.
pub const DEFAULT_CONVERSION_DIVISOR: u64 = 64;

/// Idle-worker backoff: a few spins, then yields, then sleeps that double up
/// to `max_sleep`.
#[derive(Debug, Clone, Copy)]
pub struct Backoff {
    pub spin_rounds: u32,
    pub yield_rounds: u32,
    pub max_sleep: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            spin_rounds: 2,
            yield_rounds: 8,
            max_sleep: Duration::from_micros(200),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchedulerConfig {
    pub threads: usize,
    /// Machine tree, trimmed to `threads` leaves; `None` selects the default
    /// grouping for `threads`.
    pub topology: Option<Topology>,
    /// K in "convert when weight <= max(1, local weight / K)".
    pub conversion_divisor: u64,
    /// `false` queues every spawn regardless of its strategy.
    pub call_conversion: bool,
    pub backoff: Backoff,
    pub seed: u64,
    /// Best-effort CPU pinning of workers.
    pub pin_threads: bool,
    /// Record a [`TraceEvent`] log (slow; meant for tests).
    pub trace: bool,
    pub storage: StorageConfig,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            threads: 1,
            topology: None,
            conversion_divisor: DEFAULT_CONVERSION_DIVISOR,
            call_conversion: true,
            backoff: Backoff::default(),
            seed: 0x5eed_cafe_f00d_d00d,
            pin_threads: false,
            trace: false,
            storage: StorageConfig::default(),
        }
    }
}

impl SchedulerConfig {
    pub fn with_threads(threads: usize) -> Self {
        SchedulerConfig {
            threads,
            ..Self::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SchedulerError {
    #[error("thread count must be positive")]
    NoThreads,
    #[error("call-conversion divisor must be positive")]
    ZeroDivisor,
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// `true` iff a spawn with this strategy data should run as a plain call.
pub fn convert_decision(allow: bool, weight: u64, local_total_weight: u64, divisor: u64) -> bool {
    allow && weight <= (local_total_weight / divisor.max(1)).max(1)
}

/// Completion counter of a finish region.
pub(crate) struct Region {
    pending: AtomicUsize,
    panic: Mutex<Option<Box<dyn Any + Send>>>,
}

impl Region {
    fn new() -> Self {
        Region {
            pending: AtomicUsize::new(0),
            panic: Mutex::new(None),
        }
    }

    fn enter(&self) {
        self.pending.fetch_add(1, Ordering::AcqRel);
    }

    fn leave(&self) {
        let before = self.pending.fetch_sub(1, Ordering::AcqRel);
        debug_assert!(before > 0, "region counter underflow");
    }

    fn is_done(&self) -> bool {
        self.pending.load(Ordering::Acquire) == 0
    }

    fn record_panic(&self, payload: Box<dyn Any + Send>) {
        let mut slot = self.panic.lock().unwrap_or_else(|e| e.into_inner());
        slot.get_or_insert(payload);
    }

    fn take_panic(&self) -> Option<Box<dyn Any + Send>> {
        self.panic.lock().unwrap_or_else(|e| e.into_inner()).take()
    }
}

type Work<'env> = Box<dyn for<'a> FnOnce(&Ctx<'a, 'env>) + Send + 'env>;

/// Queued task body. Dropping it, whether after execution or because the
/// task was discarded, completes it in its region.
pub(crate) struct Job<'env> {
    region: Arc<Region>,
    work: Option<Work<'env>>,
}

impl Drop for Job<'_> {
    fn drop(&mut self) {
        self.region.leave();
    }
}

/// Handle passed to every task: spawn, finish, and place queries.
pub struct Ctx<'a, 'env> {
    worker: &'a Worker<'a, 'env>,
    region: Arc<Region>,
}

impl<'a, 'env> Ctx<'a, 'env> {
    /// Place executing the current task.
    pub fn place(&self) -> PlaceId {
        self.worker.id()
    }

    pub fn place_count(&self) -> usize {
        self.worker.shared().tree.leaf_count()
    }

    pub fn tree(&self) -> &MachineTree {
        &self.worker.shared().tree
    }

    pub fn hierarchy(&self) -> &StrategyHierarchy {
        &self.worker.shared().hierarchy
    }

    /// Spawn with the default LIFO/FIFO strategy.
    pub fn spawn(&self, f: impl for<'b> FnOnce(&Ctx<'b, 'env>) + Send + 'env) {
        self.spawn_s(LifoFifo, f);
    }

    /// Spawn `f` scheduled by `strategy`.
    ///
    /// # Panics
    /// If the strategy's type is not registered in the scheduler's hierarchy
    /// or reports a zero transitive weight.
    pub fn spawn_s<S: Strategy>(
        &self,
        strategy: S,
        f: impl for<'b> FnOnce(&Ctx<'b, 'env>) + Send + 'env,
    ) {
        let w = self.worker;
        let shared = w.shared();
        let storage = w.storage();
        if convert_decision(
            shared.config.call_conversion && strategy.allow_call_conversion(),
            strategy.transitive_weight(),
            storage.total_queued_weight(),
            shared.config.conversion_divisor,
        ) {
            w.note_conversion();
            if shared.trace.is_some() {
                let task = TaskId {
                    origin: w.id(),
                    seq: w.next_seq(),
                };
                let weight = strategy.transitive_weight();
                w.trace(TraceEvent::Spawn {
                    place: w.id(),
                    task,
                    strategy: shared.hierarchy.type_of::<S>(),
                    weight,
                    inline: true,
                });
                drop(strategy);
                w.trace(TraceEvent::Start {
                    place: w.id(),
                    task,
                    inline: true,
                });
                f(self);
                w.trace(TraceEvent::End { place: w.id(), task });
            } else {
                drop(strategy);
                f(self);
            }
            return;
        }

        let seq = w.next_seq();
        let descriptor = shared
            .hierarchy
            .describe(strategy, w.id(), seq)
            .unwrap_or_else(|e| panic!("spawn_s: {e}"));
        if shared.trace.is_some() {
            w.trace(TraceEvent::Spawn {
                place: w.id(),
                task: TaskId {
                    origin: w.id(),
                    seq,
                },
                strategy: Some(descriptor.type_id()),
                weight: descriptor.transitive_weight(),
                inline: false,
            });
        }
        self.region.enter();
        let job = Job {
            region: Arc::clone(&self.region),
            work: Some(Box::new(f)),
        };
        storage.push(TaskRecord::new(descriptor, job));
    }

    /// Run `body`, then help with scheduling until every task spawned inside
    /// it has completed. A panic in the body or in any of those tasks is
    /// re-raised here after the region has drained.
    pub fn finish<R>(&self, body: impl FnOnce(&Ctx<'_, 'env>) -> R) -> R {
        let region = Arc::new(Region::new());
        let inner = Ctx {
            worker: self.worker,
            region: Arc::clone(&region),
        };
        let result = catch_unwind(AssertUnwindSafe(|| body(&inner)));
        self.worker.help_until(|| region.is_done());
        let task_panic = region.take_panic();
        match result {
            Err(payload) => resume_unwind(payload),
            Ok(_) if task_panic.is_some() => resume_unwind(task_panic.expect("checked")),
            Ok(value) => value,
        }
    }
}

/// Strategy-aware work-stealing scheduler.
pub struct Scheduler {
    config: SchedulerConfig,
    tree: Arc<MachineTree>,
    hierarchy: Arc<StrategyHierarchy>,
    last: Mutex<Option<RunReport>>,
}

impl std::fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scheduler")
            .field("config", &self.config)
            .field("hierarchy", &self.hierarchy)
            .finish_non_exhaustive()
    }
}

impl Scheduler {
    pub fn new(config: SchedulerConfig, hierarchy: StrategyHierarchy) -> Result<Self, SchedulerError> {
        Self::with_shared_hierarchy(config, Arc::new(hierarchy))
    }

    pub fn with_shared_hierarchy(
        config: SchedulerConfig,
        hierarchy: Arc<StrategyHierarchy>,
    ) -> Result<Self, SchedulerError> {
        if config.threads == 0 {
            return Err(SchedulerError::NoThreads);
        }
        if config.conversion_divisor == 0 {
            return Err(SchedulerError::ZeroDivisor);
        }
        let tree = match &config.topology {
            None => MachineTree::for_threads(config.threads),
            Some(t) => MachineTree::trimmed(t.clone(), config.threads)?,
        };
        Ok(Scheduler {
            config,
            tree: Arc::new(tree),
            hierarchy,
            last: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn threads(&self) -> usize {
        self.config.threads
    }

    pub fn tree(&self) -> &MachineTree {
        &self.tree
    }

    pub fn hierarchy(&self) -> &Arc<StrategyHierarchy> {
        &self.hierarchy
    }

    /// Run `root` on place 0 inside a finish region with all workers active,
    /// returning once the whole computation has completed.
    pub fn run<'env, R>(&self, root: impl for<'a> FnOnce(&Ctx<'a, 'env>) -> R + 'env) -> R {
        let (value, report) = self.execute(Arc::clone(&self.tree), self.config.trace, root);
        *self.last.lock().unwrap_or_else(|e| e.into_inner()) = Some(report);
        value
    }

    /// Like [`run`](Self::run), also returning the run's report.
    pub fn run_report<'env, R>(
        &self,
        root: impl for<'a> FnOnce(&Ctx<'a, 'env>) -> R + 'env,
    ) -> (R, RunReport) {
        let (value, report) = self.execute(Arc::clone(&self.tree), self.config.trace, root);
        *self.last.lock().unwrap_or_else(|e| e.into_inner()) = Some(report.clone());
        (value, report)
    }

    /// Single place, no stealing, full trace. The execution order depends
    /// only on the program and the seed.
    pub fn run_deterministic<'env, R>(
        &self,
        root: impl for<'a> FnOnce(&Ctx<'a, 'env>) -> R + 'env,
    ) -> (R, RunReport) {
        let tree = Arc::new(MachineTree::for_threads(1));
        self.execute(tree, true, root)
    }

    /// Single place and no stealing like
    /// [`run_deterministic`](Self::run_deterministic), with tracing as
    /// configured. Meant for large oracle runs.
    pub fn run_sequential<'env, R>(
        &self,
        root: impl for<'a> FnOnce(&Ctx<'a, 'env>) -> R + 'env,
    ) -> (R, RunReport) {
        let tree = Arc::new(MachineTree::for_threads(1));
        self.execute(tree, self.config.trace, root)
    }

    /// Report of the most recent `run` or `run_report`.
    pub fn last_report(&self) -> Option<RunReport> {
        self.last.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn execute<'env, R>(
        &self,
        tree: Arc<MachineTree>,
        trace: bool,
        root: impl for<'a> FnOnce(&Ctx<'a, 'env>) -> R + 'env,
    ) -> (R, RunReport) {
        let shared = Shared::new(&self.config, tree, Arc::clone(&self.hierarchy), trace);
        let places = shared.tree.leaf_count();
        let outcome = std::thread::scope(|scope| {
            for i in 1..places {
                let shared = &shared;
                std::thread::Builder::new()
                    .name(format!("stratsched-{i}"))
                    .spawn_scoped(scope, move || {
                        let worker = Worker::new(shared, PlaceId::new(i));
                        worker.main_loop();
                    })
                    .expect("spawn worker thread");
            }
            let worker = Worker::new(&shared, PlaceId::new(0));
            let outcome = {
                let _stop = shared.stop_on_drop();
                let ctx = Ctx {
                    worker: &worker,
                    region: Arc::new(Region::new()),
                };
                catch_unwind(AssertUnwindSafe(|| ctx.finish(root)))
            };
            drop(worker);
            outcome
        });
        let report = shared.into_report();
        match outcome {
            Ok(value) => (value, report),
            Err(payload) => resume_unwind(payload),
        }
    }
}

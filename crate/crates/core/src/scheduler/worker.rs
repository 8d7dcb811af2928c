use std::cell::{Cell, RefCell};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::rngs::SmallRng;
use rand::SeedableRng;

use super::report::{RunMetrics, RunReport, TaskId, TraceEvent};
use super::{Ctx, Job, SchedulerConfig};
use crate::machine::{MachineTree, PlaceId};
use crate::storage::{PriorityTaskStorage, TaskRecord};
use crate::strategy::StrategyHierarchy;

/// State shared by all workers of one run.
pub(crate) struct Shared<'env> {
    pub(crate) config: SchedulerConfig,
    pub(crate) tree: Arc<MachineTree>,
    pub(crate) hierarchy: Arc<StrategyHierarchy>,
    pub(crate) trace: Option<Mutex<Vec<TraceEvent>>>,
    storages: Vec<PriorityTaskStorage<Job<'env>>>,
    done: AtomicBool,
    metrics: Mutex<Vec<RunMetrics>>,
}

pub(crate) struct StopGuard<'s>(&'s AtomicBool);

impl Drop for StopGuard<'_> {
    fn drop(&mut self) {
        self.0.store(true, Ordering::Release);
    }
}

impl<'env> Shared<'env> {
    pub(crate) fn new(
        config: &SchedulerConfig,
        tree: Arc<MachineTree>,
        hierarchy: Arc<StrategyHierarchy>,
        trace: bool,
    ) -> Self {
        let places = tree.leaf_count();
        let storages = tree
            .places()
            .map(|p| {
                PriorityTaskStorage::with_config(
                    p,
                    Arc::clone(&hierarchy),
                    Arc::clone(&tree),
                    config.storage,
                )
            })
            .collect();
        Shared {
            config: config.clone(),
            tree,
            hierarchy,
            trace: trace.then(|| Mutex::new(Vec::new())),
            storages,
            done: AtomicBool::new(false),
            metrics: Mutex::new(vec![RunMetrics::default(); places]),
        }
    }

    /// Sets the termination flag when dropped.
    pub(crate) fn stop_on_drop(&self) -> StopGuard<'_> {
        StopGuard(&self.done)
    }

    pub(crate) fn into_report(self) -> RunReport {
        let mut per_place = self.metrics.into_inner().unwrap_or_else(|e| e.into_inner());
        let mut metrics = RunMetrics::default();
        for (m, s) in per_place.iter_mut().zip(&self.storages) {
            let c = s.counters();
            m.pushes = c.pushes;
            m.pops = c.pops;
            m.steals = c.stolen;
            m.dead_removed = c.dead_removed;
            metrics.add(m);
        }
        RunReport {
            metrics,
            per_place,
            trace: self
                .trace
                .map(|t| t.into_inner().unwrap_or_else(|e| e.into_inner()))
                .unwrap_or_default(),
        }
    }
}

pub(crate) struct Worker<'a, 'env> {
    shared: &'a Shared<'env>,
    id: PlaceId,
    seq: Cell<u64>,
    idle: Cell<u32>,
    metrics: Cell<RunMetrics>,
    rng: RefCell<SmallRng>,
}

impl<'a, 'env> Worker<'a, 'env> {
    pub(crate) fn new(shared: &'a Shared<'env>, id: PlaceId) -> Self {
        if shared.config.pin_threads && id.index() > 0 {
            crate::machine::pin_current_thread(id.index());
        }
        let seed = shared.config.seed ^ (id.index() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Worker {
            shared,
            id,
            seq: Cell::new(0),
            idle: Cell::new(0),
            metrics: Cell::new(RunMetrics::default()),
            rng: RefCell::new(SmallRng::seed_from_u64(seed)),
        }
    }

    pub(crate) fn id(&self) -> PlaceId {
        self.id
    }

    pub(crate) fn shared(&self) -> &'a Shared<'env> {
        self.shared
    }

    pub(crate) fn storage(&self) -> &'a PriorityTaskStorage<Job<'env>> {
        &self.shared.storages[self.id.index()]
    }

    pub(crate) fn next_seq(&self) -> u64 {
        let s = self.seq.get() + 1;
        self.seq.set(s);
        s
    }

    fn bump(&self, f: impl FnOnce(&mut RunMetrics)) {
        let mut m = self.metrics.get();
        f(&mut m);
        self.metrics.set(m);
    }

    pub(crate) fn note_conversion(&self) {
        self.bump(|m| m.call_conversions += 1);
    }

    pub(crate) fn trace(&self, event: TraceEvent) {
        if let Some(t) = &self.shared.trace {
            t.lock().unwrap_or_else(|e| e.into_inner()).push(event);
        }
    }

    /// Worker loop of places other than 0.
    pub(crate) fn main_loop(&self) {
        self.help_until(|| self.shared.done.load(Ordering::Acquire));
    }

    /// Execute local or stolen tasks until `cond` holds.
    pub(crate) fn help_until(&self, cond: impl Fn() -> bool) {
        while !cond() {
            if let Some(record) = self.storage().pop() {
                self.idle.set(0);
                self.execute(record);
            } else if let Some(record) = self.steal() {
                self.idle.set(0);
                self.execute(record);
            } else {
                self.back_off();
            }
        }
    }

    fn execute(&self, record: TaskRecord<Job<'env>>) {
        let (descriptor, mut job) = record.into_parts();
        let task = TaskId {
            origin: descriptor.origin(),
            seq: descriptor.seq(),
        };
        drop(descriptor);
        self.bump(|m| m.executed += 1);
        self.trace(TraceEvent::Start {
            place: self.id,
            task,
            inline: false,
        });
        let work = job.work.take().expect("a queued job runs once");
        let ctx = Ctx {
            worker: self,
            region: Arc::clone(&job.region),
        };
        if let Err(payload) = catch_unwind(AssertUnwindSafe(|| work(&ctx))) {
            job.region.record_panic(payload);
        }
        self.trace(TraceEvent::End {
            place: self.id,
            task,
        });
        // dropping the job completes it in its region
    }

    fn steal(&self) -> Option<TaskRecord<Job<'env>>> {
        let shared = self.shared;
        if shared.storages.len() < 2 {
            return None;
        }
        let victims = shared
            .tree
            .victim_order(self.id, &mut *self.rng.borrow_mut())
            .expect("worker place is in the tree");
        for victim in victims {
            let storage = &shared.storages[victim.index()];
            if storage.size() == 0 {
                continue;
            }
            let target = (storage.total_queued_weight() / 2).max(1);
            self.bump(|m| m.steal_attempts += 1);
            let mut taken = storage.steal(self.id, target);
            if taken.is_empty() {
                continue;
            }
            self.bump(|m| m.successful_steals += 1);
            if shared.trace.is_some() {
                self.trace(TraceEvent::Steal {
                    thief: self.id,
                    victim,
                    target,
                    taken: taken
                        .iter()
                        .map(|r| r.descriptor().transitive_weight())
                        .collect(),
                    remaining: storage.visible_queued_weights(),
                });
            }
            let first = taken.remove(0);
            let own = self.storage();
            for record in taken {
                own.push(record);
            }
            return Some(first);
        }
        None
    }

    fn back_off(&self) {
        let b = &self.shared.config.backoff;
        let n = self.idle.get();
        self.idle.set(n.saturating_add(1));
        if n < b.spin_rounds {
            for _ in 0..(1u32 << n.min(6)) {
                std::hint::spin_loop();
            }
        } else if n < b.spin_rounds + b.yield_rounds {
            std::thread::yield_now();
        } else {
            let k = (n - b.spin_rounds - b.yield_rounds).min(16);
            let sleep = Duration::from_micros(1u64 << k).min(b.max_sleep);
            std::thread::sleep(sleep);
        }
    }
}

impl Drop for Worker<'_, '_> {
    fn drop(&mut self) {
        let mut all = self
            .shared
            .metrics
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        all[self.id.index()] = self.metrics.get();
    }
}

//! Per-place task storage.
//!
//! The owner keeps a private priority view that is updated on every push.
//! Every pushed slot is also appended to a shared spill log. A thief keeps its
//! own cached view of each victim, evaluated at the thief's place, and folds
//! in log entries past its high-water mark when it next steals.
//!
//! Slots are claimed with a single compare-and-swap on their state, so each
//! record is handed out at most once no matter how many views reference it.
//! The owner never waits for thieves: log appends use `try_lock` and fall
//! back to a private pending buffer, and thieves only hold the log lock while
//! cloning slot handles.

mod heap;
mod view;

use std::sync::atomic::{AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, TryLockError};

use crate::machine::{MachineTree, PlaceId};
use crate::strategy::{StrategyDescriptor, StrategyHierarchy, Viewpoint};
use view::PriorityView;

const QUEUED: u8 = 0;
const TAKEN: u8 = 1;
const DEAD: u8 = 2;

/// A unit of work together with its scheduling descriptor.
pub struct TaskRecord<T> {
    descriptor: Arc<StrategyDescriptor>,
    payload: T,
}

impl<T> TaskRecord<T> {
    pub fn new(descriptor: StrategyDescriptor, payload: T) -> Self {
        TaskRecord {
            descriptor: Arc::new(descriptor),
            payload,
        }
    }

    pub fn descriptor(&self) -> &StrategyDescriptor {
        &self.descriptor
    }

    pub fn payload(&self) -> &T {
        &self.payload
    }

    pub fn into_payload(self) -> T {
        self.payload
    }

    pub fn into_parts(self) -> (Arc<StrategyDescriptor>, T) {
        (self.descriptor, self.payload)
    }

    pub fn from_parts(descriptor: Arc<StrategyDescriptor>, payload: T) -> Self {
        TaskRecord {
            descriptor,
            payload,
        }
    }
}

impl<T> std::fmt::Debug for TaskRecord<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskRecord")
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

pub(crate) struct Slot<T> {
    descriptor: Arc<StrategyDescriptor>,
    state: AtomicU8,
    payload: Mutex<Option<T>>,
}

/// Snapshot of per-storage event counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StorageCounters {
    pub pushes: u64,
    pub pops: u64,
    pub stolen: u64,
    pub dead_removed: u64,
}

#[derive(Default)]
struct Counters {
    pushes: AtomicU64,
    pops: AtomicU64,
    stolen: AtomicU64,
    dead_removed: AtomicU64,
}

/// Tunables for cache eviction and log compaction.
#[derive(Debug, Clone, Copy)]
pub struct StorageConfig {
    /// A thief rebuilds its cached view once the victim has pushed this many
    /// times the number of entries the view was built with.
    pub stale_factor: usize,
    /// Minimum spill-log length before compaction is considered.
    pub compact_min: usize,
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig {
            stale_factor: 2,
            compact_min: 256,
        }
    }
}

struct OwnerState<T> {
    view: PriorityView<T>,
    pending: Vec<Arc<Slot<T>>>,
}

struct SpillLog<T> {
    entries: Vec<Arc<Slot<T>>>,
    generation: u64,
}

struct ThiefCache<T> {
    view: PriorityView<T>,
    generation: u64,
    high_water: usize,
    built_with: usize,
    added: usize,
}

/// Task container owned by one place and stolen from by the others.
pub struct PriorityTaskStorage<T> {
    owner: PlaceId,
    hierarchy: Arc<StrategyHierarchy>,
    tree: Arc<MachineTree>,
    config: StorageConfig,
    local: Mutex<OwnerState<T>>,
    log: Mutex<SpillLog<T>>,
    thieves: Box<[Mutex<ThiefCache<T>>]>,
    size: AtomicUsize,
    weight: AtomicU64,
    counters: Counters,
}

fn lock<X>(m: &Mutex<X>) -> MutexGuard<'_, X> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl<T> PriorityTaskStorage<T> {
    pub fn new(owner: PlaceId, hierarchy: Arc<StrategyHierarchy>, tree: Arc<MachineTree>) -> Self {
        Self::with_config(owner, hierarchy, tree, StorageConfig::default())
    }

    pub fn with_config(
        owner: PlaceId,
        hierarchy: Arc<StrategyHierarchy>,
        tree: Arc<MachineTree>,
        config: StorageConfig,
    ) -> Self {
        let thieves = (0..tree.leaf_count())
            .map(|_| {
                Mutex::new(ThiefCache {
                    view: PriorityView::new(&hierarchy),
                    generation: 0,
                    high_water: 0,
                    built_with: 0,
                    added: 0,
                })
            })
            .collect();
        PriorityTaskStorage {
            owner,
            local: Mutex::new(OwnerState {
                view: PriorityView::new(&hierarchy),
                pending: Vec::new(),
            }),
            log: Mutex::new(SpillLog {
                entries: Vec::new(),
                generation: 0,
            }),
            thieves,
            hierarchy,
            tree,
            config,
            size: AtomicUsize::new(0),
            weight: AtomicU64::new(0),
            counters: Counters::default(),
        }
    }

    pub fn owner(&self) -> PlaceId {
        self.owner
    }

    /// Number of queued records (snapshot).
    pub fn size(&self) -> usize {
        self.size.load(Ordering::Acquire)
    }

    /// Sum of transitive weights of queued records (snapshot).
    pub fn total_queued_weight(&self) -> u64 {
        self.weight.load(Ordering::Acquire)
    }

    pub fn counters(&self) -> StorageCounters {
        StorageCounters {
            pushes: self.counters.pushes.load(Ordering::Relaxed),
            pops: self.counters.pops.load(Ordering::Relaxed),
            stolen: self.counters.stolen.load(Ordering::Relaxed),
            dead_removed: self.counters.dead_removed.load(Ordering::Relaxed),
        }
    }

    /// Queue a record. Owner only.
    pub fn push(&self, record: TaskRecord<T>) {
        let weight = record.descriptor.transitive_weight();
        let slot = Arc::new(Slot {
            descriptor: record.descriptor,
            state: AtomicU8::new(QUEUED),
            payload: Mutex::new(Some(record.payload)),
        });
        self.size.fetch_add(1, Ordering::AcqRel);
        self.weight.fetch_add(weight, Ordering::AcqRel);
        self.counters.pushes.fetch_add(1, Ordering::Relaxed);

        let mut local = lock(&self.local);
        let vp = Viewpoint::owner(&self.tree, self.owner);
        local.view.insert(Arc::clone(&slot), &self.hierarchy, &vp);
        local.pending.push(slot);
        self.publish(&mut local, false);
    }

    /// Make buffered pushes visible to thieves, waiting for the log if needed.
    pub fn flush(&self) {
        let mut local = lock(&self.local);
        self.publish(&mut local, true);
    }

    fn publish(&self, local: &mut OwnerState<T>, block: bool) {
        if local.pending.is_empty() {
            return;
        }
        let mut log = match self.log.try_lock() {
            Ok(log) => log,
            Err(TryLockError::Poisoned(e)) => e.into_inner(),
            Err(TryLockError::WouldBlock) if block || local.pending.len() >= 64 => lock(&self.log),
            Err(TryLockError::WouldBlock) => return,
        };
        log.entries.append(&mut local.pending);
        let live = self.size();
        if log.entries.len() >= self.config.compact_min && log.entries.len() > 4 * live {
            log.entries
                .retain(|s| s.state.load(Ordering::Acquire) == QUEUED);
            log.generation += 1;
        }
    }

    /// Remove and return the owner's highest-priority live record. Owner only.
    pub fn pop(&self) -> Option<TaskRecord<T>> {
        let mut local = lock(&self.local);
        self.publish(&mut local, false);
        let vp = Viewpoint::owner(&self.tree, self.owner);
        loop {
            let slot = local
                .view
                .select(&self.hierarchy, &vp, &mut |s| self.discard(s))?;
            if let Some(record) = self.take(&slot) {
                self.counters.pops.fetch_add(1, Ordering::Relaxed);
                return Some(record);
            }
        }
    }

    /// Take records in `thief`'s priority order until their cumulative
    /// transitive weight reaches `target_weight` or nothing live remains.
    pub fn steal(&self, thief: PlaceId, target_weight: u64) -> Vec<TaskRecord<T>> {
        debug_assert_ne!(thief, self.owner, "owners pop, they do not steal");
        let mut taken = Vec::new();
        if target_weight == 0 || thief == self.owner {
            return taken;
        }
        let Some(cache) = self.thieves.get(thief.index()) else {
            return taken;
        };
        let mut cache = lock(cache);
        let vp = Viewpoint::thief(&self.tree, thief);

        let fresh = {
            let log = lock(&self.log);
            if self.size() == 0 {
                cache.view.clear();
                cache.high_water = log.entries.len();
                cache.generation = log.generation;
                cache.built_with = 0;
                cache.added = 0;
                return taken;
            }
            let stale = cache.added
                >= self.config.stale_factor * cache.built_with.max(1)
                && cache.added > 0;
            if cache.generation != log.generation || stale {
                cache.view.clear();
                cache.generation = log.generation;
                cache.high_water = 0;
                cache.added = 0;
                cache.built_with = 0;
            }
            let fresh: Vec<Arc<Slot<T>>> = log.entries[cache.high_water..].to_vec();
            cache.high_water = log.entries.len();
            fresh
        };
        let rebuilding = cache.view.len() == 0 && cache.added == 0;
        let mut inserted = 0;
        for slot in fresh {
            if slot.state.load(Ordering::Acquire) == QUEUED {
                cache.view.insert(slot, &self.hierarchy, &vp);
                inserted += 1;
            }
        }
        if rebuilding {
            cache.built_with = inserted;
        } else {
            cache.added += inserted;
        }

        let mut got = 0u64;
        while got < target_weight {
            let Some(slot) = cache
                .view
                .select(&self.hierarchy, &vp, &mut |s| self.discard(s))
            else {
                break;
            };
            if let Some(record) = self.take(&slot) {
                got = got.saturating_add(record.descriptor.transitive_weight());
                self.counters.stolen.fetch_add(1, Ordering::Relaxed);
                taken.push(record);
            }
        }
        taken
    }

    /// Weights of queued records visible to thieves (diagnostics only).
    pub fn visible_queued_weights(&self) -> Vec<u64> {
        lock(&self.log)
            .entries
            .iter()
            .filter(|s| s.state.load(Ordering::Acquire) == QUEUED)
            .map(|s| s.descriptor.transitive_weight())
            .collect()
    }

    fn discard(&self, slot: &Slot<T>) -> bool {
        if slot.state.load(Ordering::Acquire) != QUEUED {
            return true;
        }
        if slot.descriptor.dead() {
            self.kill(slot);
            return true;
        }
        false
    }

    fn kill(&self, slot: &Slot<T>) {
        if slot
            .state
            .compare_exchange(QUEUED, DEAD, Ordering::AcqRel, Ordering::Acquire)
            .is_ok()
        {
            debug_assert!(slot.descriptor.dead(), "dead tasks must stay dead");
            self.release(&slot.descriptor);
            self.counters.dead_removed.fetch_add(1, Ordering::Relaxed);
            let payload = lock(&slot.payload).take();
            drop(payload);
        }
    }

    fn take(&self, slot: &Slot<T>) -> Option<TaskRecord<T>> {
        slot.state
            .compare_exchange(QUEUED, TAKEN, Ordering::AcqRel, Ordering::Acquire)
            .ok()?;
        self.release(&slot.descriptor);
        let payload = lock(&slot.payload)
            .take()
            .expect("a queued slot holds its payload");
        Some(TaskRecord {
            descriptor: Arc::clone(&slot.descriptor),
            payload,
        })
    }

    fn release(&self, d: &StrategyDescriptor) {
        self.size.fetch_sub(1, Ordering::AcqRel);
        self.weight
            .fetch_sub(d.transitive_weight(), Ordering::AcqRel);
    }
}

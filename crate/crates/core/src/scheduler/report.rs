use crate::machine::PlaceId;
use crate::strategy::StrategyTypeId;

/// Aggregate counters of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunMetrics {
    /// Records inserted into any task storage, including re-queued stolen records.
    pub pushes: u64,
    /// Records taken by their storage's owner.
    pub pops: u64,
    /// Records taken by thieves.
    pub steals: u64,
    /// Calls to a victim's steal operation.
    pub steal_attempts: u64,
    /// Steal operations that returned at least one record.
    pub successful_steals: u64,
    /// Spawns executed immediately as plain calls.
    pub call_conversions: u64,
    /// Records discarded because their strategy reported them dead.
    pub dead_removed: u64,
    /// Queued tasks executed (call-converted spawns excluded).
    pub executed: u64,
}

impl RunMetrics {
    /// `pushes == pops + steals + dead_removed`, which holds once every
    /// storage is drained.
    pub fn conserved(&self) -> bool {
        self.pushes == self.pops + self.steals + self.dead_removed
    }

    pub(crate) fn add(&mut self, other: &RunMetrics) {
        self.pushes += other.pushes;
        self.pops += other.pops;
        self.steals += other.steals;
        self.steal_attempts += other.steal_attempts;
        self.successful_steals += other.successful_steals;
        self.call_conversions += other.call_conversions;
        self.dead_removed += other.dead_removed;
        self.executed += other.executed;
    }
}

/// Identity of a spawned task: spawning place plus its sequence number there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId {
    pub origin: PlaceId,
    pub seq: u64,
}

/// Events recorded when tracing is enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Spawn {
        place: PlaceId,
        task: TaskId,
        strategy: Option<StrategyTypeId>,
        weight: u64,
        inline: bool,
    },
    Start {
        place: PlaceId,
        task: TaskId,
        inline: bool,
    },
    End {
        place: PlaceId,
        task: TaskId,
    },
    Steal {
        thief: PlaceId,
        victim: PlaceId,
        target: u64,
        /// Weights of the stolen records in take order.
        taken: Vec<u64>,
        /// Weights still queued at the victim right after the steal.
        remaining: Vec<u64>,
    },
}

/// Metrics plus, when tracing was on, the event trace of one run.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub metrics: RunMetrics,
    pub per_place: Vec<RunMetrics>,
    pub trace: Vec<TraceEvent>,
}

impl RunReport {
    /// Queued tasks in execution order, taken from the trace.
    pub fn execution_order(&self) -> Vec<TaskId> {
        self.trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Start {
                    task, inline: false, ..
                } => Some(*task),
                _ => None,
            })
            .collect()
    }
}

//! Work-stealing task runtime where every spawned task carries a scheduling
//! strategy.
//!
//! Strategies decide task priority per place, estimate work for steal-half
//! balancing, allow cheap spawns to run as plain calls, and mark obsolete
//! tasks dead so they are dropped without running. Strategy types form a
//! hierarchy so that unrelated algorithms can share one scheduler.
//!
//! ```
//! use std::sync::atomic::{AtomicU64, Ordering};
//! use stratsched_core::{DepthFirst, Scheduler, SchedulerConfig, StrategyHierarchy};
//!
//! let mut h = StrategyHierarchy::new();
//! h.register::<DepthFirst>().unwrap();
//! let sched = Scheduler::new(SchedulerConfig::with_threads(2), h).unwrap();
//! let sum = AtomicU64::new(0);
//! sched.run(|ctx| {
//!     ctx.finish(|ctx| {
//!         for i in 1..=10 {
//!             let sum = &sum;
//!             ctx.spawn_s(DepthFirst::new(1, 1), move |_| {
//!                 sum.fetch_add(i, Ordering::Relaxed);
//!             });
//!         }
//!     })
//! });
//! assert_eq!(sum.load(Ordering::Relaxed), 55);
//! ```

pub mod machine;
pub mod scheduler;
pub mod storage;
pub mod strategy;

pub use machine::{MachineError, MachineTree, PlaceId, Topology};
pub use scheduler::{
    convert_decision, Backoff, Ctx, RunMetrics, RunReport, Scheduler, SchedulerConfig,
    SchedulerError, TaskId, TraceEvent, DEFAULT_CONVERSION_DIVISOR,
};
pub use storage::{PriorityTaskStorage, StorageConfig, StorageCounters, TaskRecord};
pub use strategy::{
    AnyStrategy, DepthFirst, Fifo, LifoFifo, PriorityContext, Strategy, StrategyDescriptor,
    StrategyError, StrategyHierarchy, StrategyTypeId, Viewpoint,
};

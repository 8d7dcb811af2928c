//! Randomized concurrent exercise of one task storage: an owner pushing and
//! popping, three thieves stealing, some tasks dead on arrival and some
//! killed while queued.

#![allow(dead_code)]

use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::{Arc, Barrier};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stratsched_core::{
    MachineTree, PlaceId, PriorityContext, PriorityTaskStorage, Strategy, StrategyHierarchy,
    TaskRecord,
};

pub struct Flagged {
    pub prio: u32,
    pub weight: u64,
    pub dead: Arc<AtomicBool>,
}

impl Strategy for Flagged {
    fn prioritize(&self, other: &Self, _ctx: &PriorityContext<'_>) -> std::cmp::Ordering {
        self.prio.cmp(&other.prio)
    }

    fn transitive_weight(&self) -> u64 {
        self.weight
    }

    fn dead(&self) -> bool {
        self.dead.load(Ordering::Acquire)
    }
}

#[derive(Debug, Default)]
pub struct StressOutcome {
    pub duplicates: usize,
    pub lost: usize,
    pub dead_executed: usize,
    pub conservation_failures: usize,
    pub accounting_failures: usize,
}

impl StressOutcome {
    pub fn ok(&self) -> bool {
        self.duplicates == 0
            && self.lost == 0
            && self.dead_executed == 0
            && self.conservation_failures == 0
            && self.accounting_failures == 0
    }
}

pub const THIEVES: usize = 3;

/// One iteration with at most `max_tasks` tasks.
pub fn stress_iteration(seed: u64, max_tasks: usize, out: &mut StressOutcome) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut h = StrategyHierarchy::new();
    h.register::<Flagged>().unwrap();
    let h = Arc::new(h);
    let tree = Arc::new(MachineTree::for_threads(THIEVES + 1));
    let storage = PriorityTaskStorage::<u32>::new(PlaceId::new(0), Arc::clone(&h), tree);

    let n = rng.gen_range(1..=max_tasks);
    let runs: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
    let flags: Vec<Arc<AtomicBool>> = (0..n).map(|_| Arc::new(AtomicBool::new(false))).collect();
    let doa: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
    let pushing_done = AtomicBool::new(false);
    let start = Barrier::new(THIEVES + 1);

    let execute = |id: u32| {
        runs[id as usize].fetch_add(1, Ordering::AcqRel);
    };

    std::thread::scope(|scope| {
        for t in 0..THIEVES {
            let thief = PlaceId::new(t + 1);
            let (storage, start, pushing_done) = (&storage, &start, &pushing_done);
            let mut trng = StdRng::seed_from_u64(seed ^ (0xabcd + t as u64));
            scope.spawn(move || {
                start.wait();
                loop {
                    let finished = pushing_done.load(Ordering::Acquire);
                    let target = trng.gen_range(0..=(storage.total_queued_weight() / 2).max(1));
                    for r in storage.steal(thief, target) {
                        execute(*r.payload());
                    }
                    if finished && storage.size() == 0 {
                        break;
                    }
                    std::thread::yield_now();
                }
            });
        }

        start.wait();
        let mut seq = 0;
        for id in 0..n {
            if doa[id] {
                flags[id].store(true, Ordering::Release);
            }
            seq += 1;
            let s = Flagged {
                prio: rng.gen_range(0..4),
                weight: rng.gen_range(1..=8),
                dead: Arc::clone(&flags[id]),
            };
            let d = h.describe(s, PlaceId::new(0), seq).unwrap();
            storage.push(TaskRecord::new(d, id as u32));
            if rng.gen_bool(0.05) {
                flags[rng.gen_range(0..=id)].store(true, Ordering::Release);
            }
            if rng.gen_bool(0.3) {
                if let Some(r) = storage.pop() {
                    execute(*r.payload());
                }
            }
        }
        storage.flush();
        pushing_done.store(true, Ordering::Release);
        while let Some(r) = storage.pop() {
            execute(*r.payload());
        }
    });

    // quiescent: everything taken or removed
    let c = storage.counters();
    if c.pushes != c.pops + c.stolen + c.dead_removed || c.pushes != n as u64 {
        out.conservation_failures += 1;
    }
    if storage.size() != 0 || storage.total_queued_weight() != 0 {
        out.accounting_failures += 1;
    }
    let mut executed = 0;
    for id in 0..n {
        match runs[id].load(Ordering::Acquire) {
            0 => {}
            1 => executed += 1,
            _ => out.duplicates += 1,
        }
        if doa[id] && runs[id].load(Ordering::Acquire) > 0 {
            out.dead_executed += 1;
        }
    }
    if executed as u64 + c.dead_removed != n as u64 {
        out.lost += 1;
    }
}

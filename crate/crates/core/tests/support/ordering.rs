//! Random strategy hierarchies and a brute-force reference order.
//!
//! The reference never calls into the hierarchy's comparison code: it
//! re-derives projected keys, comparator directions, tie-breaks and the
//! grouped ordering from the definitions below.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::sync::Arc;

use rand::Rng;
use stratsched_core::{
    AnyStrategy, MachineTree, PlaceId, PriorityContext, PriorityTaskStorage, Strategy,
    StrategyDescriptor, StrategyHierarchy, StrategyTypeId, TaskRecord,
};

pub const MAX_TYPES: usize = 4;
const KEY_RANGE: u32 = 5;

/// Test strategy number `T`. Even types run larger keys first, odd types
/// smaller keys first; type 3 reverses its direction for thieves.
#[derive(Debug, Clone, Copy)]
pub struct TestStrat<const T: usize> {
    pub key: u32,
}

impl<const T: usize> Strategy for TestStrat<T> {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> Ordering {
        let ord = self.key.cmp(&other.key);
        let ord = if T % 2 == 0 { ord } else { ord.reverse() };
        if T == 3 && ctx.stealing() {
            ord.reverse()
        } else {
            ord
        }
    }
}

/// Key a type-`child` payload shows to its parent type.
pub fn project(child: usize, key: u32) -> u32 {
    (key * (2 * child as u32 + 3) + child as u32) % KEY_RANGE
}

fn boxed(ty: usize, key: u32) -> Box<dyn AnyStrategy> {
    match ty {
        0 => Box::new(TestStrat::<0> { key }),
        1 => Box::new(TestStrat::<1> { key }),
        2 => Box::new(TestStrat::<2> { key }),
        3 => Box::new(TestStrat::<3> { key }),
        _ => unreachable!(),
    }
}

fn register_one<const I: usize>(
    h: &mut StrategyHierarchy,
    parent: Option<(usize, StrategyTypeId)>,
) -> StrategyTypeId {
    match parent {
        None => h.register::<TestStrat<I>>().unwrap(),
        Some((p, pid)) => h
            .register_with::<TestStrat<I>>(pid, move |s| boxed(p, project(I, s.key)))
            .unwrap(),
    }
}

fn describe_one<const I: usize>(
    h: &StrategyHierarchy,
    key: u32,
    origin: PlaceId,
    seq: u64,
) -> StrategyDescriptor {
    h.describe(TestStrat::<I> { key }, origin, seq).unwrap()
}

/// Hierarchy over test types `0..parents.len()`. `parents[i]` is `None` for
/// a child of the root, else an earlier test type.
pub struct RandomHierarchy {
    pub parents: Vec<Option<usize>>,
    pub h: Arc<StrategyHierarchy>,
}

impl RandomHierarchy {
    pub fn generate(rng: &mut impl Rng) -> Self {
        let n = rng.gen_range(2..=MAX_TYPES);
        let parents = (0..n)
            .map(|i| {
                let p = rng.gen_range(0..=i);
                (p < i).then_some(p)
            })
            .collect();
        Self::new(parents)
    }

    pub fn new(parents: Vec<Option<usize>>) -> Self {
        let mut h = StrategyHierarchy::new();
        let mut ids: Vec<StrategyTypeId> = Vec::new();
        for (i, p) in parents.iter().enumerate() {
            let parent = p.map(|p| (p, ids[p]));
            let id = match i {
                0 => register_one::<0>(&mut h, parent),
                1 => register_one::<1>(&mut h, parent),
                2 => register_one::<2>(&mut h, parent),
                3 => register_one::<3>(&mut h, parent),
                _ => unreachable!(),
            };
            ids.push(id);
        }
        RandomHierarchy {
            parents,
            h: Arc::new(h),
        }
    }

    pub fn describe(&self, task: &OTask) -> StrategyDescriptor {
        let origin = PlaceId::new(task.origin);
        match task.ty {
            None => self
                .h
                .describe(stratsched_core::LifoFifo, origin, task.seq)
                .unwrap(),
            Some(0) => describe_one::<0>(&self.h, task.key, origin, task.seq),
            Some(1) => describe_one::<1>(&self.h, task.key, origin, task.seq),
            Some(2) => describe_one::<2>(&self.h, task.key, origin, task.seq),
            Some(3) => describe_one::<3>(&self.h, task.key, origin, task.seq),
            _ => unreachable!(),
        }
    }

    /// Random task; `ty == None` is a root-strategy task.
    pub fn random_task(&self, rng: &mut impl Rng, id: u32, seq: u64, places: usize) -> OTask {
        let ty = rng.gen_range(0..=self.parents.len());
        OTask {
            id,
            ty: (ty < self.parents.len()).then_some(ty),
            key: rng.gen_range(0..KEY_RANGE),
            origin: rng.gen_range(0..places),
            seq,
        }
    }

    fn in_subtree(&self, ty: Option<usize>, root: usize) -> bool {
        let mut cur = ty;
        while let Some(t) = cur {
            if t == root {
                return true;
            }
            cur = self.parents[t];
        }
        false
    }

    fn key_at(&self, task: &OTask, level: usize) -> u32 {
        let mut t = task.ty.expect("only typed tasks reach a typed level");
        let mut k = task.key;
        while t != level {
            k = project(t, k);
            t = self.parents[t].expect("level is an ancestor");
        }
        k
    }

    /// `Greater` iff `a` runs before `b` under `level`'s comparator at `at`.
    fn cmp_at(&self, level: Option<usize>, a: &OTask, b: &OTask, at: usize, stealing: bool) -> Ordering {
        let ord = match level {
            None => Ordering::Equal,
            Some(l) => {
                let (ka, kb) = (self.key_at(a, l), self.key_at(b, l));
                let mut ord = ka.cmp(&kb);
                if l % 2 == 1 {
                    ord = ord.reverse();
                }
                if l == 3 && stealing {
                    ord = ord.reverse();
                }
                ord
            }
        };
        ord.then_with(|| {
            let (la, lb) = (a.origin == at, b.origin == at);
            match (la, lb) {
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                (true, true) => (a.seq, a.origin).cmp(&(b.seq, b.origin)),
                (false, false) => (b.seq, b.origin).cmp(&(a.seq, a.origin)),
            }
        })
    }

    /// Reference order at place `at`: at each type, its own tasks and one
    /// block per non-empty child subtree are ranked by that type's
    /// comparator, blocks represented by their first task.
    pub fn grouped_sort(&self, tasks: &[OTask], at: usize, stealing: bool) -> Vec<OTask> {
        self.sort_level(None, tasks.to_vec(), at, stealing)
    }

    fn sort_level(&self, level: Option<usize>, tasks: Vec<OTask>, at: usize, stealing: bool) -> Vec<OTask> {
        let mut items: Vec<Vec<OTask>> = tasks
            .iter()
            .filter(|t| t.ty == level)
            .map(|t| vec![*t])
            .collect();
        for child in (0..self.parents.len()).filter(|&c| self.parents[c] == level) {
            let members: Vec<OTask> = tasks
                .iter()
                .filter(|t| self.in_subtree(t.ty, child))
                .copied()
                .collect();
            if !members.is_empty() {
                items.push(self.sort_level(Some(child), members, at, stealing));
            }
        }
        items.sort_by(|a, b| self.cmp_at(level, &b[0], &a[0], at, stealing));
        items.concat()
    }

    /// True iff the tasks of every test-type subtree appear contiguously.
    pub fn groups_contiguous(&self, order: &[OTask]) -> bool {
        (0..self.parents.len()).all(|c| {
            let pos: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(_, t)| self.in_subtree(t.ty, c))
                .map(|(i, _)| i)
                .collect();
            pos.windows(2).all(|w| w[1] == w[0] + 1)
        })
    }
}

/// Reference-side task description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OTask {
    pub id: u32,
    pub ty: Option<usize>,
    pub key: u32,
    pub origin: usize,
    pub seq: u64,
}

pub const PLACES: usize = 4;

/// Outcome of one randomized ordering check.
#[derive(Debug, Default, Clone, Copy)]
pub struct OrderingCheck {
    pub frozen_mismatch: bool,
    pub interleaved_mismatch: bool,
    pub steal_mismatch: bool,
    pub not_grouped: bool,
}

impl OrderingCheck {
    pub fn ok(&self) -> bool {
        !(self.frozen_mismatch || self.interleaved_mismatch || self.steal_mismatch || self.not_grouped)
    }
}

fn storage(rh: &RandomHierarchy) -> PriorityTaskStorage<u32> {
    PriorityTaskStorage::new(
        PlaceId::new(0),
        Arc::clone(&rh.h),
        Arc::new(MachineTree::for_threads(PLACES)),
    )
}

/// One random set of at most `max_tasks` tasks: frozen pop order, pop order
/// with pushes and pops interleaved, and a thief's take order, each against
/// the reference.
pub fn check_random_set(rng: &mut impl Rng, max_tasks: usize) -> OrderingCheck {
    let rh = RandomHierarchy::generate(rng);
    let n = rng.gen_range(1..=max_tasks);
    let tasks: Vec<OTask> = (0..n as u32)
        .map(|i| rh.random_task(rng, i, i as u64 + 1, PLACES))
        .collect();
    let mut out = OrderingCheck::default();

    // all pushed, then popped by the owner
    let s = storage(&rh);
    for t in &tasks {
        s.push(TaskRecord::new(rh.describe(t), t.id));
    }
    let popped: Vec<u32> = std::iter::from_fn(|| s.pop()).map(|r| r.into_payload()).collect();
    let expected = rh.grouped_sort(&tasks, 0, false);
    out.frozen_mismatch = popped != expected.iter().map(|t| t.id).collect::<Vec<_>>();
    out.not_grouped = !rh.groups_contiguous(&expected)
        || !rh.groups_contiguous(
            &popped
                .iter()
                .map(|&id| tasks[id as usize])
                .collect::<Vec<_>>(),
        );

    // pushes and pops interleaved; the reference re-sorts after each push
    let s = storage(&rh);
    let mut queued: Vec<OTask> = Vec::new();
    let mut next = 0;
    while next < tasks.len() || !queued.is_empty() {
        if next < tasks.len() && (queued.is_empty() || rng.gen_bool(0.6)) {
            let t = tasks[next];
            next += 1;
            s.push(TaskRecord::new(rh.describe(&t), t.id));
            queued.push(t);
            queued = rh.grouped_sort(&queued, 0, false);
        } else {
            let want = queued.remove(0);
            let got = s.pop().map(|r| r.into_payload());
            if got != Some(want.id) {
                out.interleaved_mismatch = true;
                break;
            }
        }
    }

    // thief at place 1 takes one weight-1 record per steal
    let s = storage(&rh);
    for t in &tasks {
        s.push(TaskRecord::new(rh.describe(t), t.id));
    }
    let thief = PlaceId::new(1);
    let stolen: Vec<u32> = std::iter::from_fn(|| {
        let mut batch = s.steal(thief, 1);
        assert!(batch.len() <= 1);
        batch.pop()
    })
    .map(|r| r.into_payload())
    .collect();
    let expected = rh.grouped_sort(&tasks, 1, true);
    out.steal_mismatch = stolen != expected.iter().map(|t| t.id).collect::<Vec<_>>();
    out
}

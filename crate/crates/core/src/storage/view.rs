//! Place-specific priority ordering over a set of task slots.
//!
//! Tasks are kept in one heap per strategy type. The next task is found by
//! walking the type tree from the root: at each type, its own heap top
//! competes with the best member of each child subtree, ranked by that type's
//! comparator. Once a subtree wins, the view keeps draining it until it is
//! empty or a new task arrives, so that in a fixed set all tasks of one
//! subtree come out contiguously.

use std::cmp::Ordering;
use std::sync::Arc;

use super::heap::Heap;
use super::Slot;
use crate::strategy::{StrategyHierarchy, StrategyTypeId, Viewpoint};

struct Group<T> {
    heap: Heap<Arc<Slot<T>>>,
    // entries in this group's heap and all descendant heaps
    subtree: usize,
}

pub(crate) struct PriorityView<T> {
    groups: Vec<Group<T>>,
    // chain of groups currently being drained, root first
    path: Vec<StrategyTypeId>,
}

enum Winner {
    Direct,
    Child(StrategyTypeId),
}

impl<T> PriorityView<T> {
    pub(crate) fn new(hierarchy: &StrategyHierarchy) -> Self {
        PriorityView {
            groups: (0..hierarchy.len())
                .map(|_| Group {
                    heap: Heap::new(),
                    subtree: 0,
                })
                .collect(),
            path: vec![StrategyTypeId::ROOT],
        }
    }

    /// Entries held, including ones that may already be taken elsewhere.
    pub(crate) fn len(&self) -> usize {
        self.groups[0].subtree
    }

    pub(crate) fn clear(&mut self) {
        for g in &mut self.groups {
            g.heap.clear();
            g.subtree = 0;
        }
        self.path.truncate(1);
    }

    pub(crate) fn insert(&mut self, slot: Arc<Slot<T>>, h: &StrategyHierarchy, vp: &Viewpoint<'_>) {
        let ty = slot.descriptor.type_id();
        self.groups[ty.index()].heap.push(slot, |a, b| {
            h.compare_at(ty, &a.descriptor, &b.descriptor, vp) == Ordering::Greater
        });
        self.adjust(ty, h, true);
        self.path.truncate(1);
    }

    fn adjust(&mut self, ty: StrategyTypeId, h: &StrategyHierarchy, grow: bool) {
        let mut cur = Some(ty);
        while let Some(c) = cur {
            let g = &mut self.groups[c.index()];
            if grow {
                g.subtree += 1;
            } else {
                g.subtree -= 1;
            }
            cur = h.parent(c).expect("registered type");
        }
    }

    /// Remove and return the highest-priority entry. `discard` is consulted
    /// for every candidate heap top; entries it rejects are dropped from the
    /// view and never returned.
    pub(crate) fn select(
        &mut self,
        h: &StrategyHierarchy,
        vp: &Viewpoint<'_>,
        discard: &mut dyn FnMut(&Slot<T>) -> bool,
    ) -> Option<Arc<Slot<T>>> {
        loop {
            let group = *self.path.last().expect("path keeps the root");
            if self.groups[group.index()].subtree == 0 {
                if group.is_root() {
                    return None;
                }
                self.path.pop();
                continue;
            }
            match self.best_in(group, h, vp, discard) {
                None => {
                    if group.is_root() {
                        return None;
                    }
                    self.path.pop();
                }
                Some((Winner::Direct, _)) => {
                    let slot = self.groups[group.index()]
                        .heap
                        .pop(|a, b| {
                            h.compare_at(group, &a.descriptor, &b.descriptor, vp)
                                == Ordering::Greater
                        })
                        .expect("winner came from this heap");
                    self.adjust(group, h, false);
                    return Some(slot);
                }
                Some((Winner::Child(child), _)) => self.path.push(child),
            }
        }
    }

    fn best_in(
        &mut self,
        group: StrategyTypeId,
        h: &StrategyHierarchy,
        vp: &Viewpoint<'_>,
        discard: &mut dyn FnMut(&Slot<T>) -> bool,
    ) -> Option<(Winner, Arc<Slot<T>>)> {
        let mut best = self.top(group, h, vp, discard).map(|s| (Winner::Direct, s));
        for &child in h.children(group).expect("registered type") {
            if self.groups[child.index()].subtree == 0 {
                continue;
            }
            let Some((_, rep)) = self.best_in(child, h, vp, discard) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((_, cur)) => {
                    h.compare_at(group, &rep.descriptor, &cur.descriptor, vp) == Ordering::Greater
                }
            };
            if better {
                best = Some((Winner::Child(child), rep));
            }
        }
        best
    }

    fn top(
        &mut self,
        group: StrategyTypeId,
        h: &StrategyHierarchy,
        vp: &Viewpoint<'_>,
        discard: &mut dyn FnMut(&Slot<T>) -> bool,
    ) -> Option<Arc<Slot<T>>> {
        loop {
            let slot = self.groups[group.index()].heap.peek()?;
            if !discard(slot) {
                return Some(Arc::clone(slot));
            }
            self.groups[group.index()].heap.pop(|a, b| {
                h.compare_at(group, &a.descriptor, &b.descriptor, vp) == Ordering::Greater
            });
            self.adjust(group, h, false);
        }
    }
}

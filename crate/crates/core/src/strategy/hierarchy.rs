use std::any::TypeId;
use std::cmp::Ordering;
use std::fmt;

use super::{AnyStrategy, LifoFifo, PriorityContext, Strategy, StrategyDescriptor, Viewpoint};
use crate::machine::PlaceId;

/// Node of the strategy hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrategyTypeId(u32);

impl StrategyTypeId {
    pub const ROOT: StrategyTypeId = StrategyTypeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_root(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for StrategyTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("unknown strategy type {0}")]
    UnknownType(StrategyTypeId),
    #[error("strategy type {0} is not registered")]
    NotRegistered(&'static str),
    #[error("strategy type {0} is already registered")]
    AlreadyRegistered(&'static str),
    #[error("expected descriptors of type {expected}, found {found}")]
    TypeMismatch {
        expected: StrategyTypeId,
        found: StrategyTypeId,
    },
    #[error("projection produced {found}, but parent type expects {expected}")]
    ProjectionMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("transitive weight must be at least 1")]
    ZeroWeight,
}

type Projection = Box<dyn Fn(&dyn AnyStrategy) -> Box<dyn AnyStrategy> + Send + Sync>;

struct TypeEntry {
    name: &'static str,
    rust_type: TypeId,
    parent: Option<StrategyTypeId>,
    depth: usize,
    children: Vec<StrategyTypeId>,
    // maps a payload of this type onto the parent's payload type
    project: Option<Projection>,
}

/// Registry of strategy types arranged as a tree rooted at [`LifoFifo`].
///
/// Built once before a scheduler starts and shared read-only afterwards.
pub struct StrategyHierarchy {
    entries: Vec<TypeEntry>,
}

impl Default for StrategyHierarchy {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for StrategyHierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for (i, e) in self.entries.iter().enumerate() {
            list.entry(&(i, e.name, e.parent.map(|p| p.0)));
        }
        list.finish()
    }
}

impl StrategyHierarchy {
    pub fn new() -> Self {
        StrategyHierarchy {
            entries: vec![TypeEntry {
                name: std::any::type_name::<LifoFifo>(),
                rust_type: TypeId::of::<LifoFifo>(),
                parent: None,
                depth: 0,
                children: Vec::new(),
                project: None,
            }],
        }
    }

    pub fn root(&self) -> StrategyTypeId {
        StrategyTypeId::ROOT
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Register `S` directly below the root.
    pub fn register<S: Strategy>(&mut self) -> Result<StrategyTypeId, StrategyError> {
        self.insert::<S>(StrategyTypeId::ROOT, None)
    }

    /// Register `S` below `parent`, whose payload type is `P`.
    pub fn register_under<S: Strategy, P: Strategy>(
        &mut self,
        parent: StrategyTypeId,
        project: impl Fn(&S) -> P + Send + Sync + 'static,
    ) -> Result<StrategyTypeId, StrategyError> {
        let entry = self.entry(parent)?;
        if entry.rust_type != TypeId::of::<P>() {
            return Err(StrategyError::ProjectionMismatch {
                expected: entry.name,
                found: std::any::type_name::<P>(),
            });
        }
        let project: Projection = Box::new(move |payload| {
            let typed = payload.as_any().downcast_ref::<S>().expect("payload type");
            Box::new(project(typed))
        });
        self.insert::<S>(parent, Some(project))
    }

    /// Register `S` below `parent` with a type-erased projection. The
    /// projection's output type is checked every time a descriptor is built.
    pub fn register_with<S: Strategy>(
        &mut self,
        parent: StrategyTypeId,
        project: impl Fn(&S) -> Box<dyn AnyStrategy> + Send + Sync + 'static,
    ) -> Result<StrategyTypeId, StrategyError> {
        self.entry(parent)?;
        let project: Projection = Box::new(move |payload| {
            let typed = payload.as_any().downcast_ref::<S>().expect("payload type");
            project(typed)
        });
        self.insert::<S>(parent, Some(project))
    }

    /// Register `S` below the root unless it is already known.
    pub fn ensure<S: Strategy>(&mut self) -> StrategyTypeId {
        match self.type_of::<S>() {
            Some(id) => id,
            None => self.register::<S>().expect("fresh registration"),
        }
    }

    fn insert<S: Strategy>(
        &mut self,
        parent: StrategyTypeId,
        project: Option<Projection>,
    ) -> Result<StrategyTypeId, StrategyError> {
        if self.type_of::<S>().is_some() {
            return Err(StrategyError::AlreadyRegistered(std::any::type_name::<S>()));
        }
        let depth = self.entry(parent)?.depth + 1;
        let id = StrategyTypeId(self.entries.len() as u32);
        self.entries.push(TypeEntry {
            name: std::any::type_name::<S>(),
            rust_type: TypeId::of::<S>(),
            parent: Some(parent),
            depth,
            children: Vec::new(),
            project: if parent.is_root() { None } else { project },
        });
        self.entries[parent.index()].children.push(id);
        Ok(id)
    }

    fn entry(&self, id: StrategyTypeId) -> Result<&TypeEntry, StrategyError> {
        self.entries
            .get(id.index())
            .ok_or(StrategyError::UnknownType(id))
    }

    pub fn type_of<S: Strategy>(&self) -> Option<StrategyTypeId> {
        let wanted = TypeId::of::<S>();
        self.entries
            .iter()
            .position(|e| e.rust_type == wanted)
            .map(|i| StrategyTypeId(i as u32))
    }

    pub fn name(&self, id: StrategyTypeId) -> Result<&'static str, StrategyError> {
        Ok(self.entry(id)?.name)
    }

    pub fn parent(&self, id: StrategyTypeId) -> Result<Option<StrategyTypeId>, StrategyError> {
        Ok(self.entry(id)?.parent)
    }

    pub fn depth(&self, id: StrategyTypeId) -> Result<usize, StrategyError> {
        Ok(self.entry(id)?.depth)
    }

    pub fn children(&self, id: StrategyTypeId) -> Result<&[StrategyTypeId], StrategyError> {
        Ok(&self.entry(id)?.children)
    }

    /// True if `ancestor` lies on the path from `id` to the root (inclusive).
    pub fn is_ancestor(&self, ancestor: StrategyTypeId, id: StrategyTypeId) -> bool {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.entries.get(c.index()).and_then(|e| e.parent);
        }
        false
    }

    /// Lowest common ancestor of two registered types.
    pub fn lca(
        &self,
        a: StrategyTypeId,
        b: StrategyTypeId,
    ) -> Result<StrategyTypeId, StrategyError> {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.entry(a)?.depth, self.entry(b)?.depth);
        while da > db {
            a = self.entries[a.index()].parent.expect("non-root has parent");
            da -= 1;
        }
        while db > da {
            b = self.entries[b.index()].parent.expect("non-root has parent");
            db -= 1;
        }
        while a != b {
            a = self.entries[a.index()].parent.expect("non-root has parent");
            b = self.entries[b.index()].parent.expect("non-root has parent");
        }
        Ok(a)
    }

    /// Build the immutable descriptor for a task spawned at `origin`.
    pub fn describe<S: Strategy>(
        &self,
        strategy: S,
        origin: PlaceId,
        seq: u64,
    ) -> Result<StrategyDescriptor, StrategyError> {
        let type_id = self
            .type_of::<S>()
            .ok_or(StrategyError::NotRegistered(std::any::type_name::<S>()))?;
        let transitive_weight = strategy.transitive_weight();
        if transitive_weight == 0 {
            return Err(StrategyError::ZeroWeight);
        }
        let allow_call_conversion = strategy.allow_call_conversion();
        let place = strategy.place().unwrap_or(origin);
        let depth = self.entries[type_id.index()].depth;

        let strategy: Box<dyn AnyStrategy> = Box::new(strategy);
        let mut ancestors: Vec<Box<dyn AnyStrategy>> = Vec::new();
        let mut cur = type_id;
        while let Some(parent) = self.entries[cur.index()].parent {
            if parent.is_root() {
                break;
            }
            let entry = &self.entries[cur.index()];
            let project = entry.project.as_ref().expect("non-root parent has projection");
            let source: &dyn AnyStrategy = ancestors.last().map_or(&*strategy, |b| &**b);
            let projected = project(source);
            let parent_entry = &self.entries[parent.index()];
            if projected.as_any().type_id() != parent_entry.rust_type {
                return Err(StrategyError::ProjectionMismatch {
                    expected: parent_entry.name,
                    found: projected.type_name(),
                });
            }
            ancestors.push(projected);
            cur = parent;
        }

        Ok(StrategyDescriptor {
            type_id,
            depth,
            strategy,
            ancestors,
            transitive_weight,
            allow_call_conversion,
            place,
            origin,
            seq,
        })
    }

    /// Order of `a` relative to `b` under the comparator of `level`, which
    /// must be a common ancestor of both types. `Greater` means `a` first.
    /// Ties fall through to LIFO/FIFO, so only identical records compare equal.
    pub fn compare_at(
        &self,
        level: StrategyTypeId,
        a: &StrategyDescriptor,
        b: &StrategyDescriptor,
        vp: &Viewpoint<'_>,
    ) -> Ordering {
        let ord = if level.is_root() {
            Ordering::Equal
        } else {
            let depth = self.entries[level.index()].depth;
            let ctx = PriorityContext {
                viewpoint: *vp,
                this_place: a.place,
                other_place: b.place,
                this_seq: a.seq,
                other_seq: b.seq,
            };
            a.payload_at(depth).prioritize_dyn(b.payload_at(depth), &ctx)
        };
        ord.then_with(|| a.lifo_fifo(b, vp.place()))
    }

    /// Same-type prioritization: true iff `a` runs before `b` at the viewpoint.
    pub fn prioritize(
        &self,
        ty: StrategyTypeId,
        a: &StrategyDescriptor,
        b: &StrategyDescriptor,
        vp: &Viewpoint<'_>,
    ) -> Result<bool, StrategyError> {
        self.entry(ty)?;
        for d in [a, b] {
            if d.type_id != ty {
                return Err(StrategyError::TypeMismatch {
                    expected: ty,
                    found: d.type_id,
                });
            }
        }
        Ok(self.compare_at(ty, a, b, vp) == Ordering::Greater)
    }

    /// Pairwise cross-type comparison at the lowest common ancestor.
    ///
    /// Inside a task set, groups of same-subtree tasks are represented by
    /// their highest-priority member; for two tasks the members are the tasks
    /// themselves.
    pub fn compare(
        &self,
        a: &StrategyDescriptor,
        b: &StrategyDescriptor,
        vp: &Viewpoint<'_>,
    ) -> Result<Ordering, StrategyError> {
        let level = self.lca(a.type_id, b.type_id)?;
        Ok(self.compare_at(level, a, b, vp))
    }

    /// Liveness check; the default strategy is always live.
    pub fn dead(&self, d: &StrategyDescriptor) -> bool {
        d.dead()
    }
}

//! Abstract machine model.
//!
//! The machine is a balanced tree whose leaves are processing units and whose
//! inner nodes group units that share some level of the memory hierarchy.
//! Each leaf hosts exactly one place. The memory distance between two places
//! is the number of levels between the leaves and their lowest common
//! ancestor, which gives thieves a neighbor-first victim order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

/// Identifier of a place (one worker and its task storage).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PlaceId(usize);

impl PlaceId {
    pub const fn new(index: usize) -> Self {
        PlaceId(index)
    }

    pub const fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("topology needs at least one level")]
    NoLevels,
    #[error("fanout at level {0} must be positive")]
    ZeroFanout(usize),
    #[error("place {place} is outside the machine (0..{leaf_count})")]
    InvalidPlace { place: usize, leaf_count: usize },
    #[error("cannot parse topology {0:?}: expected e.g. \"2x4\"")]
    Parse(String),
    #[error("topology has {leaves} leaves but {threads} threads were requested")]
    LeafCountMismatch { leaves: usize, threads: usize },
    #[error("leaf placement must be a permutation of 0..{0}")]
    BadPlacement(usize),
}

/// Topology description: fanout per level, root to leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    fanouts: Vec<usize>,
}

impl Topology {
    pub fn new(fanouts: Vec<usize>) -> Result<Self, MachineError> {
        if fanouts.is_empty() {
            return Err(MachineError::NoLevels);
        }
        if let Some(level) = fanouts.iter().position(|&f| f == 0) {
            return Err(MachineError::ZeroFanout(level));
        }
        Ok(Topology { fanouts })
    }

    /// Two-level socket/core grouping for `threads` places: `[ceil(P/4), min(P,4)]`.
    ///
    /// The resulting tree may have more leaves than `threads`; the machine
    /// built from it is trimmed to exactly `threads` leaves.
    pub fn default_for(threads: usize) -> Self {
        let threads = threads.max(1);
        Topology {
            fanouts: vec![threads.div_ceil(4), threads.min(4)],
        }
    }

    pub fn fanouts(&self) -> &[usize] {
        &self.fanouts
    }

    pub fn leaf_capacity(&self) -> usize {
        self.fanouts.iter().product()
    }
}

impl FromStr for Topology {
    type Err = MachineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fanouts = s
            .split(['x', 'X'])
            .map(|part| part.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| MachineError::Parse(s.to_string()))?;
        Topology::new(fanouts)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.fanouts.iter().map(|f| f.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// Immutable machine tree with precomputed pairwise distances.
#[derive(Debug, Clone)]
pub struct MachineTree {
    topology: Topology,
    leaf_count: usize,
    place_of_leaf: Vec<PlaceId>,
    leaf_of_place: Vec<usize>,
    // leaf_count x leaf_count, indexed by place
    distances: Vec<u8>,
    // per place: the other places grouped by ascending distance
    distance_classes: Vec<Vec<Vec<PlaceId>>>,
}

impl MachineTree {
    /// Full tree: one place per leaf, identity placement.
    pub fn new(topology: Topology) -> Self {
        let leaves = topology.leaf_capacity();
        Self::build(topology, leaves, (0..leaves).map(PlaceId).collect())
    }

    /// Tree with the first `leaves` leaves of `topology` populated.
    pub fn trimmed(topology: Topology, leaves: usize) -> Result<Self, MachineError> {
        if leaves == 0 || leaves > topology.leaf_capacity() {
            return Err(MachineError::LeafCountMismatch {
                leaves: topology.leaf_capacity(),
                threads: leaves,
            });
        }
        Ok(Self::build(topology, leaves, (0..leaves).map(PlaceId).collect()))
    }

    /// Default machine for `threads` places.
    pub fn for_threads(threads: usize) -> Self {
        let threads = threads.max(1);
        Self::trimmed(Topology::default_for(threads), threads).expect("default topology fits")
    }

    /// Full tree with a custom leaf -> place assignment.
    pub fn with_placement(
        topology: Topology,
        place_of_leaf: Vec<usize>,
    ) -> Result<Self, MachineError> {
        let leaves = topology.leaf_capacity();
        let mut seen = vec![false; leaves];
        for &p in &place_of_leaf {
            if p >= leaves || std::mem::replace(&mut seen[p], true) {
                return Err(MachineError::BadPlacement(leaves));
            }
        }
        if place_of_leaf.len() != leaves {
            return Err(MachineError::BadPlacement(leaves));
        }
        Ok(Self::build(
            topology,
            leaves,
            place_of_leaf.into_iter().map(PlaceId).collect(),
        ))
    }

    fn build(topology: Topology, leaf_count: usize, place_of_leaf: Vec<PlaceId>) -> Self {
        let mut leaf_of_place = vec![0; leaf_count];
        for (leaf, place) in place_of_leaf.iter().enumerate() {
            leaf_of_place[place.0] = leaf;
        }
        let depth = topology.fanouts.len();
        let digits: Vec<Vec<usize>> = (0..leaf_count)
            .map(|leaf| {
                let mut rest = leaf;
                let mut out = vec![0; depth];
                for (level, &fanout) in topology.fanouts.iter().enumerate().rev() {
                    out[level] = rest % fanout;
                    rest /= fanout;
                }
                out
            })
            .collect();

        let mut distances = vec![0u8; leaf_count * leaf_count];
        for a in 0..leaf_count {
            for b in 0..leaf_count {
                let (la, lb) = (&digits[leaf_of_place[a]], &digits[leaf_of_place[b]]);
                let common = la.iter().zip(lb).take_while(|(x, y)| x == y).count();
                distances[a * leaf_count + b] = (depth - common) as u8;
            }
        }

        let distance_classes = (0..leaf_count)
            .map(|thief| {
                let mut classes: Vec<Vec<PlaceId>> = vec![Vec::new(); depth];
                for other in (0..leaf_count).filter(|&o| o != thief) {
                    let d = distances[thief * leaf_count + other] as usize;
                    classes[d - 1].push(PlaceId(other));
                }
                classes.retain(|c| !c.is_empty());
                classes
            })
            .collect();

        MachineTree {
            topology,
            leaf_count,
            place_of_leaf,
            leaf_of_place,
            distances,
            distance_classes,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn depth(&self) -> usize {
        self.topology.fanouts.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceId> {
        (0..self.leaf_count).map(PlaceId)
    }

    pub fn place_of_leaf(&self, leaf: usize) -> Option<PlaceId> {
        self.place_of_leaf.get(leaf).copied()
    }

    pub fn leaf_of_place(&self, place: PlaceId) -> Option<usize> {
        self.leaf_of_place.get(place.0).copied()
    }

    pub fn check(&self, place: PlaceId) -> Result<PlaceId, MachineError> {
        if place.0 < self.leaf_count {
            Ok(place)
        } else {
            Err(MachineError::InvalidPlace {
                place: place.0,
                leaf_count: self.leaf_count,
            })
        }
    }

    /// Tree depth minus the depth of the lowest common ancestor of both leaves.
    pub fn memory_distance(&self, a: PlaceId, b: PlaceId) -> Result<usize, MachineError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.distance_unchecked(a, b))
    }

    /// Like [`memory_distance`](Self::memory_distance) for ids already known to be valid.
    #[inline]
    pub fn distance_unchecked(&self, a: PlaceId, b: PlaceId) -> usize {
        self.distances[a.0 * self.leaf_count + b.0] as usize
    }

    /// Other places grouped by ascending distance from `thief`.
    pub fn distance_classes(&self, thief: PlaceId) -> &[Vec<PlaceId>] {
        &self.distance_classes[thief.0]
    }

    /// All other places, nearest first, shuffled within each distance class.
    pub fn victim_order<R: Rng + ?Sized>(
        &self,
        thief: PlaceId,
        rng: &mut R,
    ) -> Result<Vec<PlaceId>, MachineError> {
        self.check(thief)?;
        let mut order = Vec::with_capacity(self.leaf_count.saturating_sub(1));
        for class in self.distance_classes(thief) {
            let start = order.len();
            order.extend_from_slice(class);
            order[start..].shuffle(rng);
        }
        Ok(order)
    }
}

/// Pin the calling thread to `cpu` (modulo the online CPU count).
///
/// Returns `false` when pinning is unsupported or refused; callers treat that
/// as a soft failure.
pub fn pin_current_thread(cpu: usize) -> bool {
    #[cfg(target_os = "linux")]
    {
        let online = std::thread::available_parallelism().map_or(1, |n| n.get());
        // SAFETY: cpu_set_t is plain data; CPU_SET stays within the set because
        // the index is reduced modulo the online count (< CPU_SETSIZE).
        unsafe {
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(cpu % online, &mut set);
            libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
        }
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = cpu;
        false
    }
}

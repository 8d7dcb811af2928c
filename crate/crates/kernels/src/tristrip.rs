//! Triangle strip generation on the triangle adjacency graph of a mesh.
//!
//! A strip is a path of adjacent triangles. It is grown from a start
//! triangle at both ends, always extending with the neighbor that has the
//! fewest neighbors not yet in a strip; triangles are claimed with a
//! test-and-set on their in-strip flag.
//!
//! Two task types: a SpawnTask walks an interval of a seeded permutation of
//! the triangles and spawns a StartTask for each triangle not yet in a strip,
//! a chunk at a time; a StartTask grows one strip. StartTasks with fewer free
//! neighbors run first, and a StartTask whose triangle joined a strip is
//! dead. A StartTask whose triangle lost free neighbors since it was spawned
//! is spawned again with the current count. Both types share a parent type
//! that favors StartTasks locally and SpawnTasks for thieves.

use std::cmp::Ordering as CmpOrdering;
use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratsched_core::{Ctx, PriorityContext, Scheduler, Strategy, StrategyHierarchy};

use crate::{execute, Exec, KernelError, KernelMode, Outcome};

const NONE: u32 = u32::MAX;

/// Start candidates spawned per SpawnTask round. Kept at the conversion
/// divisor so that the queued StartTasks do not convert each other.
pub const CHUNK: usize = 64;

/// Triangles over vertex indices with their edge adjacency.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: usize,
    triangles: Vec<[u32; 3]>,
    adjacency: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: usize, triangles: Vec<[u32; 3]>) -> Result<Self, KernelError> {
        let mut edges: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= vertices) {
                return Err(KernelError::InvalidProblem(format!(
                    "triangle {t} references a vertex outside 0..{vertices}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(KernelError::InvalidProblem(format!("triangle {t} is degenerate")));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(t as u32);
            }
        }
        let mut adjacency = vec![[NONE; 3]; triangles.len()];
        let mut fill = vec![0usize; triangles.len()];
        for (edge, tris) in edges {
            match tris[..] {
                [_] => {}
                [a, b] if a != b => {
                    for (x, y) in [(a, b), (b, a)] {
                        adjacency[x as usize][fill[x as usize]] = y;
                        fill[x as usize] += 1;
                    }
                }
                _ => {
                    return Err(KernelError::InvalidProblem(format!(
                        "edge {edge:?} is shared by more than two triangles"
                    )))
                }
            }
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
            adjacency,
        })
    }

    /// `n x n` grid of unit squares, each cut along a random diagonal.
    pub fn grid(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = n + 1;
        let id = |x: usize, y: usize| (y * side + x) as u32;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for y in 0..n {
            for x in 0..n {
                let (a, b, c, d) = (id(x, y), id(x + 1, y), id(x + 1, y + 1), id(x, y + 1));
                if rng.gen_bool(0.5) {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        Self::new(side * side, triangles).expect("grid mesh is valid")
    }

    /// Text format: a header line `V T`, then `T` lines of three vertex
    /// indices. Blank lines and lines starting with `#` are ignored.
    pub fn read(input: impl BufRead) -> Result<Self, KernelError> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| {
                l.as_ref()
                    .map(|s| !s.trim().is_empty() && !s.trim_start().starts_with('#'))
                    .unwrap_or(true)
            });
        let numbers = |line: usize, s: &str, want: usize| -> Result<Vec<usize>, KernelError> {
            let v: Result<Vec<usize>, _> = s.split_whitespace().map(str::parse).collect();
            match v {
                Ok(v) if v.len() == want => Ok(v),
                _ => Err(KernelError::Parse {
                    line,
                    msg: format!("expected {want} non-negative integers"),
                }),
            }
        };
        let (line, header) = lines.next().ok_or(KernelError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let h = numbers(line, &header?, 2)?;
        let (vertices, count) = (h[0], h[1]);
        let mut triangles = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, text) = lines.next().ok_or(KernelError::Parse {
                line: 0,
                msg: format!("expected {count} triangles"),
            })?;
            let t = numbers(line, &text?, 3)?;
            let t: Vec<u32> = t
                .into_iter()
                .map(|v| {
                    u32::try_from(v).map_err(|_| KernelError::Parse {
                        line,
                        msg: "vertex index too large".into(),
                    })
                })
                .collect::<Result<_, _>>()?;
            triangles.push([t[0], t[1], t[2]]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(KernelError::Parse {
                line,
                msg: "unexpected data after the last triangle".into(),
            });
        }
        Self::new(vertices, triangles)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.vertices, self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn neighbors(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[t]
            .iter()
            .filter(|&&n| n != NONE)
            .map(|&n| n as usize)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&(b as u32))
    }
}

/// Parent strategy type: StartTasks first locally, SpawnTasks first for
/// thieves.
#[derive(Debug, Clone, Copy)]
pub struct TriStrip {
    spawn: bool,
}

impl Strategy for TriStrip {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> CmpOrdering {
        if ctx.stealing() {
            self.spawn.cmp(&other.spawn)
        } else {
            other.spawn.cmp(&self.spawn)
        }
    }
}

/// StartTask strategy: fewer free neighbors first; dead once the triangle is
/// in a strip.
pub struct StartStrategy {
    free_neighbors: u8,
    triangle: usize,
    in_strip: Arc<[AtomicBool]>,
}

/// Weight of a StartTask. A weight of 1 would always pass the conversion
/// threshold, so StartTasks would never be queued and never be ranked.
pub const START_WEIGHT: u64 = 2;

impl Strategy for StartStrategy {
    fn prioritize(&self, other: &Self, _ctx: &PriorityContext<'_>) -> CmpOrdering {
        other.free_neighbors.cmp(&self.free_neighbors)
    }

    fn transitive_weight(&self) -> u64 {
        START_WEIGHT
    }

    fn allow_call_conversion(&self) -> bool {
        true
    }

    fn dead(&self) -> bool {
        self.in_strip[self.triangle].load(Ordering::Acquire)
    }
}

/// SpawnTask strategy over a triangle interval.
pub struct SpawnStrategy {
    len: usize,
}

impl Strategy for SpawnStrategy {
    fn transitive_weight(&self) -> u64 {
        self.len.max(1) as u64
    }
}

pub fn register(h: &mut StrategyHierarchy) {
    if h.type_of::<TriStrip>().is_some() {
        return;
    }
    let parent = h.register::<TriStrip>().expect("fresh type");
    h.register_under::<StartStrategy, TriStrip>(parent, |_| TriStrip { spawn: false })
        .expect("fresh type");
    h.register_under::<SpawnStrategy, TriStrip>(parent, |_| TriStrip { spawn: true })
        .expect("fresh type");
}

#[derive(Debug, Clone)]
pub struct StripResult {
    pub strips: Vec<Vec<u32>>,
}

impl StripResult {
    pub fn strip_count(&self) -> usize {
        self.strips.len()
    }
}

struct Stripper<'m> {
    mesh: &'m TriangleMesh,
    order: Vec<u32>,
    in_strip: Arc<[AtomicBool]>,
    strips: Mutex<Vec<Vec<u32>>>,
    mode: KernelMode,
}

impl<'m> Stripper<'m> {
    fn free_neighbors(&self, t: usize) -> u8 {
        self.mesh
            .neighbors(t)
            .filter(|&n| !self.in_strip[n].load(Ordering::Relaxed))
            .count() as u8
    }

    fn claim(&self, t: usize) -> bool {
        !self.in_strip[t].swap(true, Ordering::AcqRel)
    }

    /// Claim the best free neighbor of `t`, if any.
    fn extend_from(&self, t: usize) -> Option<usize> {
        let mut candidates: Vec<(u8, usize)> = self
            .mesh
            .neighbors(t)
            .filter(|&n| !self.in_strip[n].load(Ordering::Acquire))
            .map(|n| (self.free_neighbors(n), n))
            .collect();
        candidates.sort_unstable();
        candidates.into_iter().map(|(_, n)| n).find(|&n| self.claim(n))
    }

    fn spawn_start<'env>(&'env self, ctx: &Ctx<'_, 'env>, t: usize) {
        let free = self.free_neighbors(t);
        let f = move |ctx: &Ctx<'_, 'env>| self.start(ctx, t, free);
        match self.mode {
            KernelMode::Strategy => ctx.spawn_s(
                StartStrategy {
                    free_neighbors: free,
                    triangle: t,
                    in_strip: Arc::clone(&self.in_strip),
                },
                f,
            ),
            KernelMode::LifoFifo => ctx.spawn(f),
        }
    }

    fn start<'env>(&'env self, ctx: &Ctx<'_, 'env>, t: usize, free: u8) {
        if self.mode == KernelMode::Strategy
            && !self.in_strip[t].load(Ordering::Acquire)
            && self.free_neighbors(t) < free
        {
            self.spawn_start(ctx, t);
            return;
        }
        if !self.claim(t) {
            return;
        }
        let mut strip = VecDeque::from([t as u32]);
        while let Some(n) = self.extend_from(*strip.back().expect("non-empty") as usize) {
            strip.push_back(n as u32);
        }
        while let Some(n) = self.extend_from(*strip.front().expect("non-empty") as usize) {
            strip.push_front(n as u32);
        }
        self.strips
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(strip.into());
    }

    fn spawn_interval<'env>(&'env self, ctx: &Ctx<'_, 'env>, lo: usize, hi: usize) {
        let s = SpawnStrategy { len: hi - lo };
        let f = move |ctx: &Ctx<'_, 'env>| self.walk(ctx, lo, hi);
        match self.mode {
            KernelMode::Strategy => ctx.spawn_s(s, f),
            KernelMode::LifoFifo => ctx.spawn(f),
        }
    }

    /// Spawn StartTasks for the next chunk of free triangles in `lo..hi`,
    /// then a SpawnTask for the rest.
    fn walk<'env>(&'env self, ctx: &Ctx<'_, 'env>, lo: usize, hi: usize) {
        let mut pos = lo;
        let mut spawned = 0;
        while pos < hi && spawned < CHUNK {
            let t = self.order[pos] as usize;
            pos += 1;
            if self.in_strip[t].load(Ordering::Acquire) {
                continue;
            }
            spawned += 1;
            self.spawn_start(ctx, t);
        }
        if pos < hi {
            self.spawn_interval(ctx, pos, hi);
        }
    }
}

/// Cover `mesh` with strips. `seed` fixes the order in which start
/// candidates are offered.
pub fn run(
    sched: &Scheduler,
    exec: Exec,
    mesh: &TriangleMesh,
    seed: u64,
    mode: KernelMode,
) -> Outcome<StripResult> {
    let mut order: Vec<u32> = (0..mesh.len() as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let stripper = Stripper {
        mesh,
        order,
        in_strip: (0..mesh.len()).map(|_| AtomicBool::new(false)).collect(),
        strips: Mutex::new(Vec::new()),
        mode,
    };
    let s = &stripper;
    let ((), wall, report) = execute(sched, exec, move |ctx| {
        if !s.mesh.is_empty() {
            s.spawn_interval(ctx, 0, s.mesh.len());
        }
    });
    let mut strips = stripper.strips.into_inner().unwrap_or_else(|e| e.into_inner());
    strips.sort_unstable();
    Outcome {
        result: StripResult { strips },
        wall,
        metrics: report.metrics,
    }
}

/// True iff `strips` are paths in the adjacency graph that together contain
/// every triangle exactly once.
pub fn verify(mesh: &TriangleMesh, strips: &[Vec<u32>]) -> bool {
    let mut seen = vec![false; mesh.len()];
    for strip in strips {
        if strip.is_empty() {
            return false;
        }
        for &t in strip {
            let t = t as usize;
            if t >= mesh.len() || std::mem::replace(&mut seen[t], true) {
                return false;
            }
        }
        if strip
            .windows(2)
            .any(|w| !mesh.adjacent(w[0] as usize, w[1] as usize))
        {
            return false;
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_of_two_triangles() {
        let m = TriangleMesh::new(4, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        assert!(m.adjacent(0, 1));
        assert_eq!(m.neighbors(0).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn grid_interior_triangles_have_three_neighbors() {
        let m = TriangleMesh::grid(4, 1);
        assert_eq!(m.len(), 32);
        let degrees: Vec<usize> = (0..m.len()).map(|t| m.neighbors(t).count()).collect();
        assert!(degrees.iter().all(|&d| (1..=3).contains(&d)));
        assert!(degrees.contains(&3));
        // every interior edge is shared: 3 * T = 2 * interior + boundary (16)
        let interior: usize = degrees.iter().sum::<usize>() / 2;
        assert_eq!(3 * 32, 2 * interior + 16);
    }

    #[test]
    fn text_format_round_trip() {
        let m = TriangleMesh::grid(3, 7);
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = TriangleMesh::read(&buf[..]).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.adjacency, m.adjacency);
    }

    #[test]
    fn malformed_meshes_are_rejected() {
        for text in [
            "",
            "3 1\n0 1\n",
            "3 1\n0 1 5\n",
            "3 2\n0 1 2\n",
            "3 1\n0 0 1\n",
            "4 3\n0 1 2\n0 1 3\n1 0 2\n",
            "3 1\n0 1 2\n0 1 2\n",
        ] {
            assert!(TriangleMesh::read(text.as_bytes()).is_err(), "{text:?}");
        }
    }

    #[test]
    fn verify_rejects_bad_strips() {
        let m = TriangleMesh::grid(2, 3);
        let all: Vec<Vec<u32>> = (0..m.len() as u32).map(|t| vec![t]).collect();
        assert!(verify(&m, &all));
        assert!(!verify(&m, &all[1..]));
        let mut dup = all.clone();
        dup.push(vec![0]);
        assert!(!verify(&m, &dup));
        let far = (1..m.len()).find(|&t| !m.adjacent(0, t)).unwrap();
        let mut bad: Vec<Vec<u32>> = (1..m.len() as u32)
            .filter(|&t| t as usize != far)
            .map(|t| vec![t])
            .collect();
        bad.push(vec![0, far as u32]);
        assert!(!verify(&m, &bad));
    }
}

//! Single-source shortest paths by label-correcting relaxation.
//!
//! Every successful decrease of a tentative distance spawns a task that
//! relaxes the outgoing edges of that node. A task is dead once its node has
//! been reached by a shorter path. Locally the task with the smaller distance
//! runs first; thieves pick by a hash of the node, which spreads them over
//! the graph.

use std::cmp::{Ordering as CmpOrdering, Reverse};
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratsched_core::{Ctx, PriorityContext, Scheduler, Strategy, StrategyHierarchy};

use crate::{execute, mix64, spawn_in, Exec, KernelError, KernelMode, Outcome};

pub const UNREACHED: u64 = u64::MAX;

/// Undirected graph with positive integer edge weights in CSR form.
#[derive(Debug, Clone)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<u32>,
}

impl Graph {
    pub fn from_edges(nodes: usize, edges: &[(u32, u32, u32)]) -> Result<Self, KernelError> {
        let mut degree = vec![0usize; nodes];
        for &(a, b, w) in edges {
            if a as usize >= nodes || b as usize >= nodes {
                return Err(KernelError::InvalidProblem(format!(
                    "edge ({a}, {b}) references a node outside 0..{nodes}"
                )));
            }
            if w == 0 {
                return Err(KernelError::InvalidProblem(format!(
                    "edge ({a}, {b}) has weight 0"
                )));
            }
            degree[a as usize] += 1;
            if a != b {
                degree[b as usize] += 1;
            }
        }
        let mut offsets = vec![0usize; nodes + 1];
        for i in 0..nodes {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets[..nodes].to_vec();
        let mut targets = vec![0u32; offsets[nodes]];
        let mut weights = vec![0u32; offsets[nodes]];
        for &(a, b, w) in edges {
            let mut put = |from: u32, to: u32| {
                let slot = &mut fill[from as usize];
                targets[*slot] = to;
                weights[*slot] = w;
                *slot += 1;
            };
            put(a, b);
            if a != b {
                put(b, a);
            }
        }
        Ok(Graph {
            offsets,
            targets,
            weights,
        })
    }

    /// Random graph: each node pair is joined with probability `density`,
    /// weights uniform in `1..=weight_max`.
    pub fn generate(nodes: usize, density: f64, weight_max: u32, seed: u64) -> Result<Self, KernelError> {
        if !(0.0..=1.0).contains(&density) {
            return Err(KernelError::InvalidProblem(format!(
                "density {density} is outside [0, 1]"
            )));
        }
        if weight_max == 0 {
            return Err(KernelError::InvalidProblem("weight_max must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for a in 0..nodes as u32 {
            for b in a + 1..nodes as u32 {
                if rng.gen_bool(density) {
                    edges.push((a, b, rng.gen_range(1..=weight_max)));
                }
            }
        }
        Self::from_edges(nodes, &edges)
    }

    pub fn nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edges_of(&self, v: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&t, &w)| (t as usize, w as u64))
    }
}

pub struct SsspStrategy {
    dist: u64,
    node: usize,
    steal_key: u64,
    distances: Arc<[AtomicU64]>,
}

impl Strategy for SsspStrategy {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> CmpOrdering {
        if ctx.stealing() {
            self.steal_key.cmp(&other.steal_key)
        } else {
            other.dist.cmp(&self.dist)
        }
    }

    fn dead(&self) -> bool {
        self.distances[self.node].load(Ordering::Acquire) < self.dist
    }
}

pub fn register(h: &mut StrategyHierarchy) {
    h.ensure::<SsspStrategy>();
}

#[derive(Debug, Clone)]
pub struct SsspResult {
    /// Distance from the source, [`UNREACHED`] when there is no path.
    pub distances: Vec<u64>,
    /// Relaxation tasks that ran.
    pub relaxations: u64,
}

struct Relaxer<'g> {
    graph: &'g Graph,
    distances: Arc<[AtomicU64]>,
    relaxations: AtomicU64,
    mode: KernelMode,
}

impl<'g> Relaxer<'g> {
    fn improve(&self, v: usize, d: u64) -> bool {
        self.distances[v].fetch_min(d, Ordering::AcqRel) > d
    }

    fn spawn_node<'env>(&'env self, ctx: &Ctx<'_, 'env>, v: usize, d: u64) {
        spawn_in(
            ctx,
            self.mode,
            || SsspStrategy {
                dist: d,
                node: v,
                steal_key: mix64(v as u64 ^ d.rotate_left(32)),
                distances: Arc::clone(&self.distances),
            },
            move |ctx| self.relax(ctx, v, d),
        );
    }

    fn relax<'env>(&'env self, ctx: &Ctx<'_, 'env>, v: usize, d: u64) {
        if self.distances[v].load(Ordering::Acquire) < d {
            return;
        }
        self.relaxations.fetch_add(1, Ordering::Relaxed);
        for (t, w) in self.graph.edges_of(v) {
            let nd = d + w;
            if self.improve(t, nd) {
                self.spawn_node(ctx, t, nd);
            }
        }
    }
}

/// Shortest distances from `source`.
pub fn run(
    sched: &Scheduler,
    exec: Exec,
    graph: &Graph,
    source: usize,
    mode: KernelMode,
) -> Result<Outcome<SsspResult>, KernelError> {
    if source >= graph.nodes() {
        return Err(KernelError::InvalidProblem(format!(
            "source {source} is outside 0..{}",
            graph.nodes()
        )));
    }
    let relaxer = Relaxer {
        graph,
        distances: (0..graph.nodes()).map(|_| AtomicU64::new(UNREACHED)).collect(),
        relaxations: AtomicU64::new(0),
        mode,
    };
    let r = &relaxer;
    let ((), wall, report) = execute(sched, exec, move |ctx| {
        r.distances[source].store(0, Ordering::Release);
        r.spawn_node(ctx, source, 0);
    });
    Ok(Outcome {
        result: SsspResult {
            distances: relaxer.distances.iter().map(|d| d.load(Ordering::Relaxed)).collect(),
            relaxations: relaxer.relaxations.into_inner(),
        },
        wall,
        metrics: report.metrics,
    })
}

/// Shortest distances by Dijkstra's algorithm.
pub fn dijkstra(graph: &Graph, source: usize) -> Vec<u64> {
    let mut dist = vec![UNREACHED; graph.nodes()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0;
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for (t, w) in graph.edges_of(v) {
            if d + w < dist[t] {
                dist[t] = d + w;
                heap.push(Reverse((d + w, t)));
            }
        }
    }
    dist
}

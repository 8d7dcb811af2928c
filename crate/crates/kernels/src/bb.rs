//! Branch and bound for graph bipartitioning: split the vertices into sets
//! A and B of prescribed sizes with minimum total weight of cut edges.
//!
//! Subproblems are tasks. A task first compares its lower bound with the
//! shared upper bound, then assigns the branching vertex to either side and
//! spawns the two children. The strategy runs the child with the smallest
//! estimate first locally and lets thieves take the children with the
//! largest uncertainty (estimate minus lower bound).

use std::cmp::Ordering as CmpOrdering;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratsched_core::{Ctx, PriorityContext, Scheduler, Strategy, StrategyHierarchy};

use crate::{execute, spawn_in, Exec, KernelError, KernelMode, Outcome};

/// Weighted undirected graph with target set sizes.
#[derive(Debug, Clone)]
pub struct BipartitionProblem {
    n: usize,
    weights: Vec<u64>,
    k1: usize,
    k2: usize,
    // sum of incident edge weights per vertex
    degree: Vec<u64>,
    // 2 * total edge weight / n, at least 1
    avg_contribution: u64,
}

impl BipartitionProblem {
    /// `weights` is the row-major n x n matrix; it must be symmetric with a
    /// zero diagonal. Set A gets `k1` vertices, B the rest.
    pub fn new(n: usize, weights: Vec<u64>, k1: usize) -> Result<Self, KernelError> {
        if weights.len() != n * n {
            return Err(KernelError::InvalidProblem(format!(
                "weight matrix has {} entries, expected {}",
                weights.len(),
                n * n
            )));
        }
        if k1 > n {
            return Err(KernelError::InvalidProblem(format!(
                "set size {k1} exceeds vertex count {n}"
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0 {
                return Err(KernelError::InvalidProblem(format!("self loop at vertex {i}")));
            }
            for j in 0..i {
                if weights[i * n + j] != weights[j * n + i] {
                    return Err(KernelError::InvalidProblem(format!(
                        "asymmetric weight between {i} and {j}"
                    )));
                }
            }
        }
        let degree: Vec<u64> = (0..n).map(|i| weights[i * n..(i + 1) * n].iter().sum()).collect();
        let total: u64 = degree.iter().sum::<u64>() / 2;
        let avg_contribution = if n == 0 { 1 } else { (2 * total / n as u64).max(1) };
        Ok(BipartitionProblem {
            n,
            weights,
            k1,
            k2: n - k1,
            degree,
            avg_contribution,
        })
    }

    /// Random graph: each vertex pair is an edge with probability `density`,
    /// with a weight uniform in `1..=weight_max`. Sets of size floor(n/2) and
    /// ceil(n/2).
    pub fn generate(n: usize, density: f64, weight_max: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0; n * n];
        for i in 0..n {
            for j in 0..i {
                if rng.gen_bool(density.clamp(0.0, 1.0)) {
                    let w = rng.gen_range(1..=weight_max.max(1));
                    weights[i * n + j] = w;
                    weights[j * n + i] = w;
                }
            }
        }
        Self::new(n, weights, n / 2).expect("generated matrix is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.k1, self.k2)
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> u64 {
        self.weights[i * self.n + j]
    }

    /// Cut weight of a full assignment (`true` = set A).
    pub fn cut(&self, in_a: &[bool]) -> u64 {
        let mut cut = 0;
        for i in 0..self.n {
            for j in 0..i {
                if in_a[i] != in_a[j] {
                    cut += self.weight(i, j);
                }
            }
        }
        cut
    }

    /// Check that `in_a` has the right set sizes and cuts `value`.
    pub fn verify(&self, in_a: &[bool], value: u64) -> bool {
        in_a.len() == self.n
            && in_a.iter().filter(|&&a| a).count() == self.k1
            && self.cut(in_a) == value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Free,
    A,
    B,
}

/// Partial assignment with incrementally maintained bound data.
#[derive(Debug, Clone)]
pub struct Subproblem {
    side: Vec<Side>,
    // per vertex: total weight to vertices assigned to A / to B
    to_a: Vec<u64>,
    to_b: Vec<u64>,
    count_a: usize,
    count_b: usize,
    cut: u64,
    lower_bound: u64,
    estimate: u64,
}

impl Subproblem {
    pub fn root(p: &BipartitionProblem) -> Self {
        let mut s = Subproblem {
            side: vec![Side::Free; p.n],
            to_a: vec![0; p.n],
            to_b: vec![0; p.n],
            count_a: 0,
            count_b: 0,
            cut: 0,
            lower_bound: 0,
            estimate: 0,
        };
        s.bound(p);
        s
    }

    pub fn lower_bound(&self) -> u64 {
        self.lower_bound
    }

    pub fn estimate(&self) -> u64 {
        self.estimate
    }

    pub fn free(&self) -> usize {
        self.side.len() - self.count_a - self.count_b
    }

    pub fn is_complete(&self) -> bool {
        self.free() == 0
    }

    /// Assignment so far: `Some(true)` = A, `Some(false)` = B.
    pub fn assignment(&self) -> Vec<Option<bool>> {
        self.side
            .iter()
            .map(|s| match s {
                Side::Free => None,
                Side::A => Some(true),
                Side::B => Some(false),
            })
            .collect()
    }

    /// Assign a free vertex; `to_a` selects the set. Bounds are not updated.
    pub fn assign(&mut self, p: &BipartitionProblem, v: usize, to_a: bool) {
        debug_assert_eq!(self.side[v], Side::Free);
        if to_a {
            self.side[v] = Side::A;
            self.count_a += 1;
            self.cut += self.to_b[v];
            for (u, t) in self.to_a.iter_mut().enumerate() {
                *t += p.weight(v, u);
            }
        } else {
            self.side[v] = Side::B;
            self.count_b += 1;
            self.cut += self.to_a[v];
            for (u, t) in self.to_b.iter_mut().enumerate() {
                *t += p.weight(v, u);
            }
        }
    }

    /// Once a set is full, every free vertex goes to the other one.
    fn force_completion(&mut self, p: &BipartitionProblem) {
        let target = if self.count_a == p.k1 {
            Some(false)
        } else if self.count_b == p.k2 {
            Some(true)
        } else {
            None
        };
        if let Some(to_a) = target {
            for v in 0..p.n {
                if self.side[v] == Side::Free {
                    self.assign(p, v, to_a);
                }
            }
        }
    }

    /// Recompute lower bound and estimate.
    ///
    /// Each free vertex adds at least the cheaper of its two placements with
    /// respect to already assigned vertices; a placement is unavailable once
    /// its set is full. The estimate adds half the difference of the two.
    pub fn bound(&mut self, p: &BipartitionProblem) {
        let a_full = self.count_a >= p.k1;
        let b_full = self.count_b >= p.k2;
        let mut lb = self.cut;
        let mut spread = 0;
        for v in 0..p.n {
            if self.side[v] != Side::Free {
                continue;
            }
            let if_a = self.to_b[v];
            let if_b = self.to_a[v];
            lb += if a_full {
                if_b
            } else if b_full {
                if_a
            } else {
                spread += if_a.abs_diff(if_b);
                if_a.min(if_b)
            };
        }
        self.lower_bound = lb;
        self.estimate = lb + spread / 2;
    }

    /// Free vertex with the largest weight to assigned vertices; ties go to
    /// the larger degree, then the lower index.
    pub fn branch_vertex(&self, p: &BipartitionProblem) -> Option<usize> {
        (0..p.n)
            .filter(|&v| self.side[v] == Side::Free)
            .max_by(|&x, &y| {
                (self.to_a[x] + self.to_b[x], p.degree[x], std::cmp::Reverse(x))
                    .cmp(&(self.to_a[y] + self.to_b[y], p.degree[y], std::cmp::Reverse(y)))
            })
    }
}

/// Estimated remaining search depth: (ub - lb) / average per-vertex
/// contribution, clamped to the number of free vertices.
pub fn estimated_depth(lower_bound: u64, upper_bound: u64, avg_contribution: u64, free: usize) -> u32 {
    let gap = upper_bound.saturating_sub(lower_bound);
    (gap / avg_contribution.max(1)).min(free as u64) as u32
}

/// `2^d - 1`, at least 1.
pub fn subtree_weight(d: u32) -> u64 {
    ((1u64 << d.min(62)) - 1).max(1)
}

/// Strategy of a subproblem task.
pub struct BbStrategy {
    estimate: u64,
    lower_bound: u64,
    weight: u64,
    upper_bound: Arc<AtomicU64>,
}

impl BbStrategy {
    pub fn new(sub: &Subproblem, p: &BipartitionProblem, upper_bound: Arc<AtomicU64>) -> Self {
        let ub = upper_bound.load(Ordering::Relaxed);
        let d = estimated_depth(sub.lower_bound, ub, p.avg_contribution, sub.free());
        BbStrategy {
            estimate: sub.estimate,
            lower_bound: sub.lower_bound,
            weight: subtree_weight(d),
            upper_bound,
        }
    }

    pub fn uncertainty(&self) -> u64 {
        self.estimate - self.lower_bound
    }
}

impl Strategy for BbStrategy {
    fn prioritize(&self, other: &Self, ctx: &PriorityContext<'_>) -> CmpOrdering {
        if ctx.stealing() {
            self.uncertainty().cmp(&other.uncertainty())
        } else {
            other.estimate.cmp(&self.estimate)
        }
    }

    fn transitive_weight(&self) -> u64 {
        self.weight
    }

    fn allow_call_conversion(&self) -> bool {
        true
    }

    fn dead(&self) -> bool {
        self.lower_bound >= self.upper_bound.load(Ordering::Acquire)
    }
}

pub fn register(h: &mut StrategyHierarchy) {
    h.ensure::<BbStrategy>();
}

#[derive(Debug, Clone)]
pub struct BbResult {
    pub cut: u64,
    /// `true` = set A.
    pub partition: Vec<bool>,
    /// Tasks that passed the bound check.
    pub nodes_expanded: u64,
    /// Time of the last improvement of the best known solution.
    pub time_to_optimum: Duration,
}

struct Search<'p> {
    problem: &'p BipartitionProblem,
    mode: KernelMode,
    upper_bound: Arc<AtomicU64>,
    best: Mutex<(u64, Vec<bool>)>,
    expanded: AtomicU64,
    last_improvement: AtomicU64,
    start: Instant,
}

impl<'p> Search<'p> {
    fn offer(&self, sub: &Subproblem) {
        let cut = sub.cut;
        if self.upper_bound.fetch_min(cut, Ordering::AcqRel) <= cut {
            return;
        }
        let mut best = self.best.lock().unwrap_or_else(|e| e.into_inner());
        if cut < best.0 {
            best.0 = cut;
            best.1 = sub.side.iter().map(|&s| s == Side::A).collect();
            self.last_improvement
                .store(self.start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        }
    }

    fn expand<'env>(&'env self, ctx: &Ctx<'_, 'env>, sub: Subproblem) {
        if sub.lower_bound >= self.upper_bound.load(Ordering::Acquire) {
            return;
        }
        self.expanded.fetch_add(1, Ordering::Relaxed);
        let p = self.problem;
        let Some(v) = sub.branch_vertex(p) else {
            self.offer(&sub);
            return;
        };
        let mut children = Vec::with_capacity(2);
        for to_a in [true, false] {
            let room = if to_a { sub.count_a < p.k1 } else { sub.count_b < p.k2 };
            if !room {
                continue;
            }
            let mut child = sub.clone();
            child.assign(p, v, to_a);
            child.force_completion(p);
            if child.is_complete() {
                self.offer(&child);
                continue;
            }
            child.bound(p);
            if child.lower_bound < self.upper_bound.load(Ordering::Acquire) {
                children.push(child);
            }
        }
        for child in children {
            let strategy = BbStrategy::new(&child, p, Arc::clone(&self.upper_bound));
            spawn_in(ctx, self.mode, || strategy, move |ctx| self.expand(ctx, child));
        }
    }
}

/// Solve `problem` exactly.
pub fn solve(
    sched: &Scheduler,
    exec: Exec,
    problem: &BipartitionProblem,
    mode: KernelMode,
) -> Outcome<BbResult> {
    let search = Search {
        problem,
        mode,
        upper_bound: Arc::new(AtomicU64::new(u64::MAX)),
        best: Mutex::new((u64::MAX, Vec::new())),
        expanded: AtomicU64::new(0),
        last_improvement: AtomicU64::new(0),
        start: Instant::now(),
    };
    let mut root = Subproblem::root(problem);
    // with equal set sizes the two sets are interchangeable
    if problem.k1 == problem.k2 && problem.n > 0 {
        let v = root.branch_vertex(problem).expect("non-empty graph");
        root.assign(problem, v, true);
        root.bound(problem);
    }
    let search_ref = &search;
    let ((), wall, report) = execute(sched, exec, move |ctx| {
        if root.is_complete() {
            search_ref.offer(&root);
        } else {
            search_ref.expand(ctx, root);
        }
    });
    let (cut, partition) = search.best.into_inner().unwrap_or_else(|e| e.into_inner());
    Outcome {
        result: BbResult {
            cut,
            partition,
            nodes_expanded: search.expanded.load(Ordering::Relaxed),
            time_to_optimum: Duration::from_nanos(search.last_improvement.load(Ordering::Relaxed)),
        },
        wall,
        metrics: report.metrics,
    }
}

/// Exhaustive optimum over all sets A of size k1. Exponential in n.
pub fn exhaustive_optimum(p: &BipartitionProblem) -> u64 {
    let mut in_a = vec![false; p.n];
    let mut best = u64::MAX;
    fn rec(p: &BipartitionProblem, i: usize, left: usize, in_a: &mut Vec<bool>, best: &mut u64) {
        if left > p.n - i {
            return;
        }
        if i == p.n {
            *best = (*best).min(p.cut(in_a));
            return;
        }
        if left > 0 {
            in_a[i] = true;
            rec(p, i + 1, left - 1, in_a, best);
            in_a[i] = false;
        }
        rec(p, i + 1, left, in_a, best);
    }
    rec(p, 0, p.k1, &mut in_a, &mut best);
    best
}

use std::io::Write;

use stratsched_core::{RunMetrics, Scheduler};
use stratsched_kernels::{
    bb, composed, hierarchy, mix64, prefix, quicksort, sssp, tristrip, uts, Outcome,
};

use crate::{Benchmark, RunRecord, RunSpec};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RunError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Verification(_) => 2,
            _ => 1,
        }
    }
}

/// Problem instance of one seed, with what is needed to check a result.
enum Instance {
    Bb(bb::BipartitionProblem),
    Prefix { input: Vec<u64>, expected: Vec<u64> },
    Uts { expected: u64 },
    Tristrip(tristrip::TriangleMesh),
    Sssp { graph: sssp::Graph, expected: Vec<u64> },
    Quicksort { input: Vec<u64>, expected: Vec<u64> },
    Composed { input: Vec<u64>, expected: Vec<u64>, nodes: u64 },
}

fn prefix_input(n: usize, seed: u64) -> (Vec<u64>, Vec<u64>) {
    let input: Vec<u64> = (0..n as u64).map(|i| mix64(i ^ mix64(seed))).collect();
    let mut expected = input.clone();
    prefix::sequential_prefix_sum(&mut expected);
    (input, expected)
}

fn uts_nodes(spec: &RunSpec) -> u64 {
    let p = spec.params.uts();
    if p == uts::UtsParams::default() {
        uts::DEFAULT_NODES
    } else {
        uts::count_sequential(&p)
    }
}

fn usage<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Usage(e.to_string())
}

impl Instance {
    fn build(spec: &RunSpec, seed: u64, uts_nodes: &mut Option<u64>) -> Result<Self, RunError> {
        let b = spec.benchmark;
        let p = &spec.params;
        let mut nodes = || *uts_nodes.get_or_insert_with(|| self::uts_nodes(spec));
        Ok(match b {
            Benchmark::Bb => {
                let n = p.n(b);
                if n > 40 {
                    return Err(RunError::Usage(format!("bb supports at most 40 vertices, got {n}")));
                }
                Instance::Bb(bb::BipartitionProblem::generate(n, p.density(b), p.weight_max(b), seed))
            }
            Benchmark::Prefix => {
                let (input, expected) = prefix_input(p.n(b), seed);
                Instance::Prefix { input, expected }
            }
            Benchmark::Uts => Instance::Uts { expected: nodes() },
            Benchmark::Tristrip => Instance::Tristrip(tristrip::TriangleMesh::grid(p.grid(), seed)),
            Benchmark::Sssp => {
                let weight_max = u32::try_from(p.weight_max(b)).map_err(usage)?;
                let graph = sssp::Graph::generate(p.n(b), p.density(b), weight_max, seed).map_err(usage)?;
                if graph.nodes() == 0 {
                    return Err(RunError::Usage("sssp needs at least one node".into()));
                }
                let expected = sssp::dijkstra(&graph, 0);
                Instance::Sssp { graph, expected }
            }
            Benchmark::Quicksort => {
                let input = quicksort::generate(p.n(b), seed, true);
                let mut expected = input.clone();
                expected.sort_unstable();
                Instance::Quicksort { input, expected }
            }
            Benchmark::Composed => {
                let (input, expected) = prefix_input(p.n(b), seed);
                Instance::Composed {
                    input,
                    expected,
                    nodes: nodes(),
                }
            }
        })
    }
}

struct Measured {
    wall_ms: f64,
    metrics: RunMetrics,
    time_to_optimum_ms: Option<f64>,
    nodes_expanded: Option<u64>,
    strip_count: Option<u64>,
    second_pass_blocks: Option<u64>,
    verified: &'static str,
}

impl Measured {
    fn from<R>(o: &Outcome<R>, verified: &'static str) -> Self {
        Measured {
            wall_ms: o.wall.as_secs_f64() * 1e3,
            metrics: o.metrics.clone(),
            time_to_optimum_ms: None,
            nodes_expanded: None,
            strip_count: None,
            second_pass_blocks: None,
            verified,
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), RunError> {
    if ok {
        Ok(())
    } else {
        Err(RunError::Verification(what()))
    }
}

fn execute(spec: &RunSpec, sched: &Scheduler, inst: &Instance, seed: u64) -> Result<Measured, RunError> {
    let (mode, exec) = (spec.mode.kernel_mode(), spec.mode.exec());
    let p = &spec.params;
    Ok(match inst {
        Instance::Bb(problem) => {
            let o = bb::solve(sched, exec, problem, mode);
            check(problem.verify(&o.result.partition, o.result.cut), || {
                format!("bb partition does not cut {}", o.result.cut)
            })?;
            if problem.n() <= 16 {
                let best = bb::exhaustive_optimum(problem);
                check(best == o.result.cut, || format!("bb cut {} but optimum is {best}", o.result.cut))?;
            }
            Measured {
                time_to_optimum_ms: Some(o.result.time_to_optimum.as_secs_f64() * 1e3),
                nodes_expanded: Some(o.result.nodes_expanded),
                ..Measured::from(&o, "bb")
            }
        }
        Instance::Prefix { input, expected } => {
            let mut data = input.clone();
            let block = input.len().div_ceil(p.blocks()).max(1);
            let o = prefix::prefix_sum(sched, exec, &mut data, block, mode);
            check(&data == expected, || "prefix sums differ from the sequential scan".into())?;
            Measured {
                second_pass_blocks: Some(o.result.second_pass_blocks as u64),
                ..Measured::from(&o, "prefix")
            }
        }
        Instance::Uts { expected } => {
            let o = uts::run(sched, exec, p.uts(), mode);
            check(o.result == *expected, || format!("uts counted {} nodes, expected {expected}", o.result))?;
            Measured {
                nodes_expanded: Some(o.result),
                ..Measured::from(&o, "uts")
            }
        }
        Instance::Tristrip(mesh) => {
            let o = tristrip::run(sched, exec, mesh, seed, mode);
            check(tristrip::verify(mesh, &o.result.strips), || "strips do not partition the mesh".into())?;
            Measured {
                strip_count: Some(o.result.strip_count() as u64),
                ..Measured::from(&o, "tristrip")
            }
        }
        Instance::Sssp { graph, expected } => {
            let o = sssp::run(sched, exec, graph, 0, mode).map_err(usage)?;
            check(&o.result.distances == expected, || "distances differ from Dijkstra".into())?;
            Measured {
                nodes_expanded: Some(o.result.relaxations),
                ..Measured::from(&o, "sssp")
            }
        }
        Instance::Quicksort { input, expected } => {
            let mut data = input.clone();
            let params = quicksort::QuicksortParams {
                cutoff: p.cutoff(),
                ..Default::default()
            };
            let o = quicksort::run(sched, exec, &mut data, params, mode);
            check(&data == expected, || "output is not the sorted input".into())?;
            Measured::from(&o, "quicksort")
        }
        Instance::Composed { input, expected, nodes } => {
            let mut data = input.clone();
            let block = input.len().div_ceil(p.blocks()).max(1);
            let o = composed::run(sched, exec, &mut data, block, p.uts(), mode);
            check(&data == expected, || "composed prefix sums differ from the sequential scan".into())?;
            check(o.result.uts_nodes == *nodes, || {
                format!("composed uts counted {} nodes, expected {nodes}", o.result.uts_nodes)
            })?;
            Measured {
                nodes_expanded: Some(o.result.uts_nodes),
                second_pass_blocks: Some(o.result.prefix.second_pass_blocks as u64),
                ..Measured::from(&o, "prefix+uts")
            }
        }
    })
}

fn record(spec: &RunSpec, threads: usize, seed: u64, rep: usize, m: Measured) -> Result<RunRecord, RunError> {
    check(m.metrics.conserved(), || {
        format!(
            "task accounting broken: pushes {} != pops {} + steals {} + dead {}",
            m.metrics.pushes, m.metrics.pops, m.metrics.steals, m.metrics.dead_removed
        )
    })?;
    Ok(RunRecord {
        benchmark: spec.benchmark,
        mode: spec.mode,
        threads,
        seed,
        rep,
        wall_ms: m.wall_ms,
        time_to_optimum_ms: m.time_to_optimum_ms,
        nodes_expanded: m.nodes_expanded,
        strip_count: m.strip_count,
        second_pass_blocks: m.second_pass_blocks,
        pushes: m.metrics.pushes,
        pops: m.metrics.pops,
        steals: m.metrics.steals,
        steal_attempts: m.metrics.steal_attempts,
        call_conversions: m.metrics.call_conversions,
        dead_removed: m.metrics.dead_removed,
        verified: m.verified.to_string(),
    })
}

fn scheduler(spec: &RunSpec, threads: usize, seed: u64) -> Result<Scheduler, RunError> {
    if threads == 0 {
        return Err(RunError::Usage("thread count must be positive".into()));
    }
    Scheduler::new(spec.scheduler_config(threads, seed)?, hierarchy()).map_err(usage)
}

/// Run and verify a single (threads, seed, rep) point of `spec`.
pub fn run_one(spec: &RunSpec, threads: usize, seed: u64, rep: usize) -> Result<RunRecord, RunError> {
    let inst = Instance::build(spec, seed, &mut None)?;
    let sched = scheduler(spec, threads, seed)?;
    let m = execute(spec, &sched, &inst, seed)?;
    let threads = if spec.mode == crate::Mode::Oracle { 1 } else { threads };
    record(spec, threads, seed, rep, m)
}

/// Run every point of `spec`, writing CSV rows to `out` as they complete.
/// Stops at the first failure.
pub fn run(spec: &RunSpec, out: impl Write) -> Result<Vec<RunRecord>, RunError> {
    if spec.threads.is_empty() || spec.seeds.is_empty() {
        return Err(RunError::Usage("need at least one thread count and one seed".into()));
    }
    spec.conversion_divisor()?;
    let mut writer = csv::Writer::from_writer(out);
    let mut records = Vec::new();
    let mut uts_nodes = None;
    let threads: Vec<usize> = if spec.mode == crate::Mode::Oracle {
        vec![1]
    } else {
        spec.threads.clone()
    };
    for &seed in &spec.seeds {
        let inst = Instance::build(spec, seed, &mut uts_nodes)?;
        for &t in &threads {
            let sched = scheduler(spec, t, seed)?;
            for rep in 0..spec.reps {
                let m = execute(spec, &sched, &inst, seed)?;
                let r = record(spec, t, seed, rep, m)?;
                writer.serialize(&r)?;
                writer.flush()?;
                records.push(r);
            }
        }
    }
    Ok(records)
}

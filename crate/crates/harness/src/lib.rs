//! Benchmark driver: runs a kernel under a scheduler mode for a list of
//! thread counts, seeds and repetitions, verifies every result and emits
//! one CSV record per run.

mod runner;
mod summary;

pub use runner::{run, run_one, RunError};
pub use summary::{summarize, SummaryRow};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use stratsched_core::{SchedulerConfig, Topology, DEFAULT_CONVERSION_DIVISOR};
use stratsched_kernels::{uts, Exec, KernelMode};

/// Environment variable overriding the call-conversion divisor.
pub const K_ENV: &str = "STRATSCHED_K";

/// Default seed list, shared by every mode so that runs pair up.
pub const DEFAULT_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Bb,
    Prefix,
    Uts,
    Tristrip,
    Sssp,
    Quicksort,
    Composed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Kernel strategies on all threads.
    Strategy,
    /// Root LIFO/FIFO strategy on all threads.
    #[value(name = "lifo_fifo")]
    LifoFifo,
    /// Kernel strategies on a single place.
    Oracle,
}

impl Mode {
    pub fn kernel_mode(self) -> KernelMode {
        match self {
            Mode::Strategy | Mode::Oracle => KernelMode::Strategy,
            Mode::LifoFifo => KernelMode::LifoFifo,
        }
    }

    pub fn exec(self) -> Exec {
        match self {
            Mode::Oracle => Exec::Sequential,
            _ => Exec::Parallel,
        }
    }
}

/// Kernel parameters. `None` selects the benchmark's default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelParams {
    /// Vertices (bb), elements (prefix, quicksort, composed) or nodes (sssp).
    pub n: Option<usize>,
    pub density: Option<f64>,
    pub weight_max: Option<u64>,
    /// Number of prefix-sum blocks.
    pub blocks: Option<usize>,
    pub b0: Option<f64>,
    pub h_max: Option<u32>,
    /// Root seed of the UTS tree.
    pub tree_seed: Option<u64>,
    /// Side of the tristrip grid mesh.
    pub grid: Option<usize>,
    pub cutoff: Option<usize>,
}

impl KernelParams {
    pub fn n(&self, benchmark: Benchmark) -> usize {
        self.n.unwrap_or(match benchmark {
            Benchmark::Bb => 22,
            Benchmark::Prefix | Benchmark::Composed => 1 << 22,
            Benchmark::Sssp => 2000,
            Benchmark::Quicksort => 1_000_000,
            Benchmark::Uts | Benchmark::Tristrip => 0,
        })
    }

    pub fn density(&self, benchmark: Benchmark) -> f64 {
        self.density.unwrap_or(match benchmark {
            Benchmark::Sssp => 0.1,
            _ => 0.5,
        })
    }

    pub fn weight_max(&self, benchmark: Benchmark) -> u64 {
        self.weight_max.unwrap_or(match benchmark {
            Benchmark::Sssp => 1000,
            _ => 10,
        })
    }

    pub fn blocks(&self) -> usize {
        self.blocks.unwrap_or(256).max(1)
    }

    pub fn uts(&self) -> uts::UtsParams {
        let d = uts::UtsParams::default();
        uts::UtsParams {
            b0: self.b0.unwrap_or(d.b0),
            h_max: self.h_max.unwrap_or(d.h_max),
            seed: self.tree_seed.unwrap_or(d.seed),
            m_max: d.m_max,
        }
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(64)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff.unwrap_or(stratsched_kernels::quicksort::DEFAULT_CUTOFF)
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub benchmark: Benchmark,
    pub mode: Mode,
    pub threads: Vec<usize>,
    pub reps: usize,
    pub seeds: Vec<u64>,
    pub topology: Option<Topology>,
    pub params: KernelParams,
    /// Call-conversion divisor; `None` reads [`K_ENV`], then the default.
    pub k: Option<u64>,
    pub csv: Option<PathBuf>,
}

impl RunSpec {
    pub fn new(benchmark: Benchmark, mode: Mode) -> Self {
        RunSpec {
            benchmark,
            mode,
            threads: vec![1],
            reps: 10,
            seeds: DEFAULT_SEEDS.to_vec(),
            topology: None,
            params: KernelParams::default(),
            k: None,
            csv: None,
        }
    }

    /// Divisor from the spec, else from the environment, else the default.
    pub fn conversion_divisor(&self) -> Result<u64, RunError> {
        if let Some(k) = self.k {
            return Ok(k);
        }
        match std::env::var(K_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| RunError::Usage(format!("{K_ENV}={v:?} is not a positive integer"))),
            Err(_) => Ok(DEFAULT_CONVERSION_DIVISOR),
        }
    }

    /// Scheduler configuration for one run. Oracle runs use one place.
    pub fn scheduler_config(&self, threads: usize, seed: u64) -> Result<SchedulerConfig, RunError> {
        let mut config = SchedulerConfig::with_threads(if self.mode == Mode::Oracle { 1 } else { threads });
        config.conversion_divisor = self.conversion_divisor()?;
        config.seed = seed;
        if self.mode != Mode::Oracle {
            config.topology = self.topology.clone();
        }
        Ok(config)
    }
}

/// One CSV row. Columns appear in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: Benchmark,
    pub mode: Mode,
    pub threads: usize,
    pub seed: u64,
    pub rep: usize,
    pub wall_ms: f64,
    pub time_to_optimum_ms: Option<f64>,
    pub nodes_expanded: Option<u64>,
    pub strip_count: Option<u64>,
    pub second_pass_blocks: Option<u64>,
    pub pushes: u64,
    pub pops: u64,
    pub steals: u64,
    pub steal_attempts: u64,
    pub call_conversions: u64,
    pub dead_removed: u64,
    /// Verifiers that accepted the result, joined by `+`.
    pub verified: String,
}

/// Column names of the CSV output.
pub const CSV_COLUMNS: [&str; 17] = [
    "benchmark",
    "mode",
    "threads",
    "seed",
    "rep",
    "wall_ms",
    "time_to_optimum_ms",
    "nodes_expanded",
    "strip_count",
    "second_pass_blocks",
    "pushes",
    "pops",
    "steals",
    "steal_attempts",
    "call_conversions",
    "dead_removed",
    "verified",
];

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stratsched_core::Topology;
use stratsched_harness::{
    run, summarize, Benchmark, KernelParams, Mode, RunError, RunSpec, DEFAULT_SEEDS,
};

/// Run the strategy scheduler benchmarks and summarize their CSV output.
#[derive(Parser)]
#[command(name = "stratsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark and write one CSV row per run.
    Run(RunArgs),
    /// Medians and means per (benchmark, mode, threads) of a CSV file.
    Summarize {
        /// CSV written by `run`; `-` reads standard input.
        csv: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    benchmark: Benchmark,
    #[arg(long, value_enum, default_value = "strategy")]
    mode: Mode,
    /// Thread counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Problem seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Machine tree fanouts from the root, e.g. 2x4.
    #[arg(long)]
    topology: Option<Topology>,
    /// Output file; standard output if absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Vertices (bb), elements (prefix, quicksort, composed) or nodes (sssp).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    weight_max: Option<u64>,
    /// Prefix-sum block count.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long)]
    hmax: Option<u32>,
    /// Root seed of the UTS tree.
    #[arg(long)]
    tree_seed: Option<u64>,
    /// Grid side of the tristrip mesh.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    cutoff: Option<usize>,
    /// Call-conversion divisor; overrides STRATSCHED_K.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
}

impl RunArgs {
    fn spec(self) -> RunSpec {
        RunSpec {
            benchmark: self.benchmark,
            mode: self.mode,
            threads: self.threads,
            reps: self.reps,
            seeds: self.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec()),
            topology: self.topology,
            params: KernelParams {
                n: self.n,
                density: self.density,
                weight_max: self.weight_max,
                blocks: self.blocks,
                b0: self.b0,
                h_max: self.hmax,
                tree_seed: self.tree_seed,
                grid: self.grid,
                cutoff: self.cutoff,
            },
            k: self.k,
            csv: self.csv,
        }
    }
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run(args) => {
            let spec = args.spec();
            match &spec.csv {
                Some(path) => run(&spec, File::create(path)?)?,
                None => run(&spec, io::stdout().lock())?,
            };
        }
        Command::Summarize { csv } => {
            let rows = if csv.as_os_str() == "-" {
                summarize(io::stdin().lock())?
            } else {
                summarize(BufReader::new(File::open(&csv)?))?
            };
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "stratsched: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line entry point.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::SnapError;
use crate::harness::bench::{memory_report, run_benchmark_specs, selected_variants, write_reports};
use crate::harness::config::{default_workers, BenchConfig, NeighborMode, OutputFormat};
use crate::harness::generate::generate_problem;
use crate::harness::io::{read_problem, write_problem};
use crate::oracle::checks::verify_suite;
use crate::variants::spec::DEFAULT_TILE;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "snapforge", version, about = "Bispectrum force pipeline variants and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated problem as JSON.
    Gen(GenArgs),
    /// Benchmark one variant.
    Run(RunArgs),
    /// Benchmark every variant.
    Sweep(RunArgs),
    /// Run the oracle checks.
    Verify(VerifyArgs),
    /// Report analytic per-array bytes.
    Mem(MemArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Synthetic,
    Periodic,
    Cluster,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    #[arg(long, default_value_t = 2000)]
    natoms: usize,
    /// Target neighbors per atom.
    #[arg(long, default_value_t = 26)]
    nnbor: usize,
    #[arg(long, default_value_t = 8)]
    twojmax: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Synthetic)]
    neighbors: ModeArg,
    /// Exactly `nnbor` fabricated neighbors per atom (the default mode).
    #[arg(long, conflicts_with = "neighbors")]
    synthetic_neighbors: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Problem JSON to load instead of generating one.
    #[arg(long)]
    problem_file: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long)]
    variant: Vec<String>,
    #[arg(long, env = "SNAPFORGE_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value_t = DEFAULT_TILE)]
    tile: usize,
    /// Abort before allocating more than this many bytes.
    #[arg(long)]
    memory_budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 4)]
    twojmax: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "SNAPFORGE_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Args)]
struct MemArgs {
    #[arg(long, default_value_t = 2000)]
    natoms: usize,
    #[arg(long, default_value_t = 26)]
    nnbor: usize,
    #[arg(long, default_value_t = 8)]
    twojmax: u32,
    #[arg(long)]
    variant: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_TILE)]
    tile: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

impl ProblemArgs {
    fn config(&self) -> BenchConfig {
        BenchConfig {
            natoms: self.natoms,
            nnbor: self.nnbor,
            twojmax: self.twojmax,
            seed: self.seed,
            neighbor_mode: if self.synthetic_neighbors {
                NeighborMode::Synthetic
            } else {
                match self.neighbors {
                    ModeArg::Synthetic => NeighborMode::Synthetic,
                    ModeArg::Periodic => NeighborMode::Periodic,
                    ModeArg::Cluster => NeighborMode::Cluster,
                }
            },
            ..BenchConfig::default()
        }
    }
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

enum Failure {
    Usage(String),
    Verify,
    Runtime(String),
}

impl From<SnapError> for Failure {
    fn from(e: SnapError) -> Self {
        match e {
            SnapError::UnknownVariant(_)
            | SnapError::InvalidConfig(_)
            | SnapError::InvalidCutoff { .. }
            | SnapError::InvalidRfac0(_)
            | SnapError::BandLimit { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn run_cmd(args: &RunArgs, sweep: bool) -> Result<(), Failure> {
    let mut config = BenchConfig {
        steps: args.steps,
        variants: args.variant.clone(),
        workers: args.workers.unwrap_or_else(default_workers),
        deterministic: args.deterministic,
        tile: args.tile,
        memory_budget: args.memory_budget,
        out: args.out.clone(),
        format: args.format.into(),
        ..args.problem.config()
    };
    if !sweep && config.variants.len() != 1 {
        return Err(Failure::Usage("`run` needs exactly one --variant".into()));
    }
    let problem = match &args.problem_file {
        Some(p) => read_problem(p)?,
        None => {
            config.validate()?;
            generate_problem(&config)?
        }
    };
    config.natoms = problem.natoms();
    config.twojmax = problem.twojmax().get();
    config.validate()?;
    let specs = selected_variants(&config)?;
    let reports = run_benchmark_specs(&config, &problem, &specs)?;
    let mut w = sink(&config.out)?;
    write_reports(&reports, config.format, &mut w)?;
    w.flush()?;
    Ok(())
}

fn verify_cmd(args: &VerifyArgs) -> Result<(), Failure> {
    let workers = args.workers.unwrap_or_else(default_workers);
    let results = verify_suite(args.twojmax, args.seed, workers)?;
    let mut w = sink(&args.out)?;
    match args.format {
        Some(FormatArg::Json) => {
            serde_json::to_writer_pretty(&mut w, &results).map_err(|e| Failure::Runtime(e.to_string()))?;
            writeln!(w)?;
        }
        _ => {
            for r in &results {
                writeln!(w, "{}", r.line())?;
            }
        }
    }
    w.flush()?;
    if results.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn mem_cmd(args: &MemArgs) -> Result<(), Failure> {
    let config = BenchConfig {
        natoms: args.natoms,
        nnbor: args.nnbor,
        twojmax: args.twojmax,
        variants: args.variant.clone(),
        tile: args.tile,
        ..BenchConfig::default()
    };
    config.validate()?;
    let reports = selected_variants(&config)?
        .iter()
        .map(|v| memory_report(&config, v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = sink(&args.out)?;
    match args.format {
        FormatArg::Json => {
            serde_json::to_writer_pretty(&mut w, &reports).map_err(|e| Failure::Runtime(e.to_string()))?;
            writeln!(w)?;
        }
        FormatArg::Csv => {
            let mut wr = csv::Writer::from_writer(&mut w);
            wr.write_record(["variant", "array", "bytes"]).map_err(SnapError::from)?;
            for r in &reports {
                for a in &r.arrays {
                    wr.write_record([r.variant.as_str(), a.name.as_str(), &a.logical.to_string()])
                        .map_err(SnapError::from)?;
                }
                wr.write_record([r.variant.as_str(), "total", &r.total.to_string()])
                    .map_err(SnapError::from)?;
            }
            wr.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

fn gen_cmd(args: &GenArgs) -> Result<(), Failure> {
    let problem = generate_problem(&args.problem.config())?;
    match &args.out {
        Some(p) => write_problem(&problem, p)?,
        None => println!("{}", crate::harness::io::problem_to_json(&problem)?),
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &parsed.command {
        Command::Gen(a) => gen_cmd(a),
        Command::Run(a) => run_cmd(a, false),
        Command::Sweep(a) => run_cmd(a, true),
        Command::Verify(a) => verify_cmd(a),
        Command::Mem(a) => mem_cmd(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Verify) => {
            eprintln!("verification failed");
            EXIT_VERIFY
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

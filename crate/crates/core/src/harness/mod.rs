//! Problem generation, benchmarking and the command-line interface.

pub mod bench;
pub mod cli;
pub mod config;
pub mod generate;
pub mod io;

pub use bench::{memory_report, run_benchmark, MemoryReport, RunReport};
pub use config::{BenchConfig, NeighborMode, OutputFormat};
pub use generate::{build_neighborlist, generate_problem};

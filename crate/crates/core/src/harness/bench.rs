//! Timed variant sweeps and analytic memory reports.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::halfint::{HalfIntIndexMaps, TwoJ};
use crate::harness::config::{BenchConfig, OutputFormat};
use crate::harness::generate::generate_problem;
use crate::snap::problem::Problem;
use crate::snap::state::ArrayBytes;
use crate::tolerances::SPEEDUP_NOISE;
use crate::variants::pipeline::{array_plan, Pipeline, PipelineOptions, RunMode, StageTiming};
use crate::variants::spec::{builtin_variants_with_tile, VariantSpec};

pub const BASELINE: &str = "baseline-z";

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub variant: String,
    pub natoms: usize,
    pub nnbor: usize,
    pub twojmax: u32,
    pub steps: usize,
    pub wall_ms_per_step: f64,
    pub katom_steps_per_s: f64,
    pub speedup_vs_baseline: Option<f64>,
    pub peak_bytes_total: u64,
    pub force_checksum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub row: CsvRow,
    pub energy_total: f64,
    /// Set when a spec-identical variant in the same sweep timed more than
    /// the noise band apart.
    pub unstable: bool,
    pub step_ms: Vec<f64>,
    pub stages: Vec<StageTiming>,
    pub arrays: Vec<ArrayBytes>,
}

/// Grind speed in thousands of atom-steps per second.
pub fn grind_speed(natoms: usize, steps: usize, seconds: f64) -> f64 {
    natoms as f64 * steps as f64 / seconds / 1000.0
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Specs named by the config, or the whole ladder when none are named.
pub fn selected_variants(config: &BenchConfig) -> Result<Vec<VariantSpec>> {
    let all = builtin_variants_with_tile(config.tile);
    if config.variants.is_empty() {
        return Ok(all);
    }
    config
        .variants
        .iter()
        .map(|n| {
            all.iter()
                .find(|v| &v.name == n)
                .cloned()
                .ok_or_else(|| SnapError::UnknownVariant(n.clone()))
        })
        .collect()
}

pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<RunReport>> {
    config.validate()?;
    let problem = generate_problem(config)?;
    let specs = selected_variants(config)?;
    run_benchmark_specs(config, &problem, &specs)
}

fn same_strategy(a: &VariantSpec, b: &VariantSpec) -> bool {
    VariantSpec {
        name: String::new(),
        ..a.clone()
    } == VariantSpec {
        name: String::new(),
        ..b.clone()
    }
}

/// Times each spec on `problem`: one untimed warm-up, then the median of
/// `config.steps` repetitions.
pub fn run_benchmark_specs(
    config: &BenchConfig,
    problem: &Problem,
    specs: &[VariantSpec],
) -> Result<Vec<RunReport>> {
    let pipeline = Pipeline::new(&problem.params, config.workers)?;
    let opts = PipelineOptions {
        mode: if config.deterministic {
            RunMode::Deterministic
        } else {
            RunMode::Benchmark
        },
        memory_budget: config.memory_budget,
        check_residue: false,
    };
    let mut reports = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut last = pipeline.run(problem, spec, opts)?;
        let mut step_ms = Vec::with_capacity(config.steps);
        for _ in 0..config.steps {
            let t0 = Instant::now();
            last = pipeline.run(problem, spec, opts)?;
            step_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        let ms = median(&step_ms);
        reports.push(RunReport {
            row: CsvRow {
                variant: spec.name.clone(),
                natoms: problem.natoms(),
                nnbor: config.nnbor,
                twojmax: problem.twojmax().get(),
                steps: config.steps,
                wall_ms_per_step: ms,
                katom_steps_per_s: grind_speed(problem.natoms(), 1, ms / 1e3),
                speedup_vs_baseline: None,
                peak_bytes_total: last.peak_bytes_total,
                force_checksum: last.force_checksum,
            },
            energy_total: last.energy_total,
            unstable: false,
            step_ms,
            stages: last.stages,
            arrays: last.arrays,
        });
    }
    if let Some(base) = reports.iter().find(|r| r.row.variant == BASELINE).map(|r| r.row.wall_ms_per_step) {
        for r in &mut reports {
            r.row.speedup_vs_baseline = Some(base / r.row.wall_ms_per_step);
        }
    }
    for i in 0..specs.len() {
        for j in 0..specs.len() {
            if i != j && same_strategy(&specs[i], &specs[j]) {
                let ratio = reports[j].row.wall_ms_per_step / reports[i].row.wall_ms_per_step;
                if (ratio - 1.0).abs() > SPEEDUP_NOISE {
                    reports[i].unstable = true;
                }
            }
        }
    }
    Ok(reports)
}

pub fn write_csv<W: Write>(reports: &[RunReport], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        wr.serialize(&r.row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(reports: &[RunReport], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, reports)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_reports<W: Write>(reports: &[RunReport], format: OutputFormat, w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(reports, w),
        OutputFormat::Json => write_json(reports, w),
    }
}

/// Per-array bytes of one variant for the config's nominal extents
/// (`natoms * nnbor` pairs), without allocating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub variant: String,
    pub natoms: usize,
    pub nnbor: usize,
    pub twojmax: u32,
    pub arrays: Vec<ArrayBytes>,
    pub total: u64,
}

impl MemoryReport {
    pub fn bytes(&self, name: &str) -> Option<u64> {
        self.arrays.iter().find(|a| a.name == name).map(|a| a.logical)
    }
}

pub fn memory_report(config: &BenchConfig, variant: &VariantSpec) -> Result<MemoryReport> {
    let maps = HalfIntIndexMaps::new(TwoJ(config.twojmax));
    let arrays = array_plan(
        &maps,
        variant,
        config.natoms,
        config.natoms * config.nnbor,
        config.nnbor,
    )?;
    let total = arrays.iter().map(|a| a.logical).sum();
    Ok(MemoryReport {
        variant: variant.name.clone(),
        natoms: config.natoms,
        nnbor: config.nnbor,
        twojmax: config.twojmax,
        arrays,
        total,
    })
}

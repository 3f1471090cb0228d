//! Runs one variant end to end on a problem.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::halfint::HalfIntIndexMaps;
use crate::snap::problem::{Problem, SnapParams};
use crate::snap::stages::{self, Reduction, USource};
use crate::snap::state::{ArrayBytes, DescriptorState};
use crate::snap::SnapContext;
use crate::tolerances::B_IMAG_RESIDUE;
use crate::variants::layout::{ArrayLayout, ComplexArray, LayoutView, PairArray, PairOrder};
use crate::variants::spec::{Accumulation, Formulation, ParallelAxes, VariantSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Fixed reduction order; concurrent adds are replaced by owner-computes.
    Deterministic,
    /// Accumulation strategies as declared by the variant.
    Benchmark,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub mode: RunMode,
    /// Upper bound on the summed logical bytes of all arrays.
    pub memory_budget: Option<u64>,
    pub check_residue: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            mode: RunMode::Deterministic,
            memory_budget: None,
            check_residue: false,
        }
    }
}

impl PipelineOptions {
    pub fn benchmark() -> Self {
        Self {
            mode: RunMode::Benchmark,
            ..Self::default()
        }
    }
}

/// Wall time and analytic counters of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub ms: f64,
    pub flops: u64,
    /// Estimated bytes loaded plus stored.
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub variant: String,
    pub forces: Vec<[f64; 3]>,
    pub energy_per_atom: Vec<f64>,
    pub energy_total: f64,
    pub blist: Vec<f64>,
    pub delist: Vec<[f64; 3]>,
    pub stages: Vec<StageTiming>,
    pub arrays: Vec<ArrayBytes>,
    pub peak_bytes_total: u64,
    pub force_checksum: f64,
}

impl RunOutput {
    pub fn wall_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.ms).sum()
    }
}

/// Sum of absolute force components in atom order.
pub fn force_checksum(forces: &[[f64; 3]]) -> f64 {
    forces.iter().flatten().map(|v| v.abs()).sum()
}

/// Analytic per-array logical bytes of a variant, without allocating.
pub fn array_plan(
    maps: &HalfIntIndexMaps,
    variant: &VariantSpec,
    natoms: usize,
    npairs: usize,
    max_neighbors: usize,
) -> Result<Vec<ArrayBytes>> {
    let full = maps.u_full_len();
    let half = maps.u_half_len();
    let nb = maps.n_bispectrum();
    let complex = |nidx: usize, layout: ArrayLayout| -> Result<u64> {
        Ok(LayoutView::new(natoms, nidx, layout)?.physical_len() as u64 * 8)
    };
    let rows = match variant.index_order {
        PairOrder::NeighborFastest => npairs,
        PairOrder::AtomFastest => natoms * max_neighbors,
    } as u64;
    let mut plan = Vec::new();
    let mut push = |name: &str, b: u64| plan.push(ArrayBytes::new(name, b, b));
    let tot_len = if variant.half_symmetry { half } else { full };
    push("ulisttot", complex(tot_len, variant.ulisttot_accum)?);
    if variant.transpose_before_y {
        push("ulisttot_read", complex(full, variant.ulisttot_read)?);
    }
    if variant.materialize.ulist {
        push("ulist", rows * full as u64 * 16);
    }
    if variant.materialize.zlist {
        push("zlist", complex(maps.z_len(), ArrayLayout::IndexFastest)?);
    }
    push("blist", (natoms * nb * 8) as u64);
    if variant.formulation == Formulation::Adjoint {
        push("ylist", complex(half, variant.ylist)?);
    }
    if variant.materialize.dulist {
        push("dulist", rows * 3 * full as u64 * 16);
    }
    push("delist", npairs as u64 * 24);
    push("forces", natoms as u64 * 24);
    Ok(plan)
}

struct Costs {
    z_flops_per_atom: u64,
}

impl Costs {
    fn new(maps: &HalfIntIndexMaps) -> Self {
        let z = maps
            .z_entries()
            .iter()
            .map(|e| e.nrow as u64 * (8 * e.ncol as u64 + 2))
            .sum();
        Self { z_flops_per_atom: z }
    }
}

/// A worker pool plus the precomputed tables for one parameter set.
pub struct Pipeline {
    ctx: SnapContext,
    params: SnapParams,
    pool: rayon::ThreadPool,
    serial: rayon::ThreadPool,
    workers: usize,
    costs: Costs,
}

struct Recorder {
    stages: Vec<StageTiming>,
}

impl Recorder {
    fn time<T>(&mut self, name: &str, flops: u64, bytes: u64, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            name: name.to_string(),
            ms: t0.elapsed().as_secs_f64() * 1e3,
            flops,
            bytes,
        });
        out
    }
}

impl Pipeline {
    pub fn new(params: &SnapParams, workers: usize) -> Result<Self> {
        let ctx = SnapContext::new(params)?;
        let build = |n: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SnapError::InvalidConfig(format!("worker pool: {e}")))
        };
        let workers = workers.max(1);
        let costs = Costs::new(&ctx.maps);
        Ok(Self {
            pool: build(workers)?,
            serial: build(1)?,
            ctx,
            params: params.clone(),
            workers,
            costs,
        })
    }

    pub fn context(&self) -> &SnapContext {
        &self.ctx
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn run(&self, problem: &Problem, variant: &VariantSpec, opts: PipelineOptions) -> Result<RunOutput> {
        self.run_with_state(problem, variant, opts).map(|(o, _)| o)
    }

    pub fn run_with_state(
        &self,
        problem: &Problem,
        variant: &VariantSpec,
        opts: PipelineOptions,
    ) -> Result<(RunOutput, DescriptorState)> {
        variant.validate()?;
        if problem.params != self.params {
            return Err(SnapError::InvalidConfig(
                "problem parameters differ from the pipeline's".into(),
            ));
        }
        let plan = array_plan(
            &self.ctx.maps,
            variant,
            problem.natoms(),
            problem.npairs(),
            problem.neighbors.max_count(),
        )?;
        if let Some(budget) = opts.memory_budget {
            let mut total = 0;
            for a in &plan {
                total += a.logical;
                if total > budget {
                    return Err(SnapError::MemoryBudget {
                        array: a.name.clone(),
                        required: total,
                        budget,
                    });
                }
            }
        }
        let reduction = match (variant.accumulation, opts.mode) {
            (Accumulation::ConcurrentRmw, RunMode::Benchmark) => Reduction::Concurrent,
            _ => Reduction::Ordered,
        };
        let pool = if variant.accumulation == Accumulation::Serialized {
            &self.serial
        } else {
            &self.pool
        };
        let mut rec = Recorder { stages: Vec::new() };
        let state = pool.install(|| match variant.formulation {
            Formulation::Baseline => self.baseline(problem, variant, &mut rec),
            Formulation::Adjoint => self.adjoint(problem, variant, reduction, opts, &mut rec),
        })?;
        let (energy_per_atom, energy_total) =
            rec.time("energy", (problem.natoms() * self.ctx.n_bispectrum() * 2) as u64, 0, || {
                stages::compute_energy(&state.blist, &problem.params.beta)
            })?;
        let arrays = state.array_bytes();
        let peak_bytes_total = arrays.iter().map(|a| a.logical).sum();
        let output = RunOutput {
            variant: variant.name.clone(),
            force_checksum: force_checksum(&state.forces),
            forces: state.forces.clone(),
            energy_per_atom,
            energy_total,
            blist: state.blist.clone(),
            delist: state.delist.clone(),
            stages: rec.stages,
            arrays,
            peak_bytes_total,
        };
        Ok((output, state))
    }

    fn baseline(&self, problem: &Problem, variant: &VariantSpec, rec: &mut Recorder) -> Result<DescriptorState> {
        let ctx = &self.ctx;
        let (n, np) = (problem.natoms(), problem.npairs());
        let full = ctx.u_full_len();
        let nb = ctx.n_bispectrum();
        let uview = LayoutView::new(n, full, variant.ulisttot_accum)?;
        let zview = LayoutView::new(n, ctx.maps.z_len(), ArrayLayout::IndexFastest)?;
        let mut ulisttot = ComplexArray::zeros(uview, variant.aligned_complex);
        let mut zlist = ComplexArray::zeros(zview, variant.aligned_complex);
        let mut blist = vec![0.0; n * nb];
        let mut delist = vec![[0.0; 3]; np];
        let z = self.costs.z_flops_per_atom;
        let db_flops = 3 * 3 * nb as u64 * 4 * full as u64;
        let flops = np as u64 * (12 + 4 + 3 * 20) * full as u64
            + n as u64 * 2 * z
            + np as u64 * db_flops;
        let bytes = (n * (full + ctx.maps.z_len()) * 16 * 2 + np * 3 * nb * 8) as u64;
        rec.time("baseline_atoms", flops, bytes, || {
            stages::baseline_atoms(ctx, problem, &mut ulisttot, &mut zlist, &mut blist, &mut delist)
        })?;
        let forces = rec.time("forces", np as u64 * 6, np as u64 * 24 * 3, || {
            stages::assemble_forces(problem, &delist, Reduction::Ordered)
        });
        Ok(DescriptorState {
            ulisttot: Some(ulisttot),
            ulisttot_half: false,
            zlist: Some(zlist),
            blist,
            delist,
            forces,
            ..Default::default()
        })
    }

    fn adjoint(
        &self,
        problem: &Problem,
        variant: &VariantSpec,
        reduction: Reduction,
        opts: PipelineOptions,
        rec: &mut Recorder,
    ) -> Result<DescriptorState> {
        let ctx = &self.ctx;
        let (n, np) = (problem.natoms() as u64, problem.npairs() as u64);
        let full = ctx.u_full_len();
        let half = variant.half_symmetry;
        let tot_len = ctx.maps.u_len(half);
        let aligned = variant.aligned_complex;
        let mut state = DescriptorState {
            ulisttot_half: half,
            ..Default::default()
        };
        let u_flops = np * 12 * full as u64;

        if variant.materialize.ulist {
            let ul = rec.time("compute_u", u_flops, np * full as u64 * 16, || {
                stages::compute_ulist(ctx, problem, variant.index_order)
            })?;
            state.ulist = Some(ul);
        }
        let source = match &state.ulist {
            Some(ul) => USource::Stored(ul),
            None => USource::Recompute,
        };
        let acc_reduction = if variant.parallel_axes == ParallelAxes::Atoms {
            Reduction::Ordered
        } else {
            reduction
        };
        let mut tot = ComplexArray::zeros(LayoutView::new(problem.natoms(), tot_len, variant.ulisttot_accum)?, aligned);
        let recompute = if state.ulist.is_none() { u_flops } else { 0 };
        rec.time(
            "accumulate_ulisttot",
            recompute + np * 4 * tot_len as u64,
            (np * full as u64 + n * tot_len as u64) * 16,
            || stages::accumulate_ulisttot(ctx, problem, source, half, acc_reduction, &mut tot),
        )?;
        if variant.transpose_before_y {
            let read = rec.time("transpose", 0, n * (tot_len + full) as u64 * 16, || {
                stages::transpose_ulisttot(ctx, &tot, half, variant.ulisttot_read, aligned)
            })?;
            state.ulisttot_read = Some(read);
        }
        state.ulisttot = Some(tot);
        let read = state
            .ulisttot_read
            .as_ref()
            .or(state.ulisttot.as_ref())
            .expect("totals");

        if opts.check_residue {
            let (res, atom, comp) = stages::bispectrum_imag_residue(ctx, read);
            if res > B_IMAG_RESIDUE {
                return Err(SnapError::ImaginaryResidue {
                    atom,
                    component: comp,
                    residue: res,
                });
            }
        }

        let nh = ctx.u_half_len();
        let mut ylist = ComplexArray::zeros(LayoutView::new(problem.natoms(), nh, variant.ylist)?, aligned);
        let mut blist = vec![0.0; problem.natoms() * ctx.n_bispectrum()];
        let z = self.costs.z_flops_per_atom;
        let y_bytes = n * (full + nh) as u64 * 16;
        if variant.ylist.tile().is_some() {
            rec.time("compute_y", n * z * 2, y_bytes, || {
                stages::compute_y_tiles(ctx, read, &mut ylist, &mut blist)
            });
        } else if variant.parallel_axes == ParallelAxes::AtomsNeighborsIndex {
            rec.time("compute_y", n * z * 3, y_bytes, || {
                stages::compute_y_gather(ctx, read, &mut ylist, &mut blist)
            });
        } else {
            rec.time("compute_y", n * z * 2, y_bytes, || {
                stages::compute_y_scatter(ctx, read, &mut ylist, &mut blist)
            });
        }

        let mut delist = vec![[0.0; 3]; problem.npairs()];
        let passes: Vec<Vec<usize>> = if variant.du_fission_per_direction {
            vec![vec![0], vec![1], vec![2]]
        } else {
            vec![vec![0, 1, 2]]
        };
        let names = ["_x", "_y", "_z"];
        let label = |base: &str, dirs: &[usize]| -> String {
            if dirs.len() == 1 {
                format!("{base}{}", names[dirs[0]])
            } else {
                base.to_string()
            }
        };
        let du_flops = |k: usize| np * 20 * full as u64 * k as u64;
        let de_flops = |k: usize| np * 4 * full as u64 * k as u64;
        if variant.fuse_du_with_force {
            for dirs in &passes {
                rec.time(
                    &label("fused_de", dirs),
                    u_flops + du_flops(dirs.len()) + de_flops(dirs.len()),
                    np * (nh as u64 * 16 + 8 * dirs.len() as u64),
                    || stages::compute_fused_de(ctx, problem, &ylist, dirs, &mut delist),
                )?;
            }
        } else {
            let ul = state.ulist.as_ref().expect("staged dU reads Ulist");
            let mut dulist = PairArray::zeros(problem, variant.index_order, 3 * full);
            for dirs in &passes {
                rec.time(
                    &label("compute_du", dirs),
                    du_flops(dirs.len()),
                    np * (1 + dirs.len() as u64) * full as u64 * 16,
                    || stages::compute_dulist(ctx, problem, ul, dirs, &mut dulist),
                )?;
            }
            for dirs in &passes {
                rec.time(
                    &label("compute_de", dirs),
                    de_flops(dirs.len()),
                    np * dirs.len() as u64 * (full + nh) as u64 * 16,
                    || stages::contract_dulist(ctx, problem, &dulist, &ylist, dirs, &mut delist),
                );
            }
            state.dulist = Some(dulist);
        }
        let forces = rec.time("forces", np * 6, np * 24 * 3, || {
            stages::assemble_forces(problem, &delist, reduction)
        });
        state.ylist = Some(ylist);
        state.blist = blist;
        state.delist = delist;
        state.forces = forces;
        Ok(state)
    }
}

/// Builds a pipeline for the problem's parameters and runs one variant.
pub fn run_pipeline(
    problem: &Problem,
    variant: &VariantSpec,
    workers: usize,
    opts: PipelineOptions,
) -> Result<RunOutput> {
    Pipeline::new(&problem.params, workers)?.run(problem, variant, opts)
}

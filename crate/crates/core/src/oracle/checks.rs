//! Property checks and the default verification suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angular::{compute_cg_table, map_to_3sphere, BlockStorage, compute_u_matrices};
use crate::error::{Result, SnapError};
use crate::halfint::{HalfIntIndexMaps, TwoJ};
use crate::harness::config::{BenchConfig, NeighborMode};
use crate::harness::generate::{generate_problem, rebuild_neighbors};
use crate::oracle::energy::{oracle_bispectrum, oracle_energy, oracle_triples};
use crate::oracle::wigner::{clebsch_gordan, wigner_direct, ORACLE_MAX_TWOJ};
use crate::snap::problem::Problem;
use crate::tolerances::{
    flatten3, rel_max_diff, ABS_FLOOR, CROSS_PIPELINE, FD_GRADIENT, FD_STEP_FRACTION,
    NEWTON_SUM, ROTATION_INVARIANCE, UNITARITY, VARIANT_DETERMINISTIC, VARIANT_PHYSICS,
    WIGNER_DIRECT,
};
use crate::variants::pipeline::{Pipeline, PipelineOptions, RunMode};
use crate::variants::spec::{builtin_variants, find_variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub context: String,
}

impl CheckResult {
    pub fn new(name: &str, max_rel_error: f64, tolerance: f64, context: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            max_rel_error,
            tolerance,
            pass: max_rel_error <= tolerance,
            context: context.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<22} err={:.3e} tol={:.1e} [{}]",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.max_rel_error,
            self.tolerance,
            self.context
        )
    }
}

/// Copy of `problem` with new positions and freshly built neighbor lists.
pub fn with_positions(problem: &Problem, positions: Vec<[f64; 3]>) -> Result<Problem> {
    let nl = rebuild_neighbors(problem, &positions)?;
    Problem::new(
        positions,
        problem.types.clone(),
        problem.box_length,
        problem.geometry,
        nl,
        problem.params.clone(),
        problem.seed,
    )
}

/// `-dE/dx` by central differences of `energy`, moving one coordinate at a time.
pub fn finite_difference_forces_with(
    problem: &Problem,
    h: f64,
    energy: &dyn Fn(&Problem) -> Result<f64>,
) -> Result<Vec<[f64; 3]>> {
    if !(h > 0.0) {
        return Err(SnapError::InvalidConfig("finite-difference step must be positive".into()));
    }
    if problem.natoms() > 64 {
        return Err(SnapError::InvalidConfig(format!(
            "finite differences are limited to 64 atoms, got {}",
            problem.natoms()
        )));
    }
    let mut forces = vec![[0.0; 3]; problem.natoms()];
    for a in 0..problem.natoms() {
        for k in 0..3 {
            let mut plus = problem.positions.clone();
            let mut minus = problem.positions.clone();
            plus[a][k] += h;
            minus[a][k] -= h;
            let ep = energy(&with_positions(problem, plus)?)?;
            let em = energy(&with_positions(problem, minus)?)?;
            forces[a][k] = -(ep - em) / (2.0 * h);
        }
    }
    Ok(forces)
}

/// Central-difference forces of the closed-form oracle energy.
pub fn finite_difference_forces(problem: &Problem, h: f64) -> Result<Vec<[f64; 3]>> {
    finite_difference_forces_with(problem, h, &|p| oracle_energy(p).map(|e| e.1))
}

pub fn random_rotation(seed: u64) -> [[f64; 3]; 3] {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let q = loop {
        let q: [f64; 4] = [
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
        ];
        let n2: f64 = q.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            break [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        }
    };
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn rotate(m: &[[f64; 3]; 3], d: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2],
        m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2],
        m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2],
    ]
}

fn blist(pipeline: &Pipeline, problem: &Problem) -> Result<Vec<f64>> {
    Ok(pipeline
        .run(problem, &find_variant("baseline-z")?, PipelineOptions::default())?
        .blist)
}

/// Per-atom bispectrum rows before and after rotating every displacement by `m`.
pub fn rotation_invariance_with(problem: &Problem, m: &[[f64; 3]; 3], workers: usize) -> Result<CheckResult> {
    let pipeline = Pipeline::new(&problem.params, workers)?;
    let before = blist(&pipeline, problem)?;
    let after = blist(&pipeline, &problem.map_displacements(|d| rotate(m, d))?)?;
    Ok(CheckResult::new(
        "rotation_invariance",
        rel_max_diff(&after, &before),
        ROTATION_INVARIANCE,
        format!("natoms={} 2J={}", problem.natoms(), problem.twojmax().get()),
    ))
}

pub fn rotation_invariance_check(problem: &Problem, seed: u64) -> Result<CheckResult> {
    let mut c = rotation_invariance_with(problem, &random_rotation(seed), 1)?;
    c.context.push_str(&format!(" seed={seed}"));
    Ok(c)
}

/// Baseline forces against the staged and fused adjoint forces.
pub fn cross_pipeline_check(problem: &Problem) -> Result<CheckResult> {
    let pipeline = Pipeline::new(&problem.params, 1)?;
    let opts = PipelineOptions::default();
    let base = pipeline.run(problem, &find_variant("baseline-z")?, opts)?;
    let reference = flatten3(&base.forces);
    let mut worst: f64 = 0.0;
    for name in ["v1", "fused"] {
        let out = pipeline.run(problem, &find_variant(name)?, opts)?;
        worst = worst.max(rel_max_diff(&flatten3(&out.forces), &reference));
    }
    Ok(CheckResult::new(
        "cross_pipeline",
        worst,
        CROSS_PIPELINE,
        format!(
            "natoms={} 2J={} seed={}",
            problem.natoms(),
            problem.twojmax().get(),
            problem.seed.map_or("none".into(), |s| s.to_string())
        ),
    ))
}

/// `|sum F| / max|F|` over the three components.
pub fn newton_sum_check(forces: &[[f64; 3]]) -> CheckResult {
    let mut sum = [0.0; 3];
    let mut fmax: f64 = 0.0;
    for f in forces {
        for k in 0..3 {
            sum[k] += f[k];
            fmax = fmax.max(f[k].abs());
        }
    }
    let smax = sum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    CheckResult::new(
        "newton_sum",
        smax / fmax.max(ABS_FLOOR),
        NEWTON_SUM,
        format!("natoms={}", forces.len()),
    )
}

/// Largest element error of the production recursion against the closed form,
/// over `samples` random displacements and every level up to `min(2J, 8)`.
pub fn wigner_recursion_check(twojmax: u32, samples: usize, seed: u64) -> Result<CheckResult> {
    let top = twojmax.min(ORACLE_MAX_TWOJ);
    let rcut = crate::snap::problem::DEFAULT_RCUT;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = crate::harness::generate::random_unit(&mut rng);
        let r = rng.gen_range(0.05..0.99) * rcut;
        let map = map_to_3sphere([u[0] * r, u[1] * r, u[2] * r], rcut, 0.0, crate::angular::DEFAULT_RFAC0)?;
        let stack = compute_u_matrices(&map, TwoJ(top), BlockStorage::Full);
        for t in 0..=top {
            let direct = wigner_direct(t, map.a, map.b)?;
            for (x, y) in stack.block(t).iter().zip(&direct) {
                worst = worst.max((x - y).norm());
            }
        }
    }
    Ok(CheckResult::new(
        "wigner_recursion",
        worst,
        WIGNER_DIRECT,
        format!("2j<={top} samples={samples}"),
    ))
}

/// Production coupling table against the closed-form coefficients.
pub fn cg_table_check(twojmax: u32) -> Result<CheckResult> {
    let maps = HalfIntIndexMaps::new(TwoJ(twojmax));
    let cg = compute_cg_table(TwoJ(twojmax), &maps)?;
    let mut worst: f64 = 0.0;
    for t in maps.coupling_triples() {
        for m1 in 0..=t.twoj1 {
            for m2 in 0..=t.twoj2 {
                let (a, b) = (2 * m1 as i64 - t.twoj1 as i64, 2 * m2 as i64 - t.twoj2 as i64);
                let expect = clebsch_gordan(t.twoj1 as i64, a, t.twoj2 as i64, b, t.twoj as i64, a + b);
                worst = worst.max((cg.get(&maps, t.twoj1, m1, t.twoj2, m2, t.twoj) - expect).abs());
            }
        }
    }
    Ok(CheckResult::new("cg_table", worst, UNITARITY, format!("2J={twojmax}")))
}

fn small_config(twojmax: u32, seed: u64, natoms: usize, nnbor: usize, mode: NeighborMode) -> BenchConfig {
    BenchConfig {
        natoms,
        nnbor,
        twojmax,
        seed,
        neighbor_mode: mode,
        workers: 1,
        ..BenchConfig::default()
    }
}

/// The default oracle suite: one result per check.
pub fn verify_suite(twojmax: u32, seed: u64, workers: usize) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let maps = HalfIntIndexMaps::new(TwoJ(twojmax));
    let count = oracle_triples(twojmax).len();
    out.push(CheckResult::new(
        "bispectrum_count",
        if count == maps.n_bispectrum() { 0.0 } else { 1.0 },
        0.0,
        format!("2J={twojmax} n={}", maps.n_bispectrum()),
    ));
    out.push(cg_table_check(twojmax)?);
    out.push(wigner_recursion_check(twojmax, 20, seed)?);

    let cluster = generate_problem(&small_config(twojmax, seed, 8, 0, NeighborMode::Cluster))?;
    let pipeline = Pipeline::new(&cluster.params, workers)?;
    let base = pipeline.run(&cluster, &find_variant("baseline-z")?, PipelineOptions::default())?;
    if twojmax <= ORACLE_MAX_TWOJ {
        out.push(CheckResult::new(
            "oracle_bispectrum",
            rel_max_diff(&base.blist, &oracle_bispectrum(&cluster)?),
            CROSS_PIPELINE,
            "8-atom cluster",
        ));
    }
    let h = FD_STEP_FRACTION * cluster.params.rcut;
    let fd = if twojmax <= ORACLE_MAX_TWOJ {
        finite_difference_forces(&cluster, h)?
    } else {
        finite_difference_forces_with(&cluster, h, &|p| {
            Ok(pipeline.run(p, &find_variant("baseline-z")?, PipelineOptions::default())?.energy_total)
        })?
    };
    out.push(CheckResult::new(
        "finite_difference",
        rel_max_diff(&flatten3(&base.forces), &flatten3(&fd)),
        FD_GRADIENT,
        format!("8-atom cluster h={h:.2e}"),
    ));
    out.push(newton_sum_check(&base.forces));

    let synthetic = generate_problem(&small_config(twojmax, seed, 32, 12, NeighborMode::Synthetic))?;
    out.push(cross_pipeline_check(&synthetic)?);
    out.push(cross_pipeline_check(&cluster)?);
    out.push(rotation_invariance_check(&synthetic, seed)?);

    let pipeline = Pipeline::new(&synthetic.params, workers)?;
    let reference = pipeline.run(&synthetic, &find_variant("baseline-z")?, PipelineOptions::default())?;
    let reference_f = flatten3(&reference.forces);
    let mut physics: f64 = 0.0;
    let mut deterministic: f64 = 0.0;
    let mut first_adjoint: Option<Vec<f64>> = None;
    for v in builtin_variants() {
        let bench = pipeline.run(&synthetic, &v, PipelineOptions::benchmark())?;
        physics = physics.max(rel_max_diff(&flatten3(&bench.forces), &reference_f));
        if v.name == "baseline-z" {
            continue;
        }
        let det = flatten3(
            &pipeline
                .run(
                    &synthetic,
                    &v,
                    PipelineOptions {
                        mode: RunMode::Deterministic,
                        ..PipelineOptions::default()
                    },
                )?
                .forces,
        );
        match &first_adjoint {
            None => first_adjoint = Some(det),
            Some(f) => deterministic = deterministic.max(rel_max_diff(&det, f)),
        }
    }
    out.push(CheckResult::new("variant_physics", physics, VARIANT_PHYSICS, "9 variants vs baseline-z"));
    out.push(CheckResult::new(
        "variant_deterministic",
        deterministic,
        VARIANT_DETERMINISTIC,
        "adjoint variants, deterministic mode",
    ));
    Ok(out)
}

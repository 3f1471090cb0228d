use proptest::prelude::*;
use snapforge::halfint::TwoJ;
use snapforge::harness::{generate_problem, BenchConfig, NeighborMode};
use snapforge::oracle::checks::rotate;
use snapforge::oracle::newton_sum_check;
use snapforge::snap::{Geometry, NeighborList, Problem, SnapParams};
use snapforge::tolerances::*;
use snapforge::variants::{
    array_plan, builtin_variants, find_variant, Pipeline, PipelineOptions, RunMode, RunOutput,
};
use snapforge::SnapError;

fn synthetic(twojmax: u32, natoms: usize, nnbor: usize, seed: u64) -> Problem {
    generate_problem(&BenchConfig {
        natoms,
        nnbor,
        twojmax,
        seed,
        neighbor_mode: NeighborMode::Synthetic,
        ..BenchConfig::default()
    })
    .unwrap()
}

fn run(p: &Problem, name: &str, opts: PipelineOptions) -> RunOutput {
    Pipeline::new(&p.params, 2)
        .unwrap()
        .run(p, &find_variant(name).unwrap(), opts)
        .unwrap()
}

fn det(p: &Problem, name: &str) -> RunOutput {
    run(p, name, PipelineOptions::default())
}

fn forces_err(a: &RunOutput, b: &RunOutput) -> f64 {
    rel_max_diff(&flatten3(&a.forces), &flatten3(&b.forces))
}

#[test]
fn staged_and_fused_agree() {
    let p = synthetic(8, 48, 14, 11);
    let staged = det(&p, "v1");
    let fused = det(&p, "fused");
    assert!(forces_err(&fused, &staged) <= STAGED_VS_FUSED);
    assert!(rel_max_diff(&fused.blist, &staged.blist) <= STAGED_VS_FUSED);
}

#[test]
fn direction_fission_does_not_change_bits() {
    let p = synthetic(6, 20, 9, 3);
    let pipeline = Pipeline::new(&p.params, 2).unwrap();
    let mut spec = find_variant("fused").unwrap();
    let with = pipeline.run(&p, &spec, PipelineOptions::default()).unwrap();
    spec.du_fission_per_direction = false;
    let without = pipeline.run(&p, &spec, PipelineOptions::default()).unwrap();
    assert_eq!(with.forces, without.forces);
    assert!(with.stages.iter().any(|s| s.name.ends_with("_x")));
    assert!(!without.stages.iter().any(|s| s.name.ends_with("_x")));
}

#[test]
fn concurrent_accumulation_within_tolerance() {
    let p = synthetic(8, 64, 20, 4);
    for name in ["v2", "v5", "fused"] {
        let d = det(&p, name);
        let b = run(&p, name, PipelineOptions::benchmark());
        assert!(forces_err(&b, &d) <= ACCUMULATION_STRATEGY, "{name}");
    }
}

#[test]
fn deterministic_runs_repeat_bitwise() {
    let p = synthetic(8, 40, 16, 5);
    for v in builtin_variants() {
        let a = det(&p, &v.name);
        let b = det(&p, &v.name);
        assert_eq!(a.forces, b.forces, "{}", v.name);
        assert_eq!(a.force_checksum.to_bits(), b.force_checksum.to_bits());
    }
}

#[test]
fn worker_count_does_not_change_deterministic_bits() {
    let p = synthetic(6, 50, 12, 6);
    for name in ["baseline-z", "v4", "fused"] {
        let v = find_variant(name).unwrap();
        let one = Pipeline::new(&p.params, 1).unwrap().run(&p, &v, PipelineOptions::default()).unwrap();
        let four = Pipeline::new(&p.params, 4).unwrap().run(&p, &v, PipelineOptions::default()).unwrap();
        assert_eq!(one.forces, four.forces, "{name}");
    }
}

#[test]
fn planned_bytes_match_allocations() {
    let p = synthetic(8, 30, 10, 7);
    let pipeline = Pipeline::new(&p.params, 1).unwrap();
    for v in builtin_variants() {
        let out = pipeline.run(&p, &v, PipelineOptions::default()).unwrap();
        let plan = array_plan(
            &pipeline.context().maps,
            &v,
            p.natoms(),
            p.npairs(),
            p.neighbors.max_count(),
        )
        .unwrap();
        let got: Vec<(&str, u64)> = out.arrays.iter().map(|a| (a.name.as_str(), a.logical)).collect();
        let want: Vec<(&str, u64)> = plan.iter().map(|a| (a.name.as_str(), a.logical)).collect();
        assert_eq!(got, want, "{}", v.name);
        assert_eq!(out.peak_bytes_total, plan.iter().map(|a| a.logical).sum::<u64>());
    }
}

#[test]
fn fused_never_holds_pair_arrays() {
    let p = synthetic(8, 30, 10, 8);
    let out = det(&p, "fused");
    assert!(out.arrays.iter().all(|a| a.name != "ulist" && a.name != "dulist"));
    let v1 = det(&p, "v1");
    assert!(v1.arrays.iter().any(|a| a.name == "dulist"));
}

#[test]
fn memory_budget_names_the_array() {
    let p = synthetic(8, 30, 10, 9);
    let opts = PipelineOptions {
        memory_budget: Some(1000),
        ..PipelineOptions::default()
    };
    let err = Pipeline::new(&p.params, 1)
        .unwrap()
        .run(&p, &find_variant("v1").unwrap(), opts)
        .unwrap_err();
    assert!(matches!(err, SnapError::MemoryBudget { .. }), "{err:?}");
}

#[test]
fn mismatched_params_are_rejected() {
    let p = synthetic(4, 5, 3, 1);
    let other = SnapParams::new(TwoJ(6));
    let pipeline = Pipeline::new(&other, 1).unwrap();
    assert!(pipeline.run(&p, &find_variant("v1").unwrap(), PipelineOptions::default()).is_err());
}

#[test]
fn residue_check_passes_on_real_data() {
    let p = synthetic(8, 20, 10, 10);
    let opts = PipelineOptions {
        check_residue: true,
        ..PipelineOptions::default()
    };
    for name in ["v1", "fused"] {
        run(&p, name, opts);
    }
}

fn single_pair(twojmax: u32, d: [f64; 3], beta: Vec<f64>) -> Problem {
    let mut params = SnapParams::new(TwoJ(twojmax));
    params.beta = beta;
    let nl = NeighborList::from_rows(vec![vec![(1, d)], vec![]]);
    Problem::new(vec![[0.0; 3]; 2], vec![0; 2], None, Geometry::Synthetic, nl, params, None).unwrap()
}

#[test]
fn forces_vanish_smoothly_at_cutoff() {
    let nb = SnapParams::new(TwoJ(6)).beta.len();
    let beta = snapforge::harness::generate::random_beta(nb, 3);
    let rcut = snapforge::snap::DEFAULT_RCUT;
    let dir = [0.48, -0.6, 0.64];
    let at = |r: f64| {
        let p = single_pair(6, [dir[0] * r, dir[1] * r, dir[2] * r], beta.clone());
        det(&p, "fused").forces[0]
    };
    let near = at(rcut * (1.0 - 1e-8));
    let inside = at(0.9 * rcut);
    let scale = inside.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let edge = near.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0);
    assert!(edge / scale <= CUTOFF_SMOOTHNESS, "{edge} vs {scale}");
}

#[test]
fn energy_is_linear_in_beta() {
    let p = synthetic(6, 12, 8, 12);
    let nb = p.params.beta.len();
    let b1 = snapforge::harness::generate::random_beta(nb, 1);
    let b2 = snapforge::harness::generate::random_beta(nb, 2);
    let combo: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
    let e = |b: &[f64]| det(&p.with_beta(b.to_vec()).unwrap(), "fused");
    let (r1, r2, rc) = (e(&b1), e(&b2), e(&combo));
    let expect = 2.0 * r1.energy_total - 0.5 * r2.energy_total;
    assert!((rc.energy_total - expect).abs() <= ENERGY_LINEARITY * expect.abs().max(1.0));
    let fexp: Vec<f64> = flatten3(&r1.forces)
        .iter()
        .zip(flatten3(&r2.forces))
        .map(|(a, b)| 2.0 * a - 0.5 * b)
        .collect();
    assert!(rel_max_diff(&flatten3(&rc.forces), &fexp) <= ENERGY_LINEARITY);
}

#[test]
fn one_hot_beta_selects_one_descriptor() {
    let p = synthetic(4, 10, 6, 13);
    let nb = p.params.beta.len();
    for l in [0, 3, nb - 1] {
        let mut beta = vec![0.0; nb];
        beta[l] = 1.0;
        let out = det(&p.with_beta(beta).unwrap(), "v1");
        for a in 0..p.natoms() {
            assert_eq!(out.energy_per_atom[a], out.blist[a * nb + l]);
        }
    }
}

#[test]
fn zero_beta_gives_zero_forces() {
    let p = synthetic(8, 16, 8, 14).with_beta(vec![0.0; 55]).unwrap();
    for v in builtin_variants() {
        let out = det(&p, &v.name);
        assert!(out.forces.iter().flatten().all(|&f| f == 0.0), "{}", v.name);
        assert_eq!(out.energy_total, 0.0);
    }
}

#[test]
fn b000_of_isolated_atom_is_wself_cubed() {
    let mut params = SnapParams::new(TwoJ(0));
    params.beta = vec![1.0];
    params.wself = 1.7;
    let nl = NeighborList::from_rows(vec![vec![]]);
    let p = Problem::new(vec![[0.0; 3]], vec![0], None, Geometry::Synthetic, nl, params, None).unwrap();
    for name in ["baseline-z", "fused"] {
        let out = det(&p, name);
        assert!((out.blist[0] - 1.7f64.powi(3)).abs() < 1e-14);
        assert_eq!(out.forces, vec![[0.0; 3]]);
    }
}

#[test]
fn neighbor_order_does_not_matter() {
    let p = synthetic(8, 12, 10, 15);
    let mut rows: Vec<Vec<(usize, [f64; 3])>> = (0..p.natoms())
        .map(|i| {
            p.neighbors
                .range(i)
                .map(|q| (p.neighbors.index[q], p.neighbors.displacement[q]))
                .collect()
        })
        .collect();
    for row in &mut rows {
        row.reverse();
        let k = row.len() / 3;
        row.rotate_left(k);
    }
    let q = Problem::new(
        p.positions.clone(),
        p.types.clone(),
        None,
        Geometry::Synthetic,
        NeighborList::from_rows(rows),
        p.params.clone(),
        None,
    )
    .unwrap();
    for name in ["baseline-z", "fused"] {
        assert!(rel_max_diff(&det(&q, name).blist, &det(&p, name).blist) <= SUM_REORDER);
        assert!(forces_err(&det(&q, name), &det(&p, name)) <= SUM_REORDER);
    }
}

#[test]
fn translation_leaves_forces_unchanged() {
    let p = generate_problem(&BenchConfig {
        natoms: 8,
        nnbor: 0,
        twojmax: 6,
        seed: 16,
        neighbor_mode: NeighborMode::Cluster,
        ..BenchConfig::default()
    })
    .unwrap();
    let shifted: Vec<[f64; 3]> = p.positions.iter().map(|x| [x[0] + 3.1, x[1] - 7.0, x[2] + 0.25]).collect();
    let q = snapforge::oracle::checks::with_positions(&p, shifted).unwrap();
    assert!(forces_err(&det(&q, "fused"), &det(&p, "fused")) <= 1e-12);
}

#[test]
fn newton_sum_on_positional_geometry() {
    let p = generate_problem(&BenchConfig {
        natoms: 64,
        nnbor: 20,
        twojmax: 8,
        seed: 17,
        neighbor_mode: NeighborMode::Periodic,
        ..BenchConfig::default()
    })
    .unwrap();
    for name in ["baseline-z", "v3", "fused"] {
        assert!(newton_sum_check(&det(&p, name).forces).pass, "{name}");
    }
}

#[test]
fn rotating_displacements_rotates_pair_gradients() {
    let p = synthetic(6, 10, 6, 18);
    let m = snapforge::oracle::checks::random_rotation(3);
    let q = p.map_displacements(|d| rotate(&m, d)).unwrap();
    let (a, b) = (det(&p, "fused"), det(&q, "fused"));
    let rotated: Vec<[f64; 3]> = a.delist.iter().map(|d| rotate(&m, *d)).collect();
    assert!(rel_max_diff(&flatten3(&b.delist), &flatten3(&rotated)) <= 1e-9);
}

#[test]
fn deterministic_mode_names() {
    assert_eq!(PipelineOptions::default().mode, RunMode::Deterministic);
    assert_eq!(PipelineOptions::benchmark().mode, RunMode::Benchmark);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn prop_cross_pipeline(seed in 0u64..10_000, natoms in 1usize..12, nnbor in 0usize..8, tj in 0u32..5) {
        let p = synthetic(2 * tj, natoms, nnbor, seed);
        let c = snapforge::oracle::cross_pipeline_check(&p).unwrap();
        prop_assert!(c.pass, "{}", c.line());
    }

    #[test]
    fn prop_rotation_invariance(seed in 0u64..10_000, rot in 0u64..10_000, tj in 1u32..5) {
        let p = synthetic(2 * tj, 6, 7, seed);
        let c = snapforge::oracle::checks::rotation_invariance_check(&p, rot).unwrap();
        prop_assert!(c.pass, "{}", c.line());
    }

    #[test]
    fn prop_newton_sum(seed in 0u64..10_000, natoms in 2usize..10, tj in 1u32..4) {
        let p = generate_problem(&BenchConfig {
            natoms,
            nnbor: 0,
            twojmax: 2 * tj,
            seed,
            neighbor_mode: NeighborMode::Cluster,
            ..BenchConfig::default()
        })
        .unwrap();
        let out = det(&p, "fused");
        prop_assert!(newton_sum_check(&out.forces).pass);
    }
}

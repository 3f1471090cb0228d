//! Seeded problem generation and neighbor-list construction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SnapError};
use crate::harness::config::{BenchConfig, NeighborMode};
use crate::snap::problem::{Geometry, NeighborList, Problem};

const STREAM_BETA: u64 = 1;
const STREAM_POSITIONS: u64 = 2;
const STREAM_NEIGHBORS: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Coefficients drawn uniformly from (-1, 1).
pub fn random_beta(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed, STREAM_BETA);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Uniform direction by rejection from the unit cube.
pub fn random_unit(r: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
        ];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Box length whose uniform density gives `nnbor` neighbors per atom on average.
pub fn box_for_density(natoms: usize, nnbor: usize, rcut: f64) -> f64 {
    let sphere = 4.0 / 3.0 * PI * rcut.powi(3);
    let n = natoms.saturating_sub(1).max(1) as f64;
    (n * sphere / nnbor.max(1) as f64).cbrt()
}

fn min_image(d: f64, box_length: Option<f64>) -> f64 {
    match box_length {
        Some(l) => d - l * (d / l).round(),
        None => d,
    }
}

fn displacement(a: [f64; 3], b: [f64; 3], box_length: Option<f64>) -> [f64; 3] {
    [
        min_image(b[0] - a[0], box_length),
        min_image(b[1] - a[1], box_length),
        min_image(b[2] - a[2], box_length),
    ]
}

fn norm2(d: [f64; 3]) -> f64 {
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// O(N^2) pair scan; rows list neighbors in increasing index order.
pub fn brute_force_neighbors(positions: &[[f64; 3]], box_length: Option<f64>, rcut: f64) -> NeighborList {
    let rows = (0..positions.len())
        .map(|i| {
            (0..positions.len())
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let d = displacement(positions[i], positions[j], box_length);
                    (norm2(d) < rcut * rcut).then_some((j, d))
                })
                .collect()
        })
        .collect();
    NeighborList::from_rows(rows)
}

/// Cell-list neighbor search in a periodic cube, minimum-image displacements,
/// strict `r < rcut`; rows list neighbors in increasing index order.
pub fn build_neighborlist(positions: &[[f64; 3]], box_length: f64, rcut: f64) -> Result<NeighborList> {
    if !(rcut > 0.0) || rcut > box_length / 2.0 {
        return Err(SnapError::CutoffExceedsHalfBox { rcut, box_length });
    }
    let nc = ((box_length / rcut).floor() as usize).max(1);
    let edge = box_length / nc as f64;
    let cell_of = |x: [f64; 3]| -> [usize; 3] {
        let mut c = [0; 3];
        for k in 0..3 {
            let w = x[k].rem_euclid(box_length);
            c[k] = ((w / edge) as usize).min(nc - 1);
        }
        c
    };
    let flat = |c: [usize; 3]| (c[0] * nc + c[1]) * nc + c[2];
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); nc * nc * nc];
    for (i, &x) in positions.iter().enumerate() {
        cells[flat(cell_of(x))].push(i);
    }
    let rows = positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cell_of(x);
            let mut visit = Vec::with_capacity(27);
            for dx in [nc - 1, 0, 1] {
                for dy in [nc - 1, 0, 1] {
                    for dz in [nc - 1, 0, 1] {
                        visit.push(flat([(c[0] + dx) % nc, (c[1] + dy) % nc, (c[2] + dz) % nc]));
                    }
                }
            }
            visit.sort_unstable();
            visit.dedup();
            let mut row: Vec<(usize, [f64; 3])> = visit
                .iter()
                .flat_map(|&cell| cells[cell].iter().copied())
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let d = displacement(x, positions[j], Some(box_length));
                    (norm2(d) < rcut * rcut).then_some((j, d))
                })
                .collect();
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    Ok(NeighborList::from_rows(rows))
}

/// Neighbor lists for new positions under the problem's boundary conditions.
pub fn rebuild_neighbors(problem: &Problem, positions: &[[f64; 3]]) -> Result<NeighborList> {
    let rcut = problem.params.rcut;
    match (problem.geometry, problem.box_length) {
        (Geometry::Periodic, Some(l)) => build_neighborlist(positions, l, rcut),
        (Geometry::Open, _) => Ok(brute_force_neighbors(positions, None, rcut)),
        _ => Err(SnapError::InvalidConfig(
            "synthetic displacements cannot be rebuilt from positions".into(),
        )),
    }
}

fn mean_count(nl: &NeighborList) -> f64 {
    nl.npairs() as f64 / nl.natoms().max(1) as f64
}

fn synthetic(config: &BenchConfig) -> (Vec<[f64; 3]>, f64, NeighborList) {
    let l = box_for_density(config.natoms, config.nnbor, config.rcut);
    let mut pr = rng(config.seed, STREAM_POSITIONS);
    let positions: Vec<[f64; 3]> = (0..config.natoms)
        .map(|_| [pr.gen_range(0.0..l), pr.gen_range(0.0..l), pr.gen_range(0.0..l)])
        .collect();
    let mut nr = rng(config.seed, STREAM_NEIGHBORS);
    let (lo, hi) = (0.3 * config.rcut, 0.95 * config.rcut);
    let rows = (0..config.natoms)
        .map(|i| {
            if config.natoms < 2 {
                return Vec::new();
            }
            (0..config.nnbor)
                .map(|_| {
                    let mut k = nr.gen_range(0..config.natoms - 1);
                    if k >= i {
                        k += 1;
                    }
                    let u = random_unit(&mut nr);
                    let r = loop {
                        let r = nr.gen_range(lo..hi);
                        if r > lo && r > config.rmin0 {
                            break r;
                        }
                    };
                    (k, [u[0] * r, u[1] * r, u[2] * r])
                })
                .collect()
        })
        .collect();
    (positions, l, NeighborList::from_rows(rows))
}

fn periodic(config: &BenchConfig) -> Result<(Vec<[f64; 3]>, f64, NeighborList)> {
    let mut pr = rng(config.seed, STREAM_POSITIONS);
    let frac: Vec<[f64; 3]> = (0..config.natoms)
        .map(|_| [pr.gen_range(0.0..1.0), pr.gen_range(0.0..1.0), pr.gen_range(0.0..1.0)])
        .collect();
    let target = config.nnbor as f64;
    let scaled = |l: f64| -> Vec<[f64; 3]> {
        frac.iter().map(|s| [s[0] * l, s[1] * l, s[2] * l]).collect()
    };
    let eval = |l: f64| -> Result<(f64, Vec<[f64; 3]>, NeighborList)> {
        let pos = scaled(l);
        let nl = build_neighborlist(&pos, l, config.rcut)?;
        Ok((mean_count(&nl), pos, nl))
    };
    let within = |m: f64| (m - target).abs() <= 0.1 * target;
    let l0 = box_for_density(config.natoms, config.nnbor, config.rcut).max(2.0 * config.rcut);
    let (m0, pos0, nl0) = eval(l0)?;
    if within(m0) {
        return Ok((pos0, l0, nl0));
    }
    // density falls as the box grows; the densest admissible box is 2 Rcut
    let mut lo = 2.0 * config.rcut;
    let mut hi = 2.0 * l0;
    let (mlo, ..) = eval(lo)?;
    let (mhi, ..) = eval(hi)?;
    if mlo < 0.9 * target || mhi > 1.1 * target {
        return Err(SnapError::UnreachableNeighborCount {
            target,
            natoms: config.natoms,
            best: if mlo < 0.9 * target { mlo } else { mhi },
        });
    }
    let mut best = (f64::INFINITY, l0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (m, pos, nl) = eval(mid)?;
        if within(m) {
            return Ok((pos, mid, nl));
        }
        if (m - target).abs() < best.0 {
            best = ((m - target).abs(), m);
        }
        if m > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(SnapError::UnreachableNeighborCount {
        target,
        natoms: config.natoms,
        best: best.1,
    })
}

fn cluster(config: &BenchConfig) -> Result<(Vec<[f64; 3]>, NeighborList)> {
    let mut pr = rng(config.seed, STREAM_POSITIONS);
    let radius = 0.55 * config.rcut;
    let min_sep = 0.3 * config.rcut;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(config.natoms);
    let mut attempts = 0usize;
    while positions.len() < config.natoms {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(SnapError::InvalidConfig(format!(
                "cannot pack {} atoms into a cluster",
                config.natoms
            )));
        }
        let u = random_unit(&mut pr);
        let r = radius * pr.gen_range(0.0f64..1.0).cbrt();
        let x = [u[0] * r, u[1] * r, u[2] * r];
        if positions
            .iter()
            .all(|&p| norm2(displacement(p, x, None)) > min_sep * min_sep)
        {
            positions.push(x);
        }
    }
    let nl = brute_force_neighbors(&positions, None, config.rcut);
    Ok((positions, nl))
}

/// A seeded problem per `config.neighbor_mode`.
pub fn generate_problem(config: &BenchConfig) -> Result<Problem> {
    config.validate()?;
    let mut params = config.params();
    params.beta = random_beta(params.beta.len(), config.seed);
    let (positions, box_length, geometry, nl) = match config.neighbor_mode {
        NeighborMode::Synthetic => {
            let (p, l, nl) = synthetic(config);
            (p, Some(l), Geometry::Synthetic, nl)
        }
        NeighborMode::Periodic => {
            let (p, l, nl) = periodic(config)?;
            (p, Some(l), Geometry::Periodic, nl)
        }
        NeighborMode::Cluster => {
            let (p, nl) = cluster(config)?;
            (p, None, Geometry::Open, nl)
        }
    };
    let types = vec![0; positions.len()];
    Problem::new(
        positions,
        types,
        box_length,
        geometry,
        nl,
        params,
        Some(config.seed),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::BenchConfig;

    fn cfg(natoms: usize, mode: NeighborMode) -> BenchConfig {
        BenchConfig {
            natoms,
            nnbor: 26,
            twojmax: 8,
            neighbor_mode: mode,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn synthetic_has_exact_counts_and_radii() {
        let p = generate_problem(&cfg(50, NeighborMode::Synthetic)).unwrap();
        assert_eq!(p.params.beta.len(), 55);
        let rc = p.params.rcut;
        for i in 0..50 {
            assert_eq!(p.neighbors.count(i), 26);
        }
        for d in &p.neighbors.displacement {
            let r = norm2(*d).sqrt();
            assert!(r > 0.3 * rc && r < 0.95 * rc);
        }
    }

    #[test]
    fn single_atom_has_no_neighbors() {
        for mode in [NeighborMode::Synthetic, NeighborMode::Cluster] {
            let p = generate_problem(&cfg(1, mode)).unwrap();
            assert_eq!(p.npairs(), 0);
        }
    }

    #[test]
    fn same_seed_same_problem() {
        for mode in [NeighborMode::Synthetic, NeighborMode::Periodic, NeighborMode::Cluster] {
            let n = if mode == NeighborMode::Cluster { 8 } else { 200 };
            let a = generate_problem(&cfg(n, mode)).unwrap();
            let b = generate_problem(&cfg(n, mode)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn periodic_density_hits_target() {
        let p = generate_problem(&cfg(400, NeighborMode::Periodic)).unwrap();
        let mean = p.npairs() as f64 / 400.0;
        assert!((mean - 26.0).abs() <= 2.6, "mean {mean}");
    }

    #[test]
    fn too_few_atoms_for_target_density() {
        let err = generate_problem(&cfg(10, NeighborMode::Periodic)).unwrap_err();
        assert!(matches!(err, SnapError::UnreachableNeighborCount { .. }));
    }

    #[test]
    fn pair_at_half_cutoff_is_mutual() {
        let rc = 2.0;
        let pos = [[1.0, 1.0, 1.0], [2.0, 1.0, 1.0]];
        let nl = build_neighborlist(&pos, 10.0, rc).unwrap();
        assert_eq!(nl.index, vec![1, 0]);
        assert_eq!(nl.displacement[0], [1.0, 0.0, 0.0]);
        assert_eq!(nl.displacement[1], [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn pair_exactly_at_cutoff_is_excluded() {
        let pos = [[1.0, 1.0, 1.0], [3.0, 1.0, 1.0]];
        let nl = build_neighborlist(&pos, 10.0, 2.0).unwrap();
        assert_eq!(nl.npairs(), 0);
    }

    #[test]
    fn cutoff_above_half_box_is_rejected() {
        let err = build_neighborlist(&[[0.0; 3]], 3.0, 2.0).unwrap_err();
        assert!(matches!(err, SnapError::CutoffExceedsHalfBox { .. }));
    }

    #[test]
    fn cell_list_matches_brute_force() {
        let mut r = rng(7, 9);
        for (l, rc) in [(12.0, 2.5), (9.0, 4.4), (20.0, 3.0)] {
            let pos: Vec<[f64; 3]> = (0..200)
                .map(|_| [r.gen_range(0.0..l), r.gen_range(0.0..l), r.gen_range(0.0..l)])
                .collect();
            let a = build_neighborlist(&pos, l, rc).unwrap();
            let b = brute_force_neighbors(&pos, Some(l), rc);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn wrapped_pair_uses_minimum_image() {
        let pos = [[0.2, 5.0, 5.0], [9.8, 5.0, 5.0]];
        let nl = build_neighborlist(&pos, 10.0, 2.0).unwrap();
        assert_eq!(nl.npairs(), 2);
        assert!((nl.displacement[0][0] + 0.4).abs() < 1e-12);
    }
}

//! Bispectrum and energy evaluated straight from the definitions: closed-form
//! rotation matrices, full double sums over magnetic indices, and neighbor
//! lists rebuilt by pair scan.

use num_complex::Complex64;

use crate::angular::map_to_3sphere;
use crate::error::{Result, SnapError};
use crate::oracle::wigner::{clebsch_gordan, wigner_direct, ORACLE_MAX_TWOJ};
use crate::snap::problem::{Geometry, Problem};

/// Canonical triples `(2j1, 2j2, 2j)` with `j2 <= j1 <= j`, in storage order.
pub fn oracle_triples(twojmax: u32) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for j1 in 0..=twojmax {
        for j2 in 0..=j1 {
            let mut j = j1 - j2;
            while j <= (j1 + j2).min(twojmax) {
                if j >= j1 {
                    out.push((j1, j2, j));
                }
                j += 2;
            }
        }
    }
    out
}

fn switching(r: f64, rcut: f64, rmin0: f64) -> f64 {
    if r <= rmin0 {
        1.0
    } else if r >= rcut {
        0.0
    } else {
        0.5 * ((std::f64::consts::PI * (r - rmin0) / (rcut - rmin0)).cos() + 1.0)
    }
}

/// Neighbors of every atom: a fresh pair scan for positional geometries,
/// the stored displacements for synthetic ones.
pub fn oracle_neighbors(problem: &Problem) -> Vec<Vec<(usize, [f64; 3])>> {
    let n = problem.natoms();
    if problem.geometry == Geometry::Synthetic {
        return (0..n)
            .map(|i| {
                problem
                    .neighbors
                    .range(i)
                    .map(|p| (problem.neighbors.index[p], problem.neighbors.displacement[p]))
                    .collect()
            })
            .collect();
    }
    let rc = problem.params.rcut;
    let wrap = |d: f64| match (problem.geometry, problem.box_length) {
        (Geometry::Periodic, Some(l)) => d - l * (d / l).round(),
        _ => d,
    };
    (0..n)
        .map(|i| {
            let xi = problem.positions[i];
            (0..n)
                .filter(|&k| k != i)
                .filter_map(|k| {
                    let xk = problem.positions[k];
                    let d = [wrap(xk[0] - xi[0]), wrap(xk[1] - xi[1]), wrap(xk[2] - xi[2])];
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    (r2 < rc * rc).then_some((k, d))
                })
                .collect()
        })
        .collect()
}

fn coupling_table(j1: u32, j2: u32, j: u32) -> Vec<f64> {
    let mut t = vec![0.0; ((j1 + 1) * (j2 + 1)) as usize];
    for r1 in 0..=j1 as i64 {
        for r2 in 0..=j2 as i64 {
            let (m1, m2) = (2 * r1 - j1 as i64, 2 * r2 - j2 as i64);
            t[(r1 * (j2 as i64 + 1) + r2) as usize] =
                clebsch_gordan(j1 as i64, m1, j2 as i64, m2, j as i64, m1 + m2);
        }
    }
    t
}

/// Per-atom bispectrum rows, `[atom][triple]`.
pub fn oracle_bispectrum(problem: &Problem) -> Result<Vec<f64>> {
    let p = &problem.params;
    let jmax = p.twojmax.get();
    if jmax > ORACLE_MAX_TWOJ {
        return Err(SnapError::OracleBound {
            twoj: jmax,
            max: ORACLE_MAX_TWOJ,
        });
    }
    let triples = oracle_triples(jmax);
    let tables: Vec<Vec<f64>> = triples.iter().map(|&(a, b, c)| coupling_table(a, b, c)).collect();
    let wself = if p.self_contribution { p.wself } else { 0.0 };
    let mut out = Vec::with_capacity(problem.natoms() * triples.len());
    for nbrs in oracle_neighbors(problem) {
        let mut tot: Vec<Vec<Complex64>> = (0..=jmax)
            .map(|t| {
                let n = t as usize + 1;
                let mut m = vec![Complex64::new(0.0, 0.0); n * n];
                for d in 0..n {
                    m[d * n + d] = Complex64::new(wself, 0.0);
                }
                m
            })
            .collect();
        for (k, d) in nbrs {
            let map = map_to_3sphere(d, p.rcut, p.rmin0, p.rfac0)?;
            let w = p.type_weights[problem.types[k]] * switching(map.r, p.rcut, p.rmin0);
            for (t, block) in tot.iter_mut().enumerate() {
                let u = wigner_direct(t as u32, map.a, map.b)?;
                for (x, v) in block.iter_mut().zip(u) {
                    *x += v * w;
                }
            }
        }
        for (&(j1, j2, j), cg) in triples.iter().zip(&tables) {
            let (u1, u2, uj) = (&tot[j1 as usize], &tot[j2 as usize], &tot[j as usize]);
            let (n1, n2, n) = (j1 as i64 + 1, j2 as i64 + 1, j as i64 + 1);
            let mut b = 0.0;
            for r in 0..n {
                for c in 0..n {
                    let (m, mp) = (2 * r - j as i64, 2 * c - j as i64);
                    let mut z = Complex64::new(0.0, 0.0);
                    for r1 in 0..n1 {
                        let m2 = m - (2 * r1 - j1 as i64);
                        if m2.abs() > j2 as i64 {
                            continue;
                        }
                        let r2 = (m2 + j2 as i64) / 2;
                        let ca = cg[(r1 * n2 + r2) as usize];
                        for c1 in 0..n1 {
                            let mp2 = mp - (2 * c1 - j1 as i64);
                            if mp2.abs() > j2 as i64 {
                                continue;
                            }
                            let c2 = (mp2 + j2 as i64) / 2;
                            let cb = cg[(c1 * n2 + c2) as usize];
                            z += ca * cb * u1[(r1 * n1 + c1) as usize] * u2[(r2 * n2 + c2) as usize];
                        }
                    }
                    b += (uj[(r * n + c) as usize].conj() * z).re;
                }
            }
            out.push(b);
        }
    }
    Ok(out)
}

/// Per-atom energies and their total.
pub fn oracle_energy(problem: &Problem) -> Result<(Vec<f64>, f64)> {
    let b = oracle_bispectrum(problem)?;
    let beta = &problem.params.beta;
    let per: Vec<f64> = b
        .chunks(beta.len().max(1))
        .map(|row| row.iter().zip(beta).map(|(x, y)| x * y).sum())
        .collect();
    let total = per.iter().sum();
    Ok((per, total))
}

//! Whole-problem stage functions. Parallel loops run on the ambient rayon
//! pool; callers choose the pool width.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::halfint::expand_stack_into;
use crate::snap::kernels::{self, as_f64, pair_geom, SnapContext, Strided};
use crate::snap::problem::Problem;
use crate::variants::accumulate::{AtomicAdder, DisjointWriter};
use crate::variants::layout::{ArrayLayout, ComplexArray, LayoutView, PairArray, PairOrder};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How contributions from several pairs reach a shared output element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// One task per output element, contributions in pair order.
    Ordered,
    /// One task per pair, atomic adds in arbitrary order.
    Concurrent,
}

/// Where per-pair Wigner stacks come from during accumulation.
#[derive(Clone, Copy)]
pub enum USource<'a> {
    Stored(&'a PairArray),
    Recompute,
}

fn write_atom(w: &DisjointWriter, view: &LayoutView, atom: usize, local: &[f64]) {
    let (re, im, stride) = view.atom_strides(atom);
    for (i, v) in local.chunks_exact(2).enumerate() {
        // SAFETY: slots of distinct atoms never overlap.
        unsafe {
            w.write(re + i * stride, v[0]);
            w.write(im + i * stride, v[1]);
        }
    }
}

/// Raw Wigner stacks for every pair, rows in `order`.
pub fn compute_ulist(ctx: &SnapContext, problem: &Problem, order: PairOrder) -> Result<PairArray> {
    let full = ctx.u_full_len();
    let mut ulist = PairArray::zeros(problem, order, full);
    let shape = ulist.shape();
    ulist
        .data
        .par_chunks_mut(full.max(1))
        .enumerate()
        .try_for_each(|(row, out)| -> Result<()> {
            if let Some(p) = shape.pair_of(problem, row) {
                let g = pair_geom(ctx, problem, p)?;
                kernels::u_pair(ctx, &g, out);
            }
            Ok(())
        })?;
    Ok(ulist)
}

/// Per-atom totals `wself * I + sum_k sfac_k u_k`, full or half storage.
pub fn accumulate_ulisttot(
    ctx: &SnapContext,
    problem: &Problem,
    source: USource,
    half: bool,
    reduction: Reduction,
    dest: &mut ComplexArray,
) -> Result<()> {
    let len = ctx.maps.u_len(half);
    let full = ctx.u_full_len();
    let wself = problem.params.self_weight();
    let view = *dest.view();
    debug_assert_eq!(view.nidx, len);
    match reduction {
        Reduction::Ordered => {
            let w = DisjointWriter::new(dest.data_mut());
            (0..problem.natoms()).into_par_iter().try_for_each_init(
                || (vec![0.0; 2 * len], vec![ZERO; full]),
                |(tot, u), a| -> Result<()> {
                    kernels::init_total(ctx, half, wself, tot);
                    for p in problem.neighbors.range(a) {
                        let g = pair_geom(ctx, problem, p)?;
                        let us: &[Complex64] = match source {
                            USource::Stored(ul) => ul.row(problem, p),
                            USource::Recompute => {
                                kernels::u_pair(ctx, &g, u);
                                u
                            }
                        };
                        if half {
                            kernels::add_scaled_half(ctx, tot, us, g.sfac);
                        } else {
                            kernels::add_scaled(tot, us, g.sfac, full);
                        }
                    }
                    write_atom(&w, &view, a, tot);
                    Ok(())
                },
            )?;
        }
        Reduction::Concurrent => {
            {
                let w = DisjointWriter::new(dest.data_mut());
                (0..problem.natoms()).into_par_iter().for_each_init(
                    || vec![0.0; 2 * len],
                    |tot, a| {
                        kernels::init_total(ctx, half, wself, tot);
                        write_atom(&w, &view, a, tot);
                    },
                );
            }
            let adder = AtomicAdder::new(dest.data_mut());
            (0..problem.npairs()).into_par_iter().try_for_each_init(
                || (vec![ZERO; full], vec![0.0; 2 * len]),
                |(u, contrib), p| -> Result<()> {
                    let g = pair_geom(ctx, problem, p)?;
                    let us: &[Complex64] = match source {
                        USource::Stored(ul) => ul.row(problem, p),
                        USource::Recompute => {
                            kernels::u_pair(ctx, &g, u);
                            u
                        }
                    };
                    contrib.fill(0.0);
                    if half {
                        kernels::add_scaled_half(ctx, contrib, us, g.sfac);
                    } else {
                        kernels::add_scaled(contrib, us, g.sfac, full);
                    }
                    let (re, im, stride) = view.atom_strides(problem.owner(p));
                    for (i, v) in contrib.chunks_exact(2).enumerate() {
                        adder.add(re + i * stride, v[0]);
                        adder.add(im + i * stride, v[1]);
                    }
                    Ok(())
                },
            )?;
        }
    }
    Ok(())
}

/// Re-lays totals into `layout`, expanding half storage to full blocks.
pub fn transpose_ulisttot(
    ctx: &SnapContext,
    src: &ComplexArray,
    src_half: bool,
    layout: ArrayLayout,
    aligned: bool,
) -> Result<ComplexArray> {
    let natoms = src.view().natoms;
    let full = ctx.u_full_len();
    let view = LayoutView::new(natoms, full, layout)?;
    let mut out = ComplexArray::zeros(view, aligned);
    let w = DisjointWriter::new(out.data_mut());
    let nsrc = src.view().nidx;
    (0..natoms).into_par_iter().for_each_init(
        || (vec![ZERO; nsrc], vec![ZERO; full]),
        |(local, expanded), a| {
            let s = src.atom(a);
            for (i, v) in local.iter_mut().enumerate() {
                let (r, m) = s.at(i);
                *v = Complex64::new(r, m);
            }
            let values: &[Complex64] = if src_half {
                expand_stack_into(&ctx.maps, local, expanded);
                expanded
            } else {
                local
            };
            write_atom(&w, &view, a, as_f64(values));
        },
    );
    Ok(out)
}

/// Y and B with one task per atom, scattering Z entries into Y.
pub fn compute_y_scatter(
    ctx: &SnapContext,
    u: &ComplexArray,
    y: &mut ComplexArray,
    blist: &mut [f64],
) {
    let nh = ctx.u_half_len();
    let nb = ctx.n_bispectrum();
    let yview = *y.view();
    let w = DisjointWriter::new(y.data_mut());
    blist
        .par_chunks_mut(nb.max(1))
        .enumerate()
        .for_each_init(
            || vec![0.0; 2 * nh],
            |ylocal, (a, b)| {
                ylocal.fill(0.0);
                kernels::y_atom(ctx, &u.atom(a), ylocal, b);
                write_atom(&w, &yview, a, ylocal);
            },
        );
}

/// Y with one task per (atom, element), gathering the Z entries that target
/// it, followed by a separate B pass.
pub fn compute_y_gather(
    ctx: &SnapContext,
    u: &ComplexArray,
    y: &mut ComplexArray,
    blist: &mut [f64],
) {
    let nh = ctx.u_half_len();
    let nb = ctx.n_bispectrum();
    let natoms = u.view().natoms;
    let yview = *y.view();
    let w = DisjointWriter::new(y.data_mut());
    (0..natoms * nh).into_par_iter().for_each(|flat| {
        let (a, h) = (flat / nh, flat % nh);
        let (yr, yi) = kernels::y_element(ctx, &u.atom(a), h);
        let (re, im) = yview.slot(a, h);
        // SAFETY: each (atom, element) slot is written by exactly one task.
        unsafe {
            w.write(re, yr);
            w.write(im, yi);
        }
    });
    blist
        .par_chunks_mut(nb.max(1))
        .enumerate()
        .for_each(|(a, b)| kernels::b_atom(ctx, &u.atom(a), b));
}

/// Y and B one AoSoA tile at a time, every lane advancing in lockstep.
pub fn compute_y_tiles(
    ctx: &SnapContext,
    u: &ComplexArray,
    y: &mut ComplexArray,
    blist: &mut [f64],
) {
    let tile = u.view().layout.tile().expect("AoSoA totals");
    let nfull = ctx.u_full_len();
    let nh = ctx.u_half_len();
    let nb = ctx.n_bispectrum();
    let natoms = u.view().natoms;
    let uplane = u.view().plane_len();
    let ud = u.data();
    let (ure, uim) = ud.split_at(uplane);
    let yplane = y.view().plane_len();
    let (yre, yim) = y.data_mut().split_at_mut(yplane);
    let bw = DisjointWriter::new(blist);
    yre.par_chunks_mut(nh * tile)
        .zip(yim.par_chunks_mut(nh * tile))
        .enumerate()
        .for_each(|(block, (yr, yi))| {
            let ur = &ure[block * nfull * tile..(block + 1) * nfull * tile];
            let ui = &uim[block * nfull * tile..(block + 1) * nfull * tile];
            let mut bt = vec![0.0; nb * tile];
            y_tile(ctx, tile, ur, ui, yr, yi, &mut bt);
            for lane in 0..tile {
                let a = block * tile + lane;
                if a >= natoms {
                    break;
                }
                for l in 0..nb {
                    // SAFETY: each atom's B row is written by its own tile.
                    unsafe { bw.write(a * nb + l, bt[l * tile + lane]) };
                }
            }
        });
}

#[allow(clippy::too_many_arguments)]
fn y_tile(
    ctx: &SnapContext,
    tile: usize,
    ur: &[f64],
    ui: &[f64],
    yr: &mut [f64],
    yi: &mut [f64],
    bt: &mut [f64],
) {
    yr.fill(0.0);
    yi.fill(0.0);
    let mut zr = vec![0.0; tile];
    let mut zi = vec![0.0; tile];
    let mut sr = vec![0.0; tile];
    let mut si = vec![0.0; tile];
    let mut bsum = vec![0.0; tile];
    let entries = ctx.maps.z_entries();
    for (c, &betaj) in ctx.betaj.iter().enumerate() {
        let cg = ctx.cg.block(c);
        let canon = ctx.canonical[c];
        bsum.fill(0.0);
        for e in &entries[ctx.maps.z_block_offset(c)..ctx.maps.z_block_offset(c + 1)] {
            let (j1, j2) = (e.twoj1 as usize, e.twoj2 as usize);
            let mut jju1 = ctx.maps.u_block_offset(e.twoj1) + (j1 + 1) * e.row1_min as usize;
            let mut jju2 = ctx.maps.u_block_offset(e.twoj2) + (j2 + 1) * e.row2_max as usize;
            let mut icgb = e.row1_min as usize * (j2 + 1) + e.row2_max as usize;
            zr.fill(0.0);
            zi.fill(0.0);
            for _ in 0..e.nrow {
                sr.fill(0.0);
                si.fill(0.0);
                let mut ma1 = jju1 + e.col1_min as usize;
                let mut ma2 = jju2 + e.col2_max as usize;
                let mut icga = e.col1_min as usize * (j2 + 1) + e.col2_max as usize;
                for _ in 0..e.ncol {
                    let cga = cg[icga];
                    let (a_r, a_i) = (&ur[ma1 * tile..][..tile], &ui[ma1 * tile..][..tile]);
                    let (b_r, b_i) = (&ur[ma2 * tile..][..tile], &ui[ma2 * tile..][..tile]);
                    for l in 0..tile {
                        sr[l] += cga * (a_r[l] * b_r[l] - a_i[l] * b_i[l]);
                        si[l] += cga * (a_r[l] * b_i[l] + a_i[l] * b_r[l]);
                    }
                    ma1 += 1;
                    ma2 = ma2.wrapping_sub(1);
                    icga += j2;
                }
                let cgb = cg[icgb];
                for l in 0..tile {
                    zr[l] += cgb * sr[l];
                    zi[l] += cgb * si[l];
                }
                jju1 += j1 + 1;
                jju2 = jju2.wrapping_sub(j2 + 1);
                icgb += j2;
            }
            let h = e.u_half as usize * tile;
            for l in 0..tile {
                yr[h + l] += betaj * zr[l];
                yi[h + l] += betaj * zi[l];
            }
            if canon.is_some() {
                let t = e.twoj as usize;
                let (row, col) = (e.row as usize, e.col as usize);
                let f = e.u_full as usize * tile;
                let weight = if t % 2 == 1 || 2 * row < t || col < row {
                    2
                } else if col == row {
                    1
                } else {
                    0
                };
                for l in 0..tile {
                    let (a, b) = (ur[f + l], ui[f + l]);
                    match weight {
                        2 => bsum[l] += a * zr[l] + b * zi[l],
                        1 => bsum[l] += (a * zr[l] + b * zi[l]) * 0.5,
                        _ => {}
                    }
                }
            }
        }
        if let Some(bi) = canon {
            for l in 0..tile {
                bt[bi * tile + l] = 2.0 * bsum[l];
            }
        }
    }
}

/// Weighted derivative stacks for every pair, `[dir][full index]` per row.
pub fn compute_dulist(
    ctx: &SnapContext,
    problem: &Problem,
    ulist: &PairArray,
    dirs: &[usize],
    dulist: &mut PairArray,
) -> Result<()> {
    let full = ctx.u_full_len();
    let shape = dulist.shape();
    dulist
        .data
        .par_chunks_mut((3 * full).max(1))
        .enumerate()
        .try_for_each(|(row, out)| -> Result<()> {
            if let Some(p) = shape.pair_of(problem, row) {
                let g = pair_geom(ctx, problem, p)?;
                let u = ulist.row(problem, p);
                for &k in dirs {
                    kernels::du_pair(ctx, &g, u, k, &mut out[k * full..(k + 1) * full]);
                }
            }
            Ok(())
        })
}

/// Force contributions from stored dU stacks and Y.
pub fn contract_dulist(
    ctx: &SnapContext,
    problem: &Problem,
    dulist: &PairArray,
    y: &ComplexArray,
    dirs: &[usize],
    delist: &mut [[f64; 3]],
) {
    let full = ctx.u_full_len();
    let w = DisjointWriter::new(flatten_mut(delist));
    (0..dulist.rows()).into_par_iter().for_each(|row| {
        let Some(p) = dulist.pair_of(problem, row) else {
            return;
        };
        let du = &dulist.data[row * 3 * full..(row + 1) * 3 * full];
        let yv = y.atom(problem.owner(p));
        for &k in dirs {
            let v = kernels::de_dir(ctx, as_f64(&du[k * full..(k + 1) * full]), &yv);
            // SAFETY: each pair's slots are written by one task.
            unsafe { w.write(3 * p + k, v) };
        }
    });
}

/// Force contributions recomputing u and dU per pair; nothing per-pair is stored.
pub fn compute_fused_de(
    ctx: &SnapContext,
    problem: &Problem,
    y: &ComplexArray,
    dirs: &[usize],
    delist: &mut [[f64; 3]],
) -> Result<()> {
    let full = ctx.u_full_len();
    let w = DisjointWriter::new(flatten_mut(delist));
    (0..problem.npairs()).into_par_iter().try_for_each_init(
        || (vec![ZERO; full], vec![ZERO; full]),
        |(u, du), p| -> Result<()> {
            let g = pair_geom(ctx, problem, p)?;
            kernels::u_pair(ctx, &g, u);
            let yv = y.atom(problem.owner(p));
            for &k in dirs {
                kernels::du_pair(ctx, &g, u, k, du);
                let v = kernels::de_dir(ctx, as_f64(du), &yv);
                // SAFETY: each pair's slots are written by one task.
                unsafe { w.write(3 * p + k, v) };
            }
            Ok(())
        },
    )
}

/// The baseline pipeline, one task per atom: totals, Z, B, then per
/// neighbor dU, dB and the force contribution.
pub fn baseline_atoms(
    ctx: &SnapContext,
    problem: &Problem,
    ulisttot: &mut ComplexArray,
    zlist: &mut ComplexArray,
    blist: &mut [f64],
    delist: &mut [[f64; 3]],
) -> Result<()> {
    let full = ctx.u_full_len();
    let nz = ctx.maps.z_len();
    let nb = ctx.n_bispectrum();
    let wself = problem.params.self_weight();
    let beta = &problem.params.beta;
    let uview = *ulisttot.view();
    let zview = *zlist.view();
    let uw = DisjointWriter::new(ulisttot.data_mut());
    let zw = DisjointWriter::new(zlist.data_mut());
    let bw = DisjointWriter::new(blist);
    let dw = DisjointWriter::new(flatten_mut(delist));
    (0..problem.natoms()).into_par_iter().try_for_each_init(
        || {
            (
                vec![0.0; 2 * full],
                vec![0.0; 2 * nz],
                Vec::<Complex64>::new(),
                vec![ZERO; full],
                vec![0.0; nb],
                vec![0.0; nb],
            )
        },
        |(tot, z, us, du, b, db), a| -> Result<()> {
            let range = problem.neighbors.range(a);
            us.resize(range.len() * full, ZERO);
            let mut geoms = Vec::with_capacity(range.len());
            kernels::init_total(ctx, false, wself, tot);
            for (s, p) in range.clone().enumerate() {
                let g = pair_geom(ctx, problem, p)?;
                let u = &mut us[s * full..(s + 1) * full];
                kernels::u_pair(ctx, &g, u);
                kernels::add_scaled(tot, u, g.sfac, full);
                geoms.push(g);
            }
            write_atom(&uw, &uview, a, tot);
            let uv = Strided::interleaved(tot);
            kernels::z_atom(ctx, &uv, z);
            write_atom(&zw, &zview, a, z);
            kernels::b_from_z(ctx, &uv, z, b);
            for (l, v) in b.iter().enumerate() {
                // SAFETY: atom rows of B are disjoint.
                unsafe { bw.write(a * nb + l, *v) };
            }
            for (s, p) in range.enumerate() {
                let u = &us[s * full..(s + 1) * full];
                for k in 0..3 {
                    kernels::du_pair(ctx, &geoms[s], u, k, du);
                    kernels::db_pair(ctx, z, as_f64(du), db);
                    let mut de = 0.0;
                    for (bl, dbl) in beta.iter().zip(db.iter()) {
                        de += bl * dbl;
                    }
                    // SAFETY: each pair's slots are written by its atom's task.
                    unsafe { dw.write(3 * p + k, de) };
                }
            }
            Ok(())
        },
    )
}

/// Stored Z entries for every atom from full-storage totals.
pub fn compute_z(ctx: &SnapContext, ulisttot: &ComplexArray) -> Result<ComplexArray> {
    let natoms = ulisttot.view().natoms;
    let nz = ctx.maps.z_len();
    let view = LayoutView::new(natoms, nz, ArrayLayout::IndexFastest)?;
    let mut z = ComplexArray::zeros(view, true);
    let w = DisjointWriter::new(z.data_mut());
    (0..natoms).into_par_iter().for_each_init(
        || vec![0.0; 2 * nz],
        |local, a| {
            kernels::z_atom(ctx, &ulisttot.atom(a), local);
            write_atom(&w, &view, a, local);
        },
    );
    Ok(z)
}

/// B for every atom from stored Z.
pub fn compute_b(ctx: &SnapContext, ulisttot: &ComplexArray, zlist: &ComplexArray) -> Vec<f64> {
    let natoms = ulisttot.view().natoms;
    let nb = ctx.n_bispectrum();
    let nz = ctx.maps.z_len();
    let mut blist = vec![0.0; natoms * nb];
    blist
        .par_chunks_mut(nb.max(1))
        .enumerate()
        .for_each_init(
            || vec![0.0; 2 * nz],
            |z, (a, b)| {
                let zv = zlist.atom(a);
                for (i, c) in z.chunks_exact_mut(2).enumerate() {
                    let (r, m) = zv.at(i);
                    c[0] = r;
                    c[1] = m;
                }
                kernels::b_from_z(ctx, &ulisttot.atom(a), z, b);
            },
        );
    blist
}

/// Largest `|Im(sum conj(U) Z)| / max(1, |B|)` over every atom and component,
/// with its location.
pub fn bispectrum_imag_residue(
    ctx: &SnapContext,
    ulisttot: &ComplexArray,
) -> (f64, usize, usize) {
    let natoms = ulisttot.view().natoms;
    (0..natoms)
        .into_par_iter()
        .map(|a| {
            let u = ulisttot.atom(a);
            let mut worst = (0.0, a, 0);
            for (c, canon) in ctx.canonical.iter().enumerate() {
                let Some(bi) = *canon else { continue };
                let (re, im) = kernels::b_full_block(ctx, c, &u);
                let rel = im.abs() / re.abs().max(1.0);
                if rel > worst.0 {
                    worst = (rel, a, bi);
                }
            }
            worst
        })
        .reduce(|| (0.0, 0, 0), |x, y| if y.0 > x.0 { y } else { x })
}

/// Per-atom and total energy.
pub fn compute_energy(blist: &[f64], beta: &[f64]) -> Result<(Vec<f64>, f64)> {
    let nb = beta.len();
    if nb == 0 || blist.len() % nb != 0 {
        return Err(crate::error::SnapError::SizeMismatch {
            what: "blist rows",
            expected: nb,
            got: blist.len(),
        });
    }
    let per_atom: Vec<f64> = blist
        .chunks_exact(nb)
        .map(|b| {
            let mut e = 0.0;
            for (bl, x) in beta.iter().zip(b) {
                e += bl * x;
            }
            e
        })
        .collect();
    let total = per_atom.iter().sum();
    Ok((per_atom, total))
}

/// Neighbor derivatives of every bispectrum component, `[pair][dir][component]`.
pub fn compute_db(
    ctx: &SnapContext,
    problem: &Problem,
    zlist: &ComplexArray,
    dulist: &PairArray,
) -> Vec<f64> {
    let nb = ctx.n_bispectrum();
    let full = ctx.u_full_len();
    let nz = ctx.maps.z_len();
    let mut out = vec![0.0; problem.npairs() * 3 * nb];
    out.par_chunks_mut((3 * nb).max(1))
        .enumerate()
        .for_each_init(
            || vec![0.0; 2 * nz],
            |z, (p, o)| {
                let zv = zlist.atom(problem.owner(p));
                for (i, c) in z.chunks_exact_mut(2).enumerate() {
                    let (r, m) = zv.at(i);
                    c[0] = r;
                    c[1] = m;
                }
                let du = dulist.row(problem, p);
                for k in 0..3 {
                    kernels::db_pair(
                        ctx,
                        z,
                        as_f64(&du[k * full..(k + 1) * full]),
                        &mut o[k * nb..(k + 1) * nb],
                    );
                }
            },
        );
    out
}

/// `dE(i,k) = sum_l beta_l dB_l/dr_k` from a `[pair][dir][component]` table.
pub fn update_forces_baseline(problem: &Problem, dblist: &[f64], beta: &[f64]) -> Vec<[f64; 3]> {
    let nb = beta.len();
    (0..problem.npairs())
        .map(|p| {
            let mut de = [0.0; 3];
            for (k, d) in de.iter_mut().enumerate() {
                let row = &dblist[(3 * p + k) * nb..(3 * p + k + 1) * nb];
                for (bl, x) in beta.iter().zip(row) {
                    *d += bl * x;
                }
            }
            de
        })
        .collect()
}

/// Forces from per-pair contributions: `F_i += dE(i,k)`, `F_k -= dE(i,k)`.
pub fn assemble_forces(problem: &Problem, delist: &[[f64; 3]], reduction: Reduction) -> Vec<[f64; 3]> {
    let n = problem.natoms();
    let mut forces = vec![[0.0; 3]; n];
    match reduction {
        Reduction::Ordered => {
            forces.par_iter_mut().enumerate().for_each(|(a, f)| {
                let own = problem.neighbors.range(a);
                let rev = problem.reverse_pairs(a);
                let (mut i, mut j) = (own.start, 0);
                while i < own.end || j < rev.len() {
                    if j >= rev.len() || (i < own.end && i < rev[j]) {
                        for k in 0..3 {
                            f[k] += delist[i][k];
                        }
                        i += 1;
                    } else {
                        for k in 0..3 {
                            f[k] -= delist[rev[j]][k];
                        }
                        j += 1;
                    }
                }
            });
        }
        Reduction::Concurrent => {
            let adder = AtomicAdder::new(flatten_mut(&mut forces));
            (0..problem.npairs()).into_par_iter().for_each(|p| {
                let (i, k) = (problem.owner(p), problem.neighbors.index[p]);
                for d in 0..3 {
                    adder.add(3 * i + d, delist[p][d]);
                    adder.add(3 * k + d, -delist[p][d]);
                }
            });
        }
    }
    forces
}

/// Reference serial loop over pairs.
pub fn assemble_forces_serial(problem: &Problem, delist: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut forces = vec![[0.0; 3]; problem.natoms()];
    for (p, de) in delist.iter().enumerate() {
        let (i, k) = (problem.owner(p), problem.neighbors.index[p]);
        for d in 0..3 {
            forces[i][d] += de[d];
            forces[k][d] -= de[d];
        }
    }
    forces
}

pub fn flatten_mut(v: &mut [[f64; 3]]) -> &mut [f64] {
    // SAFETY: [f64; 3] has no padding.
    unsafe { std::slice::from_raw_parts_mut(v.as_mut_ptr() as *mut f64, 3 * v.len()) }
}

/// Half-storage totals of one atom expanded to full storage (testing aid).
pub fn expand_atom_total(ctx: &SnapContext, half: &[Complex64]) -> Vec<Complex64> {
    let mut full = vec![ZERO; ctx.u_full_len()];
    expand_stack_into(&ctx.maps, half, &mut full);
    full
}

/// Full Wigner stack of one pair in a flat interleaved buffer (testing aid).
pub fn pair_u_interleaved(ctx: &SnapContext, problem: &Problem, p: usize) -> Result<Vec<f64>> {
    let g = pair_geom(ctx, problem, p)?;
    let mut u = vec![ZERO; ctx.u_full_len()];
    kernels::u_pair(ctx, &g, &mut u);
    Ok(as_f64(&u).to_vec())
}

//! Per-atom and per-pair arithmetic shared by every execution variant.
//!
//! Every routine here fixes its floating-point operation order, so two
//! variants that call the same kernels on the same values produce bitwise
//! identical results regardless of how their arrays are laid out.

use num_complex::Complex64;

use crate::angular::{
    compute_cg_table, map_to_3sphere, switching_function, CgTable, SphereMap, WignerRecursion,
};
use crate::error::Result;
use crate::halfint::{coupling_window, half_block_len, HalfIntIndexMaps, ZEntry};
use crate::snap::problem::{Problem, SnapParams};

/// Read-only view of a complex sequence inside a flat `f64` buffer.
#[derive(Clone, Copy)]
pub struct Strided<'a> {
    pub data: &'a [f64],
    pub re: usize,
    pub im: usize,
    pub stride: usize,
}

impl<'a> Strided<'a> {
    pub fn interleaved(data: &'a [f64]) -> Self {
        Self {
            data,
            re: 0,
            im: 1,
            stride: 2,
        }
    }

    #[inline(always)]
    pub fn at(&self, i: usize) -> (f64, f64) {
        (
            self.data[self.re + i * self.stride],
            self.data[self.im + i * self.stride],
        )
    }

    /// The same view shifted by `i` elements.
    pub fn offset(&self, i: usize) -> Self {
        Self {
            data: self.data,
            re: self.re + i * self.stride,
            im: self.im + i * self.stride,
            stride: self.stride,
        }
    }
}

/// Terms of the neighbor-derivative of one bispectrum component: for each of
/// the three roles, the coupling block of Z, the level of dU it pairs with,
/// and the normalization factor.
#[derive(Debug, Clone, Copy)]
pub struct DbTerms {
    pub terms: [(usize, u32, f64); 3],
}

/// Immutable tables for one parameter set.
#[derive(Debug, Clone)]
pub struct SnapContext {
    pub maps: HalfIntIndexMaps,
    pub cg: CgTable,
    pub rec: WignerRecursion,
    /// Coupling-block coefficient of Y, one per coupling triple.
    pub betaj: Vec<f64>,
    /// Bispectrum index of coupling triples that are canonical (`twoj >= twoj1`).
    pub canonical: Vec<Option<usize>>,
    pub db_terms: Vec<DbTerms>,
    pub rcut: f64,
    pub rmin0: f64,
    pub rfac0: f64,
}

/// Canonical bispectrum triple and multiplicity factor for every coupling
/// triple, as used to fold all role permutations into Y.
pub fn y_multiplicity(maps: &HalfIntIndexMaps) -> Vec<(usize, f64)> {
    maps.coupling_triples()
        .iter()
        .map(|t| {
            let (j1, j2, j) = (t.twoj1, t.twoj2, t.twoj);
            if j >= j1 {
                let b = maps.bispectrum_index(j1, j2, j).expect("canonical triple");
                let f = if j1 == j {
                    if j2 == j {
                        3.0
                    } else {
                        2.0
                    }
                } else {
                    1.0
                };
                (b, f)
            } else if j >= j2 {
                let b = maps.bispectrum_index(j, j2, j1).expect("canonical triple");
                let f = if j2 == j { 2.0 } else { 1.0 };
                (b, f * (j1 + 1) as f64 / (j + 1) as f64)
            } else {
                let b = maps.bispectrum_index(j2, j, j1).expect("canonical triple");
                (b, (j1 + 1) as f64 / (j + 1) as f64)
            }
        })
        .collect()
}

impl SnapContext {
    pub fn new(params: &SnapParams) -> Result<Self> {
        params.validate()?;
        let maps = HalfIntIndexMaps::new(params.twojmax);
        let cg = compute_cg_table(params.twojmax, &maps)?;
        let rec = WignerRecursion::new(params.twojmax);
        let betaj = y_multiplicity(&maps)
            .into_iter()
            .map(|(b, f)| params.beta[b] * f)
            .collect();
        let canonical = maps
            .coupling_triples()
            .iter()
            .map(|t| maps.bispectrum_index(t.twoj1, t.twoj2, t.twoj))
            .collect();
        let db_terms = maps
            .bispectrum_triples()
            .iter()
            .map(|t| {
                let (j1, j2, j) = (t.twoj1, t.twoj2, t.twoj);
                let c1 = maps.coupling_index(j1, j2, j).expect("coupling");
                let c2 = maps.coupling_index(j, j2, j1).expect("coupling");
                let c3 = maps.coupling_index(j, j1, j2).expect("coupling");
                DbTerms {
                    terms: [
                        (c1, j, 1.0),
                        (c2, j1, (j + 1) as f64 / (j1 + 1) as f64),
                        (c3, j2, (j + 1) as f64 / (j2 + 1) as f64),
                    ],
                }
            })
            .collect();
        Ok(Self {
            maps,
            cg,
            rec,
            betaj,
            canonical,
            db_terms,
            rcut: params.rcut,
            rmin0: params.rmin0,
            rfac0: params.rfac0,
        })
    }

    pub fn n_bispectrum(&self) -> usize {
        self.maps.n_bispectrum()
    }

    pub fn u_full_len(&self) -> usize {
        self.maps.u_full_len()
    }

    pub fn u_half_len(&self) -> usize {
        self.maps.u_half_len()
    }
}

/// Mapped geometry and weighted switching factors of one pair.
#[derive(Debug, Clone, Copy)]
pub struct PairGeom {
    pub map: SphereMap,
    pub sfac: f64,
    pub dsfac: f64,
}

pub fn pair_geom(ctx: &SnapContext, problem: &Problem, p: usize) -> Result<PairGeom> {
    let d = problem.neighbors.displacement[p];
    let map = map_to_3sphere(d, ctx.rcut, ctx.rmin0, ctx.rfac0)?;
    let (fc, dfc) = switching_function(map.r, ctx.rcut, ctx.rmin0)?;
    let w = problem.pair_weight(p);
    Ok(PairGeom {
        map,
        sfac: w * fc,
        dsfac: w * dfc,
    })
}

/// Writes the self term (zeros plus `wself` on each diagonal) into an
/// interleaved per-atom total of `len` elements, full or half storage.
pub fn init_total(ctx: &SnapContext, half: bool, wself: f64, tot: &mut [f64]) {
    tot.fill(0.0);
    for t in ctx.maps.twojmax().levels() {
        let n = t as usize + 1;
        let (off, rows) = if half {
            (ctx.maps.u_half_offset(t), t as usize / 2 + 1)
        } else {
            (ctx.maps.u_block_offset(t), n)
        };
        for m in 0..rows {
            tot[2 * (off + m * n + m)] = wself;
        }
    }
}

/// `tot += sfac * u` over the first `len` elements.
#[inline]
pub fn add_scaled(tot: &mut [f64], u: &[Complex64], sfac: f64, len: usize) {
    for (t, v) in tot[..2 * len].chunks_exact_mut(2).zip(&u[..len]) {
        t[0] += v.re * sfac;
        t[1] += v.im * sfac;
    }
}

/// `sfac * u` for a half-storage total, taken level by level from a full stack.
#[inline]
pub fn add_scaled_half(ctx: &SnapContext, tot: &mut [f64], u: &[Complex64], sfac: f64) {
    for t in ctx.maps.twojmax().levels() {
        let h = ctx.maps.u_half_offset(t);
        let f = ctx.maps.u_block_offset(t);
        let len = half_block_len(t);
        add_scaled(&mut tot[2 * h..], &u[f..], sfac, len);
    }
}

/// One element of a Clebsch-Gordan product block, read from full-storage totals.
#[inline]
pub fn z_entry(ctx: &SnapContext, e: &ZEntry, u: &Strided) -> (f64, f64) {
    let cg = ctx.cg.block(e.coupling as usize);
    let (j1, j2) = (e.twoj1 as usize, e.twoj2 as usize);
    let off1 = ctx.maps.u_block_offset(e.twoj1);
    let off2 = ctx.maps.u_block_offset(e.twoj2);
    z_sum(
        cg,
        u,
        off1 + (j1 + 1) * e.row1_min as usize,
        off2 + (j2 + 1) * e.row2_max as usize,
        j1,
        j2,
        e.row1_min as usize * (j2 + 1) + e.row2_max as usize,
        e.nrow as usize,
        e.col1_min as usize,
        e.col2_max as usize,
        e.ncol as usize,
    )
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn z_sum(
    cg: &[f64],
    u: &Strided,
    mut jju1: usize,
    mut jju2: usize,
    j1: usize,
    j2: usize,
    mut icgb: usize,
    nb: usize,
    ma1min: usize,
    ma2max: usize,
    na: usize,
) -> (f64, f64) {
    let (mut zr, mut zi) = (0.0, 0.0);
    for _ in 0..nb {
        let (mut sr, mut si) = (0.0, 0.0);
        let mut ma1 = jju1 + ma1min;
        let mut ma2 = jju2 + ma2max;
        let mut icga = ma1min * (j2 + 1) + ma2max;
        for _ in 0..na {
            let (u1r, u1i) = u.at(ma1);
            let (u2r, u2i) = u.at(ma2);
            sr += cg[icga] * (u1r * u2r - u1i * u2i);
            si += cg[icga] * (u1r * u2i + u1i * u2r);
            ma1 += 1;
            ma2 = ma2.wrapping_sub(1);
            icga += j2;
        }
        zr += cg[icgb] * sr;
        zi += cg[icgb] * si;
        jju1 += j1 + 1;
        jju2 = jju2.wrapping_sub(j2 + 1);
        icgb += j2;
    }
    (zr, zi)
}

/// Weight of element `(row, col)` of level `twoj` in a half-block contraction.
#[inline(always)]
fn half_weight(twoj: usize, row: usize, col: usize) -> u8 {
    if twoj % 2 == 1 || 2 * row < twoj || col < row {
        2
    } else if col == row {
        1
    } else {
        0
    }
}

#[inline(always)]
fn accumulate_weighted(sum: &mut f64, w: u8, ar: f64, ai: f64, br: f64, bi: f64) {
    match w {
        2 => *sum += ar * br + ai * bi,
        1 => *sum += (ar * br + ai * bi) * 0.5,
        _ => {}
    }
}

/// `sum_{half block} Re(conj(x) y)` with the middle row of even levels
/// counted once, so that twice the result is the full-block contraction.
#[inline]
pub fn half_contract(twoj: u32, x: &Strided, y: &Strided, sum: &mut f64) {
    let t = twoj as usize;
    let n = t + 1;
    let full = (t + 1) / 2 * n;
    for i in 0..full {
        let (ar, ai) = x.at(i);
        let (br, bi) = y.at(i);
        *sum += ar * br + ai * bi;
    }
    if t % 2 == 0 {
        let mid = t / 2;
        for c in 0..=mid {
            let (ar, ai) = x.at(mid * n + c);
            let (br, bi) = y.at(mid * n + c);
            accumulate_weighted(sum, half_weight(t, mid, c), ar, ai, br, bi);
        }
    }
}

/// Y (half storage, interleaved, zeroed by the caller) and B for one atom,
/// scattering every Z entry into its target element in entry order.
pub fn y_atom(ctx: &SnapContext, u: &Strided, y: &mut [f64], b: &mut [f64]) {
    let entries = ctx.maps.z_entries();
    for (c, &betaj) in ctx.betaj.iter().enumerate() {
        let range = ctx.maps.z_block_offset(c)..ctx.maps.z_block_offset(c + 1);
        let canon = ctx.canonical[c];
        let mut bsum = 0.0;
        for e in &entries[range] {
            let (zr, zi) = z_entry(ctx, e, u);
            let h = e.u_half as usize;
            y[2 * h] += betaj * zr;
            y[2 * h + 1] += betaj * zi;
            if canon.is_some() {
                let (ur, ui) = u.at(e.u_full as usize);
                let w = half_weight(e.twoj as usize, e.row as usize, e.col as usize);
                accumulate_weighted(&mut bsum, w, ur, ui, zr, zi);
            }
        }
        if let Some(bi) = canon {
            b[bi] = 2.0 * bsum;
        }
    }
}

/// One element of Y gathered from the Z entries that target it.
pub fn y_element(ctx: &SnapContext, u: &Strided, half_index: usize) -> (f64, f64) {
    let entries = ctx.maps.z_entries();
    let (mut yr, mut yi) = (0.0, 0.0);
    for &iz in ctx.maps.y_targets(half_index) {
        let e = &entries[iz as usize];
        let (zr, zi) = z_entry(ctx, e, u);
        let betaj = ctx.betaj[e.coupling as usize];
        yr += betaj * zr;
        yi += betaj * zi;
    }
    (yr, yi)
}

/// B for one atom, recomputing the canonical Z blocks.
pub fn b_atom(ctx: &SnapContext, u: &Strided, b: &mut [f64]) {
    let entries = ctx.maps.z_entries();
    for (c, canon) in ctx.canonical.iter().enumerate() {
        let Some(bi) = *canon else { continue };
        let mut bsum = 0.0;
        for e in &entries[ctx.maps.z_block_offset(c)..ctx.maps.z_block_offset(c + 1)] {
            let (zr, zi) = z_entry(ctx, e, u);
            let (ur, ui) = u.at(e.u_full as usize);
            let w = half_weight(e.twoj as usize, e.row as usize, e.col as usize);
            accumulate_weighted(&mut bsum, w, ur, ui, zr, zi);
        }
        b[bi] = 2.0 * bsum;
    }
}

/// All Z entries of one atom, interleaved.
pub fn z_atom(ctx: &SnapContext, u: &Strided, z: &mut [f64]) {
    for (iz, e) in ctx.maps.z_entries().iter().enumerate() {
        let (zr, zi) = z_entry(ctx, e, u);
        z[2 * iz] = zr;
        z[2 * iz + 1] = zi;
    }
}

/// B for one atom from its stored Z entries.
pub fn b_from_z(ctx: &SnapContext, u: &Strided, z: &[f64], b: &mut [f64]) {
    for (c, canon) in ctx.canonical.iter().enumerate() {
        let Some(bi) = *canon else { continue };
        let t = ctx.maps.coupling_triples()[c].twoj;
        let mut bsum = 0.0;
        half_contract(
            t,
            &u.offset(ctx.maps.u_block_offset(t)),
            &Strided::interleaved(z).offset(ctx.maps.z_block_offset(c)),
            &mut bsum,
        );
        b[bi] = 2.0 * bsum;
    }
}

/// Neighbor derivative of every bispectrum component along one direction,
/// from the stored Z entries of the central atom and one full dU stack.
pub fn db_pair(ctx: &SnapContext, z: &[f64], du: &[f64], out: &mut [f64]) {
    let zv = Strided::interleaved(z);
    let duv = Strided::interleaved(du);
    for (l, terms) in ctx.db_terms.iter().enumerate() {
        let mut db = 0.0;
        for (k, &(c, level, fac)) in terms.terms.iter().enumerate() {
            let mut s = 0.0;
            half_contract(
                level,
                &duv.offset(ctx.maps.u_block_offset(level)),
                &zv.offset(ctx.maps.z_block_offset(c)),
                &mut s,
            );
            if k == 0 {
                db = 2.0 * s;
            } else {
                db += 2.0 * s * fac;
            }
        }
        out[l] = db;
    }
}

/// `dE/dr` along one direction: twice the half contraction of a full dU
/// stack with the central atom's Y.
pub fn de_dir(ctx: &SnapContext, du: &[f64], y: &Strided) -> f64 {
    let duv = Strided::interleaved(du);
    let mut sum = 0.0;
    for t in ctx.maps.twojmax().levels() {
        half_contract(
            t,
            &duv.offset(ctx.maps.u_block_offset(t)),
            &y.offset(ctx.maps.u_half_offset(t)),
            &mut sum,
        );
    }
    2.0 * sum
}

/// Raw Wigner stack for one pair.
#[inline]
pub fn u_pair(ctx: &SnapContext, g: &PairGeom, u: &mut [Complex64]) {
    ctx.rec.compute_u(g.map.a, g.map.b, u);
}

/// Weighted derivative stack of one pair along `dir`.
#[inline]
pub fn du_pair(ctx: &SnapContext, g: &PairGeom, u: &[Complex64], dir: usize, du: &mut [Complex64]) {
    ctx.rec
        .compute_du_weighted(&g.map, u, g.sfac, g.dsfac, dir, du);
}

/// Reinterprets a complex slice as interleaved `f64`.
pub fn as_f64(v: &[Complex64]) -> &[f64] {
    // SAFETY: Complex<f64> is #[repr(C)] with two f64 fields.
    unsafe { std::slice::from_raw_parts(v.as_ptr() as *const f64, 2 * v.len()) }
}

pub fn as_f64_mut(v: &mut [Complex64]) -> &mut [f64] {
    // SAFETY: as above.
    unsafe { std::slice::from_raw_parts_mut(v.as_mut_ptr() as *mut f64, 2 * v.len()) }
}

/// Full-row Z block of a canonical triple and its contraction with
/// `conj(U_j)`; returns `(Re, Im)` of the full-block sum.
pub fn b_full_block(ctx: &SnapContext, c: usize, u: &Strided) -> (f64, f64) {
    let t = ctx.maps.coupling_triples()[c];
    let (j1, j2, j) = (t.twoj1 as usize, t.twoj2 as usize, t.twoj as usize);
    let cg = ctx.cg.block(c);
    let off = ctx.maps.u_block_offset(t.twoj);
    let off1 = ctx.maps.u_block_offset(t.twoj1);
    let off2 = ctx.maps.u_block_offset(t.twoj2);
    let (mut re, mut im) = (0.0, 0.0);
    for row in 0..=j {
        let (mb1min, mb2max, nb) = coupling_window(t.twoj1, t.twoj2, t.twoj, row as u32);
        for col in 0..=j {
            let (ma1min, ma2max, na) = coupling_window(t.twoj1, t.twoj2, t.twoj, col as u32);
            let (zr, zi) = z_sum(
                cg,
                u,
                off1 + (j1 + 1) * mb1min as usize,
                off2 + (j2 + 1) * mb2max as usize,
                j1,
                j2,
                mb1min as usize * (j2 + 1) + mb2max as usize,
                nb as usize,
                ma1min as usize,
                ma2max as usize,
                na as usize,
            );
            let (ur, ui) = u.at(off + row * (j + 1) + col);
            re += ur * zr + ui * zi;
            im += ur * zi - ui * zr;
        }
    }
    (re, im)
}

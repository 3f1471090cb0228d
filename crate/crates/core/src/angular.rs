//! Hyperspherical basis: the 3-sphere mapping, the Wigner-matrix recursion
//! and its Cartesian derivative, the switching function, and the
//! Clebsch-Gordan table.
//!
//! The Wigner blocks follow the row-major convention documented in
//! [`crate::halfint`]. For `twoj = 1` the block is
//!
//! ```text
//! [ conj(a)  -conj(b) ]
//! [   b          a    ]
//! ```
//!
//! and every higher level is built from the previous one by
//!
//! ```text
//! u_j[r][c] = sqrt((2j-c)/(2j-r)) conj(a) u_{j-1/2}[r][c]
//!           - sqrt(c/(2j-r))      conj(b) u_{j-1/2}[r][c-1]
//! ```
//!
//! for the stored half rows, the remaining rows following by symmetry.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SnapError};
use crate::halfint::{self, HalfIntIndexMaps, TwoJ};

/// Largest band limit for which the Clebsch-Gordan table is built.
pub const MAX_TWOJMAX: u32 = 24;

/// Default `rfac0` of the reference SNAP convention.
pub const DEFAULT_RFAC0: f64 = 0.99363;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A neighbor displacement mapped onto the unit 3-sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereMap {
    pub r: f64,
    pub theta0: f64,
    pub z0: f64,
    pub a: Complex64,
    pub b: Complex64,
    /// `d a / d x_k` for the neighbor displacement components.
    pub da: [Complex64; 3],
    pub db: [Complex64; 3],
    /// Unit vector along the displacement.
    pub unit: [f64; 3],
}

pub fn map_to_3sphere(disp: [f64; 3], rcut: f64, rmin0: f64, rfac0: f64) -> Result<SphereMap> {
    validate_radii(rcut, rmin0, rfac0)?;
    let [x, y, z] = disp;
    let rsq = x * x + y * y + z * z;
    let r = rsq.sqrt();
    if r == 0.0 {
        return Err(SnapError::ZeroLengthDisplacement);
    }
    if !(r > rmin0 && r < rcut) {
        return Err(SnapError::OutsideCutoff { r, rmin0, rcut });
    }

    let rscale0 = rfac0 * PI / (rcut - rmin0);
    let theta0 = (r - rmin0) * rscale0;
    let z0 = r / theta0.tan();
    let dz0dr = z0 / r - (r * rscale0) * (rsq + z0 * z0) / rsq;

    let r0inv = 1.0 / (rsq + z0 * z0).sqrt();
    let a = Complex64::new(r0inv * z0, -r0inv * z);
    let b = Complex64::new(r0inv * y, -r0inv * x);

    let rinv = 1.0 / r;
    let unit = [x * rinv, y * rinv, z * rinv];
    let dr0invdr = -r0inv.powi(3) * (r + z0 * dz0dr);

    let mut da = [ZERO; 3];
    let mut db = [ZERO; 3];
    for k in 0..3 {
        let dr0inv = dr0invdr * unit[k];
        let dz0 = dz0dr * unit[k];
        da[k] = Complex64::new(dz0 * r0inv + z0 * dr0inv, -z * dr0inv);
        db[k] = Complex64::new(y * dr0inv, -x * dr0inv);
    }
    da[2].im += -r0inv;
    db[0].im += -r0inv;
    db[1].re += r0inv;

    Ok(SphereMap {
        r,
        theta0,
        z0,
        a,
        b,
        da,
        db,
        unit,
    })
}

fn validate_radii(rcut: f64, rmin0: f64, rfac0: f64) -> Result<()> {
    if !(rcut > rmin0 && rmin0 >= 0.0) {
        return Err(SnapError::InvalidCutoff { rcut, rmin0 });
    }
    if !(rfac0 > 0.0 && rfac0 <= 1.0) {
        return Err(SnapError::InvalidRfac0(rfac0));
    }
    Ok(())
}

/// Cosine switching function and its radial derivative.
pub fn switching_function(r: f64, rcut: f64, rmin0: f64) -> Result<(f64, f64)> {
    if !(rcut > rmin0) {
        return Err(SnapError::InvalidCutoff { rcut, rmin0 });
    }
    if r <= rmin0 {
        return Ok((1.0, 0.0));
    }
    if r >= rcut {
        return Ok((0.0, 0.0));
    }
    let rcutfac = PI / (rcut - rmin0);
    let arg = (r - rmin0) * rcutfac;
    Ok((0.5 * (arg.cos() + 1.0), -0.5 * arg.sin() * rcutfac))
}

/// Real Clebsch-Gordan coefficients for every coupling triple, each block
/// indexed `m1 * (twoj2 + 1) + m2` with `m1, m2` the 0-based projections.
#[derive(Debug, Clone)]
pub struct CgTable {
    values: Vec<f64>,
    offsets: Vec<usize>,
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(n + 1);
    f.push(1.0);
    for i in 1..=n {
        f.push(f[i - 1] * i as f64);
    }
    f
}

pub fn compute_cg_table(twojmax: TwoJ, maps: &HalfIntIndexMaps) -> Result<CgTable> {
    if twojmax.0 > MAX_TWOJMAX {
        return Err(SnapError::BandLimit {
            twojmax: twojmax.0,
            max: MAX_TWOJMAX,
        });
    }
    if maps.twojmax() != twojmax {
        return Err(SnapError::SizeMismatch {
            what: "index maps band limit",
            expected: twojmax.0 as usize,
            got: maps.twojmax().0 as usize,
        });
    }
    let fact = factorials(3 * twojmax.0 as usize / 2 + 2);
    let f = |n: i64| fact[n as usize];

    let mut values = Vec::with_capacity(maps.cg_len());
    let mut offsets = Vec::with_capacity(maps.coupling_triples().len());
    for t in maps.coupling_triples() {
        offsets.push(values.len());
        let (j1, j2, j) = (t.twoj1 as i64, t.twoj2 as i64, t.twoj as i64);
        let delta = (f((j1 + j2 - j) / 2) * f((j1 - j2 + j) / 2) * f((-j1 + j2 + j) / 2)
            / f((j1 + j2 + j) / 2 + 1))
            .sqrt();
        for m1 in 0..=j1 {
            let aa2 = 2 * m1 - j1;
            for m2 in 0..=j2 {
                let bb2 = 2 * m2 - j2;
                let m = (aa2 + bb2 + j) / 2;
                if m < 0 || m > j {
                    values.push(0.0);
                    continue;
                }
                let zmin = 0.max((-(j - j2 + aa2) / 2).max(-(j - j1 - bb2) / 2));
                let zmax = ((j1 + j2 - j) / 2)
                    .min((j1 - aa2) / 2)
                    .min((j2 + bb2) / 2);
                let mut sum = 0.0;
                for z in zmin..=zmax {
                    let sign = if z % 2 == 1 { -1.0 } else { 1.0 };
                    sum += sign
                        / (f(z)
                            * f((j1 + j2 - j) / 2 - z)
                            * f((j1 - aa2) / 2 - z)
                            * f((j2 + bb2) / 2 - z)
                            * f((j - j2 + aa2) / 2 + z)
                            * f((j - j1 - bb2) / 2 + z));
                }
                let cc2 = 2 * m - j;
                let norm = (f((j1 + aa2) / 2)
                    * f((j1 - aa2) / 2)
                    * f((j2 + bb2) / 2)
                    * f((j2 - bb2) / 2)
                    * f((j + cc2) / 2)
                    * f((j - cc2) / 2)
                    * (j + 1) as f64)
                    .sqrt();
                values.push(sum * delta * norm);
            }
        }
    }
    debug_assert_eq!(values.len(), maps.cg_len());
    offsets.push(values.len());
    Ok(CgTable { values, offsets })
}

impl CgTable {
    pub fn block(&self, coupling: usize) -> &[f64] {
        &self.values[self.offsets[coupling]..self.offsets[coupling + 1]]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `C(j1 m1; j2 m2 | j m1+m2)` with 0-based projections `m1 in 0..=twoj1`,
    /// `m2 in 0..=twoj2`; zero outside the table.
    pub fn get(
        &self,
        maps: &HalfIntIndexMaps,
        twoj1: u32,
        m1: u32,
        twoj2: u32,
        m2: u32,
        twoj: u32,
    ) -> f64 {
        match maps.coupling_index(twoj1, twoj2, twoj) {
            Some(c) if m1 <= twoj1 && m2 <= twoj2 => {
                self.block(c)[(m1 * (twoj2 + 1) + m2) as usize]
            }
            _ => 0.0,
        }
    }
}

/// Per-level storage choice for a [`WignerStack`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStorage {
    Full,
    Half,
}

/// Wigner blocks for levels `0..=twojmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerStack {
    pub twojmax: TwoJ,
    pub storage: BlockStorage,
    pub data: Vec<Complex64>,
}

impl WignerStack {
    pub fn block(&self, twoj: u32) -> &[Complex64] {
        let (mut start, mut len) = (0, 0);
        for t in 0..=twoj {
            start += len;
            len = match self.storage {
                BlockStorage::Full => halfint::full_block_len(t),
                BlockStorage::Half => halfint::half_block_len(t),
            };
        }
        &self.data[start..start + len]
    }
}

/// Precomputed square-root prefactors and block offsets for the recursion.
#[derive(Debug, Clone)]
pub struct WignerRecursion {
    twojmax: u32,
    rootqp: Vec<f64>,
    offsets: Vec<usize>,
}

impl WignerRecursion {
    pub fn new(twojmax: TwoJ) -> Self {
        let n = twojmax.0 as usize + 1;
        let mut rootqp = vec![0.0; n * n];
        for q in 1..n {
            for p in 1..n {
                rootqp[q * n + p] = (p as f64 / q as f64).sqrt();
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for t in 0..=twojmax.0 {
            offsets.push(acc);
            acc += halfint::full_block_len(t);
        }
        offsets.push(acc);
        Self {
            twojmax: twojmax.0,
            rootqp,
            offsets,
        }
    }

    pub fn twojmax(&self) -> TwoJ {
        TwoJ(self.twojmax)
    }

    pub fn full_len(&self) -> usize {
        self.offsets[self.twojmax as usize + 1]
    }

    /// `sqrt(p / q)` for `p = 0..=2J`, contiguous in `p`.
    #[inline]
    fn root_row(&self, q: usize) -> &[f64] {
        let n = self.twojmax as usize + 1;
        &self.rootqp[q * n..(q + 1) * n]
    }

    /// Full-storage Wigner blocks for all levels.
    pub fn compute_u(&self, a: Complex64, b: Complex64, u: &mut [Complex64]) {
        debug_assert!(u.len() >= self.full_len());
        let (ac, bc) = (a.conj(), b.conj());
        u[0] = ONE;
        for j in 1..=self.twojmax as usize {
            let n = j + 1;
            let (off, offp) = (self.offsets[j], self.offsets[j - 1]);
            let (done, cur) = u.split_at_mut(off);
            let prev = &done[offp..];
            for mb in 0..=j / 2 {
                let up = &prev[mb * j..mb * j + j];
                let row = &mut cur[mb * n..mb * n + n];
                let rq = self.root_row(j - mb);
                row[0] = ac * up[0] * rq[j];
                for ma in 1..j {
                    row[ma] = -(bc * up[ma - 1] * rq[ma]) + ac * up[ma] * rq[j - ma];
                }
                row[j] = -(bc * up[j - 1] * rq[j]);
            }
            halfint::mirror_lower_rows(&mut cur[..n * n], j as u32);
        }
    }

    /// Derivative of the raw blocks along displacement component `dir`.
    pub fn compute_du_raw(
        &self,
        map: &SphereMap,
        u: &[Complex64],
        dir: usize,
        du: &mut [Complex64],
    ) {
        let (ac, bc) = (map.a.conj(), map.b.conj());
        let (dac, dbc) = (map.da[dir].conj(), map.db[dir].conj());
        du[0] = ZERO;
        for j in 1..=self.twojmax as usize {
            let n = j + 1;
            let (off, offp) = (self.offsets[j], self.offsets[j - 1]);
            let (done, cur) = du.split_at_mut(off);
            let dprev = &done[offp..];
            let prev = &u[offp..];
            for mb in 0..=j / 2 {
                let up = &prev[mb * j..mb * j + j];
                let dup = &dprev[mb * j..mb * j + j];
                let row = &mut cur[mb * n..mb * n + n];
                let rq = self.root_row(j - mb);
                row[0] = (dac * up[0] + ac * dup[0]) * rq[j];
                for ma in 1..j {
                    row[ma] = -((dbc * up[ma - 1] + bc * dup[ma - 1]) * rq[ma])
                        + (dac * up[ma] + ac * dup[ma]) * rq[j - ma];
                }
                row[j] = -((dbc * up[j - 1] + bc * dup[j - 1]) * rq[j]);
            }
            halfint::mirror_lower_rows(&mut cur[..n * n], j as u32);
        }
    }

    /// Gradient of `sfac(r) * u` along `dir`, where `sfac` and `dsfac` are the
    /// (weighted) switching function and its radial derivative.
    pub fn compute_du_weighted(
        &self,
        map: &SphereMap,
        u: &[Complex64],
        sfac: f64,
        dsfac: f64,
        dir: usize,
        du: &mut [Complex64],
    ) {
        self.compute_du_raw(map, u, dir, du);
        let ud = map.unit[dir];
        for (d, &uv) in du[..self.full_len()].iter_mut().zip(u) {
            *d = uv * dsfac * ud + *d * sfac;
        }
    }
}

pub fn compute_u_matrices(map: &SphereMap, twojmax: TwoJ, storage: BlockStorage) -> WignerStack {
    let rec = WignerRecursion::new(twojmax);
    let mut full = vec![ZERO; rec.full_len()];
    rec.compute_u(map.a, map.b, &mut full);
    let data = match storage {
        BlockStorage::Full => full,
        BlockStorage::Half => {
            let maps = HalfIntIndexMaps::new(twojmax);
            let mut half = vec![ZERO; maps.u_half_len()];
            halfint::compress_stack_into(&maps, &full, &mut half);
            half
        }
    };
    WignerStack {
        twojmax,
        storage,
        data,
    }
}

/// Cartesian gradient of `fc * u_j` for every level, one full stack per
/// direction. `ustack` must be the full-storage stack for the same map.
pub fn compute_du_matrices(
    map: &SphereMap,
    ustack: &WignerStack,
    twojmax: TwoJ,
    fc: f64,
    dfc_dr: f64,
) -> Result<[WignerStack; 3]> {
    if ustack.storage != BlockStorage::Full || ustack.twojmax != twojmax {
        return Err(SnapError::SizeMismatch {
            what: "full-storage U stack",
            expected: halfint::u_total_elements(twojmax),
            got: ustack.data.len(),
        });
    }
    let rec = WignerRecursion::new(twojmax);
    let mk = |dir| {
        let mut du = vec![ZERO; rec.full_len()];
        rec.compute_du_weighted(map, &ustack.data, fc, dfc_dr, dir, &mut du);
        WignerStack {
            twojmax,
            storage: BlockStorage::Full,
            data: du,
        }
    };
    Ok([mk(0), mk(1), mk(2)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RCUT: f64 = 4.67637;

    fn random_disp(rng: &mut ChaCha8Rng, rmin: f64, rmax: f64) -> [f64; 3] {
        loop {
            let v: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 0.1 && n <= 1.0 {
                let r = rng.gen_range(rmin..rmax);
                return [v[0] / n * r, v[1] / n * r, v[2] / n * r];
            }
        }
    }

    fn shifted(d: [f64; 3], k: usize, h: f64) -> [f64; 3] {
        let mut e = d;
        e[k] += h;
        e
    }

    #[test]
    fn mapping_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let d = random_disp(&mut rng, 0.05 * RCUT, 0.999 * RCUT);
            let m = map_to_3sphere(d, RCUT, 0.0, DEFAULT_RFAC0).unwrap();
            let norm = m.a.norm_sqr() + m.b.norm_sqr();
            assert!((norm - 1.0).abs() <= tolerances::CAYLEY_KLEIN_NORM);
            assert!(m.theta0 > 0.0 && m.theta0 < PI);
        }
    }

    #[test]
    fn mapping_on_z_axis_has_zero_b() {
        let m = map_to_3sphere([0.0, 0.0, 2.0], RCUT, 0.0, DEFAULT_RFAC0).unwrap();
        assert_eq!(m.b, ZERO);
    }

    #[test]
    fn mapping_rejects_degenerate_input() {
        assert!(matches!(
            map_to_3sphere([0.0; 3], RCUT, 0.0, DEFAULT_RFAC0),
            Err(SnapError::ZeroLengthDisplacement)
        ));
        assert!(matches!(
            map_to_3sphere([0.0, 0.0, RCUT], RCUT, 0.0, DEFAULT_RFAC0),
            Err(SnapError::OutsideCutoff { .. })
        ));
        assert!(map_to_3sphere([0.0, 0.0, 1.0], 1.0, 2.0, DEFAULT_RFAC0).is_err());
        assert!(map_to_3sphere([0.0, 0.0, 1.0], RCUT, 0.0, 1.5).is_err());
    }

    #[test]
    fn mapping_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6 * RCUT;
        for _ in 0..50 {
            let d = random_disp(&mut rng, 0.1 * RCUT, 0.95 * RCUT);
            let m = map_to_3sphere(d, RCUT, 0.0, DEFAULT_RFAC0).unwrap();
            for k in 0..3 {
                let p = map_to_3sphere(shifted(d, k, h), RCUT, 0.0, DEFAULT_RFAC0).unwrap();
                let q = map_to_3sphere(shifted(d, k, -h), RCUT, 0.0, DEFAULT_RFAC0).unwrap();
                let fa = (p.a - q.a) / (2.0 * h);
                let fb = (p.b - q.b) / (2.0 * h);
                let scale = m.da[k].norm().max(m.db[k].norm()).max(1.0);
                assert!((fa - m.da[k]).norm() / scale <= tolerances::FD_MAPPING);
                assert!((fb - m.db[k]).norm() / scale <= tolerances::FD_MAPPING);
            }
        }
    }

    #[test]
    fn switching_function_values() {
        let (fc, dfc) = switching_function(RCUT, RCUT, 0.5).unwrap();
        assert_eq!((fc, dfc), (0.0, 0.0));
        assert_eq!(switching_function(0.5, RCUT, 0.5).unwrap(), (1.0, 0.0));
        assert_eq!(switching_function(0.2, RCUT, 0.5).unwrap(), (1.0, 0.0));
        let (mid, _) = switching_function(0.5 * (0.5 + RCUT), RCUT, 0.5).unwrap();
        assert!((mid - 0.5).abs() < 1e-15);
        assert!(switching_function(1.0, 1.0, 1.0).is_err());

        let h = 1e-6;
        for r in [0.7, 1.9, 3.3, 4.5] {
            let (_, d) = switching_function(r, RCUT, 0.5).unwrap();
            let (p, _) = switching_function(r + h, RCUT, 0.5).unwrap();
            let (m, _) = switching_function(r - h, RCUT, 0.5).unwrap();
            assert!(((p - m) / (2.0 * h) - d).abs() < 1e-8);
        }
    }

    /// Standard factorial-sum Clebsch-Gordan coefficient in `2j`, `2m` units.
    fn cg_oracle(j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> f64 {
        if m1 + m2 != m {
            return 0.0;
        }
        let fact = |n: i64| -> f64 { (1..=n).map(|k| k as f64).product() };
        let pre = ((j + 1) as f64
            * fact((j1 + j2 - j) / 2)
            * fact((j1 - j2 + j) / 2)
            * fact((-j1 + j2 + j) / 2)
            / fact((j1 + j2 + j) / 2 + 1))
            .sqrt();
        let pre2 = (fact((j1 + m1) / 2)
            * fact((j1 - m1) / 2)
            * fact((j2 + m2) / 2)
            * fact((j2 - m2) / 2)
            * fact((j + m) / 2)
            * fact((j - m) / 2))
            .sqrt();
        let mut s = 0.0;
        for k in 0..=(j1 + j2 + j) {
            let args = [
                k,
                (j1 + j2 - j) / 2 - k,
                (j1 - m1) / 2 - k,
                (j2 + m2) / 2 - k,
                (j - j2 + m1) / 2 + k,
                (j - j1 - m2) / 2 + k,
            ];
            if args.iter().any(|&v| v < 0) {
                continue;
            }
            let den: f64 = args.iter().map(|&v| fact(v)).product();
            s += if k % 2 == 0 { 1.0 } else { -1.0 } / den;
        }
        pre * pre2 * s
    }

    #[test]
    fn cg_known_values() {
        let maps = HalfIntIndexMaps::new(TwoJ(4));
        let cg = compute_cg_table(TwoJ(4), &maps).unwrap();
        assert_eq!(cg.get(&maps, 0, 0, 0, 0, 0), 1.0);
        // C(1/2 1/2; 1/2 -1/2 | 1 0): m1 index 1 (+1/2), m2 index 0 (-1/2)
        let v = cg.get(&maps, 1, 1, 1, 0, 2);
        assert!((v - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((v - cg_oracle(1, 1, 1, -1, 2, 0)).abs() < 1e-15);
        // m1 + m2 = +2 is not representable at j = 0
        assert_eq!(cg.get(&maps, 1, 1, 1, 1, 0), 0.0);
    }

    #[test]
    fn cg_matches_oracle_and_is_orthogonal() {
        let jmax = 8;
        let maps = HalfIntIndexMaps::new(TwoJ(jmax));
        let cg = compute_cg_table(TwoJ(jmax), &maps).unwrap();
        for t in maps.coupling_triples() {
            for m1 in 0..=t.twoj1 {
                for m2 in 0..=t.twoj2 {
                    let tm1 = 2 * m1 as i64 - t.twoj1 as i64;
                    let tm2 = 2 * m2 as i64 - t.twoj2 as i64;
                    let expected = if (tm1 + tm2).abs() <= t.twoj as i64 {
                        cg_oracle(
                            t.twoj1 as i64,
                            tm1,
                            t.twoj2 as i64,
                            tm2,
                            t.twoj as i64,
                            tm1 + tm2,
                        )
                    } else {
                        0.0
                    };
                    let got = cg.get(&maps, t.twoj1, m1, t.twoj2, m2, t.twoj);
                    assert!((got - expected).abs() < 1e-12, "{t:?} {m1} {m2}");
                }
            }
        }
        // orthogonality over (m1, m2) for each (j1, j2)
        for j1 in 0..=jmax {
            for j2 in 0..=j1 {
                let levels: Vec<u32> = (0..=jmax)
                    .filter(|&j| maps.coupling_index(j1, j2, j).is_some())
                    .collect();
                for &ja in &levels {
                    for &jb in &levels {
                        for ma in 0..=ja {
                            for mb in 0..=jb {
                                let mut s = 0.0;
                                for m1 in 0..=j1 {
                                    for m2 in 0..=j2 {
                                        let m = 2 * (m1 + m2) as i64 - (j1 + j2) as i64;
                                        if m != 2 * ma as i64 - ja as i64
                                            || m != 2 * mb as i64 - jb as i64
                                        {
                                            continue;
                                        }
                                        s += cg.get(&maps, j1, m1, j2, m2, ja)
                                            * cg.get(&maps, j1, m1, j2, m2, jb);
                                    }
                                }
                                let want = if ja == jb && ma == mb { 1.0 } else { 0.0 };
                                if 2 * ma as i64 - ja as i64 == 2 * mb as i64 - jb as i64 {
                                    assert!(
                                        (s - want).abs() <= tolerances::CG_ORTHOGONALITY,
                                        "{j1} {j2} {ja} {jb} {ma} {mb}: {s}"
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cg_band_limit() {
        let maps = HalfIntIndexMaps::new(TwoJ(26));
        assert!(matches!(
            compute_cg_table(TwoJ(26), &maps),
            Err(SnapError::BandLimit { .. })
        ));
        let maps = HalfIntIndexMaps::new(TwoJ(20));
        assert!(compute_cg_table(TwoJ(20), &maps).is_ok());
    }

    #[test]
    fn u_stack_level_zero_and_unitarity() {
        let m = map_to_3sphere([0.3, -1.2, 0.8], RCUT, 0.0, DEFAULT_RFAC0).unwrap();
        let s0 = compute_u_matrices(&m, TwoJ(0), BlockStorage::Full);
        assert_eq!(s0.data, vec![ONE]);

        let jmax = 12;
        let s = compute_u_matrices(&m, TwoJ(jmax), BlockStorage::Full);
        assert_eq!(s.block(0), &[ONE]);
        for t in 0..=jmax {
            let n = t as usize + 1;
            let blk = s.block(t);
            for r in 0..n {
                let row: f64 = (0..n).map(|c| blk[r * n + c].norm_sqr()).sum();
                assert!((row - 1.0).abs() <= tolerances::UNITARITY);
                for c in 0..n {
                    let mirrored = halfint::mirror_value(blk[r * n + c], r, c);
                    assert!((blk[(n - 1 - r) * n + (n - 1 - c)] - mirrored).norm() <= 1e-12);
                }
            }
        }
        let half = compute_u_matrices(&m, TwoJ(jmax), BlockStorage::Half);
        for t in 0..=jmax {
            assert_eq!(
                halfint::half_to_full_expand(half.block(t), t).unwrap(),
                s.block(t)
            );
        }
    }

    #[test]
    fn level_one_half_block() {
        let m = map_to_3sphere([0.4, 0.9, -1.1], RCUT, 0.0, DEFAULT_RFAC0).unwrap();
        let s = compute_u_matrices(&m, TwoJ(1), BlockStorage::Full);
        let b1 = s.block(1);
        assert_eq!(b1[0], m.a.conj());
        assert_eq!(b1[1], -m.b.conj());
        assert_eq!(b1[2], m.b);
        assert_eq!(b1[3], m.a);
    }

    fn weighted_u(d: [f64; 3], jmax: u32, rmin0: f64) -> Vec<Complex64> {
        let m = map_to_3sphere(d, RCUT, rmin0, DEFAULT_RFAC0).unwrap();
        let (fc, _) = switching_function(m.r, RCUT, rmin0).unwrap();
        compute_u_matrices(&m, TwoJ(jmax), BlockStorage::Full)
            .data
            .into_iter()
            .map(|v| v * fc)
            .collect()
    }

    #[test]
    fn du_level_zero_is_radial() {
        let d = [0.6, -0.2, 1.7];
        let m = map_to_3sphere(d, RCUT, 0.0, DEFAULT_RFAC0).unwrap();
        let (fc, dfc) = switching_function(m.r, RCUT, 0.0).unwrap();
        let u = compute_u_matrices(&m, TwoJ(4), BlockStorage::Full);
        let du = compute_du_matrices(&m, &u, TwoJ(4), fc, dfc).unwrap();
        for k in 0..3 {
            assert_eq!(du[k].data[0], Complex64::new(dfc * m.unit[k], 0.0));
        }
    }

    #[test]
    fn du_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let jmax = 8;
        let h = tolerances::FD_STEP_FRACTION * RCUT;
        let mut samples = 0;
        for _ in 0..15 {
            let d = random_disp(&mut rng, 0.2 * RCUT, 0.95 * RCUT);
            let m = map_to_3sphere(d, RCUT, 0.0, DEFAULT_RFAC0).unwrap();
            let (fc, dfc) = switching_function(m.r, RCUT, 0.0).unwrap();
            let u = compute_u_matrices(&m, TwoJ(jmax), BlockStorage::Full);
            let du = compute_du_matrices(&m, &u, TwoJ(jmax), fc, dfc).unwrap();
            for k in 0..3 {
                let p = weighted_u(shifted(d, k, h), jmax, 0.0);
                let q = weighted_u(shifted(d, k, -h), jmax, 0.0);
                let maps = HalfIntIndexMaps::new(TwoJ(jmax));
                for t in 0..=jmax {
                    let (o, l) = (maps.u_block_offset(t), halfint::full_block_len(t));
                    let scale = (o..o + l)
                        .map(|i| du[k].data[i].norm())
                        .fold(1e-3, f64::max);
                    let err = (o..o + l)
                        .map(|i| ((p[i] - q[i]) / (2.0 * h) - du[k].data[i]).norm())
                        .fold(0.0, f64::max);
                    assert!(err / scale <= tolerances::FD_GRADIENT, "level {t} dir {k}");
                    samples += 1;
                }
            }
        }
        assert!(samples >= 100);
    }

    #[test]
    fn du_symmetry_probe_near_inner_radius() {
        // neighbor on +z just outside rmin0: b = 0 and the x/y responses of the
        // diagonal real parts mirror each other under an x <-> y swap
        let rmin0 = 0.5;
        let d = [0.0, 0.0, rmin0 + 1e-3 * RCUT];
        let m = map_to_3sphere(d, RCUT, rmin0, DEFAULT_RFAC0).unwrap();
        assert_eq!(m.b, ZERO);
        let h = tolerances::FD_STEP_FRACTION * RCUT;
        let jmax = 4;
        let fd = |k: usize| -> Vec<Complex64> {
            let p = weighted_u(shifted(d, k, h), jmax, rmin0);
            let q = weighted_u(shifted(d, k, -h), jmax, rmin0);
            p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        let (dx, dy) = (fd(0), fd(1));
        let maps = HalfIntIndexMaps::new(TwoJ(jmax));
        for t in 0..=jmax {
            let n = t as usize + 1;
            for r in 0..n {
                let i = maps.u_block_offset(t) + r * n + r;
                // on the axis the diagonal is stationary under transverse moves
                assert!(dx[i].re.abs() < 1e-5 && dy[i].re.abs() < 1e-5);
                assert!((dx[i].re + dy[i].re).abs() < 1e-5);
            }
        }
    }
}

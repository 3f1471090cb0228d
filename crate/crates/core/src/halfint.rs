//! Half-integer angular bookkeeping.
//!
//! Every angular quantity is stored as the integer `twoj = 2j`, so that
//! `j = 0, 1/2, 1, ...` maps onto `twoj = 0, 1, 2, ...` and all index
//! arithmetic stays exact.
//!
//! # Block convention
//!
//! A level `twoj` owns a `(twoj+1) x (twoj+1)` complex block stored
//! row-major: element `(row, col)` lives at `row * (twoj+1) + col`, with
//! `row, col` in `0..=twoj` standing for `m' = row - j` and `m = col - j`.
//! Blocks obey
//!
//! ```text
//! u[twoj - row][twoj - col] = (-1)^(row + col) * conj(u[row][col])
//! ```
//!
//! Half storage keeps rows `0..=twoj/2` (integer division), i.e.
//! `(twoj+1) * (floor(twoj/2)+1)` elements. When `twoj` is even the middle
//! row is kept whole even though its right half is redundant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};

/// Twice an angular momentum quantum number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TwoJ(pub u32);

impl TwoJ {
    pub fn get(self) -> u32 {
        self.0
    }

    pub fn levels(self) -> impl Iterator<Item = u32> {
        0..=self.0
    }
}

impl std::fmt::Display for TwoJ {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A coupled triple `(twoj1, twoj2, twoj)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub twoj1: u32,
    pub twoj2: u32,
    pub twoj: u32,
}

impl Triple {
    pub fn new(twoj1: u32, twoj2: u32, twoj: u32) -> Self {
        Self { twoj1, twoj2, twoj }
    }
}

#[inline]
pub fn full_block_len(twoj: u32) -> usize {
    let n = twoj as usize + 1;
    n * n
}

#[inline]
pub fn half_block_len(twoj: u32) -> usize {
    (twoj as usize + 1) * (twoj as usize / 2 + 1)
}

/// Number of stored rows in a half block.
#[inline]
pub fn half_rows(twoj: u32) -> usize {
    twoj as usize / 2 + 1
}

/// Admissible `(twoj1, twoj2, twoj)` with `twoj2 <= twoj1 <= twoj <= twojmax`,
/// triangle inequality and integer `j1 + j2 + j`; lexicographic order.
pub fn enumerate_bispectrum_triples(twojmax: TwoJ) -> Vec<Triple> {
    let jmax = twojmax.0;
    let mut out = Vec::new();
    for j1 in 0..=jmax {
        for j2 in 0..=j1 {
            let mut j = j1 - j2;
            while j <= jmax.min(j1 + j2) {
                if j >= j1 {
                    out.push(Triple::new(j1, j2, j));
                }
                j += 2;
            }
        }
    }
    out
}

/// Every `(twoj1 >= twoj2, twoj)` pair coupling that a Clebsch-Gordan product
/// can produce, including `twoj < twoj1`; lexicographic order.
pub fn enumerate_coupling_triples(twojmax: TwoJ) -> Vec<Triple> {
    let jmax = twojmax.0;
    let mut out = Vec::new();
    for j1 in 0..=jmax {
        for j2 in 0..=j1 {
            let mut j = j1 - j2;
            while j <= jmax.min(j1 + j2) {
                out.push(Triple::new(j1, j2, j));
                j += 2;
            }
        }
    }
    out
}

pub fn u_total_elements(twojmax: TwoJ) -> usize {
    twojmax.levels().map(full_block_len).sum()
}

pub fn u_half_elements(twojmax: TwoJ) -> usize {
    twojmax.levels().map(half_block_len).sum()
}

/// One flattened element of a Clebsch-Gordan product block `Z^j_{j1 j2}`,
/// with the precomputed summation ranges over `(m1, m2)`.
#[derive(Debug, Clone, Copy)]
pub struct ZEntry {
    pub coupling: u32,
    pub twoj1: u32,
    pub twoj2: u32,
    pub twoj: u32,
    pub row: u32,
    pub col: u32,
    pub col1_min: u32,
    pub col2_max: u32,
    pub ncol: u32,
    pub row1_min: u32,
    pub row2_max: u32,
    pub nrow: u32,
    /// Target element in full storage of level `twoj`.
    pub u_full: u32,
    /// Target element in half storage of level `twoj`.
    pub u_half: u32,
}

/// Summation window for one output index of a Clebsch-Gordan product:
/// first index of factor 1, last index of factor 2, and the count.
pub fn coupling_window(twoj1: u32, twoj2: u32, twoj: u32, m: u32) -> (u32, u32, u32) {
    let (j1, j2, j, m) = (twoj1 as i64, twoj2 as i64, twoj as i64, m as i64);
    let m1min = 0.max((2 * m - j - j2 + j1) / 2);
    let m2max = (2 * m - j - (2 * m1min - j1) + j2) / 2;
    let n = j1.min((2 * m - j + j2 + j1) / 2) - m1min + 1;
    debug_assert!(n >= 1 && m2max >= 0 && m2max <= j2);
    (m1min as u32, m2max as u32, n as u32)
}

/// Flattened index maps for one band limit. Immutable after construction.
#[derive(Debug, Clone)]
pub struct HalfIntIndexMaps {
    twojmax: TwoJ,
    u_block_offset: Vec<usize>,
    u_half_offset: Vec<usize>,
    bispectrum: Vec<Triple>,
    coupling: Vec<Triple>,
    z_block_offset: Vec<usize>,
    z_entries: Vec<ZEntry>,
    cg_offset: Vec<usize>,
    cg_len: usize,
    coupling_lookup: Vec<u32>,
    bispectrum_lookup: Vec<u32>,
    // half-storage U index -> z entries accumulating into it (CSR)
    y_targets_offset: Vec<usize>,
    y_targets: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl HalfIntIndexMaps {
    pub fn new(twojmax: TwoJ) -> Self {
        let jmax = twojmax.0;
        let n = jmax as usize + 1;

        let mut u_block_offset = Vec::with_capacity(n + 1);
        let mut u_half_offset = Vec::with_capacity(n + 1);
        let (mut full, mut half) = (0, 0);
        for t in twojmax.levels() {
            u_block_offset.push(full);
            u_half_offset.push(half);
            full += full_block_len(t);
            half += half_block_len(t);
        }
        u_block_offset.push(full);
        u_half_offset.push(half);

        let bispectrum = enumerate_bispectrum_triples(twojmax);
        let coupling = enumerate_coupling_triples(twojmax);

        let mut coupling_lookup = vec![NONE; n * n * n];
        let mut bispectrum_lookup = vec![NONE; n * n * n];
        let key = |t: &Triple| (t.twoj1 as usize * n + t.twoj2 as usize) * n + t.twoj as usize;
        for (i, t) in coupling.iter().enumerate() {
            coupling_lookup[key(t)] = i as u32;
        }
        for (i, t) in bispectrum.iter().enumerate() {
            bispectrum_lookup[key(t)] = i as u32;
        }

        let mut z_block_offset = Vec::with_capacity(coupling.len() + 1);
        let mut cg_offset = Vec::with_capacity(coupling.len() + 1);
        let mut z_entries = Vec::new();
        let mut cg_len = 0;
        for (ci, t) in coupling.iter().enumerate() {
            z_block_offset.push(z_entries.len());
            cg_offset.push(cg_len);
            cg_len += (t.twoj1 as usize + 1) * (t.twoj2 as usize + 1);
            for row in 0..half_rows(t.twoj) as u32 {
                let (row1_min, row2_max, nrow) = coupling_window(t.twoj1, t.twoj2, t.twoj, row);
                for col in 0..=t.twoj {
                    let (col1_min, col2_max, ncol) =
                        coupling_window(t.twoj1, t.twoj2, t.twoj, col);
                    let local = row as usize * (t.twoj as usize + 1) + col as usize;
                    z_entries.push(ZEntry {
                        coupling: ci as u32,
                        twoj1: t.twoj1,
                        twoj2: t.twoj2,
                        twoj: t.twoj,
                        row,
                        col,
                        col1_min,
                        col2_max,
                        ncol,
                        row1_min,
                        row2_max,
                        nrow,
                        u_full: (u_block_offset[t.twoj as usize] + local) as u32,
                        u_half: (u_half_offset[t.twoj as usize] + local) as u32,
                    });
                }
            }
        }
        z_block_offset.push(z_entries.len());
        cg_offset.push(cg_len);

        let nhalf = half;
        let mut counts = vec![0usize; nhalf];
        for e in &z_entries {
            counts[e.u_half as usize] += 1;
        }
        let mut y_targets_offset = Vec::with_capacity(nhalf + 1);
        let mut acc = 0;
        for c in &counts {
            y_targets_offset.push(acc);
            acc += c;
        }
        y_targets_offset.push(acc);
        let mut fill = y_targets_offset.clone();
        let mut y_targets = vec![0u32; acc];
        for (iz, e) in z_entries.iter().enumerate() {
            let slot = &mut fill[e.u_half as usize];
            y_targets[*slot] = iz as u32;
            *slot += 1;
        }

        Self {
            twojmax,
            u_block_offset,
            u_half_offset,
            bispectrum,
            coupling,
            z_block_offset,
            z_entries,
            cg_offset,
            cg_len,
            coupling_lookup,
            bispectrum_lookup,
            y_targets_offset,
            y_targets,
        }
    }

    pub fn twojmax(&self) -> TwoJ {
        self.twojmax
    }

    /// Offset of level `twoj` in full storage; `twoj = twojmax + 1` gives the total.
    pub fn u_block_offset(&self, twoj: u32) -> usize {
        self.u_block_offset[twoj as usize]
    }

    pub fn u_half_offset(&self, twoj: u32) -> usize {
        self.u_half_offset[twoj as usize]
    }

    pub fn u_full_len(&self) -> usize {
        *self.u_block_offset.last().unwrap()
    }

    pub fn u_half_len(&self) -> usize {
        *self.u_half_offset.last().unwrap()
    }

    pub fn u_len(&self, half: bool) -> usize {
        if half {
            self.u_half_len()
        } else {
            self.u_full_len()
        }
    }

    pub fn bispectrum_triples(&self) -> &[Triple] {
        &self.bispectrum
    }

    pub fn n_bispectrum(&self) -> usize {
        self.bispectrum.len()
    }

    pub fn coupling_triples(&self) -> &[Triple] {
        &self.coupling
    }

    pub fn z_entries(&self) -> &[ZEntry] {
        &self.z_entries
    }

    /// Flattened Z length per atom (half rows of every coupling block).
    pub fn z_len(&self) -> usize {
        self.z_entries.len()
    }

    pub fn z_block_offset(&self, coupling: usize) -> usize {
        self.z_block_offset[coupling]
    }

    pub fn cg_offset(&self, coupling: usize) -> usize {
        self.cg_offset[coupling]
    }

    pub fn cg_len(&self) -> usize {
        self.cg_len
    }

    fn key(&self, twoj1: u32, twoj2: u32, twoj: u32) -> Option<usize> {
        let n = self.twojmax.0 as usize + 1;
        if twoj1 as usize >= n || twoj2 as usize >= n || twoj as usize >= n {
            return None;
        }
        Some((twoj1 as usize * n + twoj2 as usize) * n + twoj as usize)
    }

    /// Index of `(twoj1, twoj2, twoj)` among coupling triples; requires `twoj1 >= twoj2`.
    pub fn coupling_index(&self, twoj1: u32, twoj2: u32, twoj: u32) -> Option<usize> {
        self.key(twoj1, twoj2, twoj)
            .map(|k| self.coupling_lookup[k])
            .filter(|&v| v != NONE)
            .map(|v| v as usize)
    }

    pub fn bispectrum_index(&self, twoj1: u32, twoj2: u32, twoj: u32) -> Option<usize> {
        self.key(twoj1, twoj2, twoj)
            .map(|k| self.bispectrum_lookup[k])
            .filter(|&v| v != NONE)
            .map(|v| v as usize)
    }

    /// Z entries that accumulate into half-storage element `u_half`, in
    /// increasing entry order.
    pub fn y_targets(&self, u_half: usize) -> &[u32] {
        &self.y_targets[self.y_targets_offset[u_half]..self.y_targets_offset[u_half + 1]]
    }

    /// Maps a half-storage index to the matching full-storage index.
    pub fn half_to_full_index(&self, half_index: usize) -> usize {
        let t = self.u_half_offset.partition_point(|&o| o <= half_index) - 1;
        half_index - self.u_half_offset[t] + self.u_block_offset[t]
    }
}

/// `(-1)^(row + col)` applied with conjugation; the mirror of element `(row, col)`.
#[inline]
pub fn mirror_value(v: Complex64, row: usize, col: usize) -> Complex64 {
    if (row + col) % 2 == 0 {
        Complex64::new(v.re, -v.im)
    } else {
        Complex64::new(-v.re, v.im)
    }
}

/// Overwrites rows below the stored half of a full block from the rows above.
pub fn mirror_lower_rows(block: &mut [Complex64], twoj: u32) {
    let n = twoj as usize + 1;
    debug_assert_eq!(block.len(), n * n);
    for row in 0..half_rows(twoj) {
        let mrow = n - 1 - row;
        // the middle row (even twoj) takes its right half from its left half
        let cols = if mrow > row { n } else { row };
        for col in 0..cols {
            block[mrow * n + (n - 1 - col)] = mirror_value(block[row * n + col], row, col);
        }
    }
}

/// Writes the full block for level `twoj` from its half block.
pub fn expand_half_into(half: &[Complex64], twoj: u32, full: &mut [Complex64]) {
    let n = twoj as usize + 1;
    let h = half_block_len(twoj);
    full[..h].copy_from_slice(&half[..h]);
    mirror_lower_rows(&mut full[..n * n], twoj);
}

pub fn half_to_full_expand(half: &[Complex64], twoj: u32) -> Result<Vec<Complex64>> {
    let expected = half_block_len(twoj);
    if half.len() != expected {
        return Err(SnapError::SizeMismatch {
            what: "half block",
            expected,
            got: half.len(),
        });
    }
    let mut full = vec![Complex64::new(0.0, 0.0); full_block_len(twoj)];
    expand_half_into(half, twoj, &mut full);
    Ok(full)
}

pub fn full_to_half_compress(full: &[Complex64], twoj: u32) -> Result<Vec<Complex64>> {
    let expected = full_block_len(twoj);
    if full.len() != expected {
        return Err(SnapError::SizeMismatch {
            what: "full block",
            expected,
            got: full.len(),
        });
    }
    Ok(full[..half_block_len(twoj)].to_vec())
}

/// Expands a whole half-storage stack (all levels) into full storage.
pub fn expand_stack_into(maps: &HalfIntIndexMaps, half: &[Complex64], full: &mut [Complex64]) {
    for t in maps.twojmax().levels() {
        let h0 = maps.u_half_offset(t);
        let f0 = maps.u_block_offset(t);
        expand_half_into(
            &half[h0..h0 + half_block_len(t)],
            t,
            &mut full[f0..f0 + full_block_len(t)],
        );
    }
}

/// Copies the stored half of every level of a full-storage stack.
pub fn compress_stack_into(maps: &HalfIntIndexMaps, full: &[Complex64], half: &mut [Complex64]) {
    for t in maps.twojmax().levels() {
        let h0 = maps.u_half_offset(t);
        let f0 = maps.u_block_offset(t);
        let h = half_block_len(t);
        half[h0..h0 + h].copy_from_slice(&full[f0..f0 + h]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_triples(jmax: u32) -> Vec<Triple> {
        let mut v = Vec::new();
        for j1 in 0..=jmax {
            for j2 in 0..=jmax {
                for j in 0..=jmax {
                    let ok = j2 <= j1
                        && j1 <= j
                        && j <= j1 + j2
                        && (j1 as i64 - j2 as i64).unsigned_abs() as u32 <= j
                        && (j1 + j2 + j) % 2 == 0;
                    if ok {
                        v.push(Triple::new(j1, j2, j));
                    }
                }
            }
        }
        v
    }

    #[test]
    fn triple_counts() {
        assert_eq!(enumerate_bispectrum_triples(TwoJ(8)).len(), 55);
        assert_eq!(enumerate_bispectrum_triples(TwoJ(14)).len(), 204);
        assert_eq!(
            enumerate_bispectrum_triples(TwoJ(0)),
            vec![Triple::new(0, 0, 0)]
        );
        assert_eq!(enumerate_bispectrum_triples(TwoJ(2)).len(), 5);
    }

    #[test]
    fn triples_match_brute_force_and_grow() {
        let mut prev = 0;
        for jmax in 0..=20 {
            let t = enumerate_bispectrum_triples(TwoJ(jmax));
            assert_eq!(t, brute_force_triples(jmax), "2J = {jmax}");
            assert!(t.len() >= prev);
            prev = t.len();
        }
    }

    #[test]
    fn element_counts() {
        assert_eq!(u_total_elements(TwoJ(8)), 285);
        assert_eq!(u_total_elements(TwoJ(0)), 1);
        assert_eq!(u_total_elements(TwoJ(14)), 1240);
        assert_eq!(u_half_elements(TwoJ(8)), 155);
        assert_eq!(u_half_elements(TwoJ(0)), 1);
        assert_eq!(u_half_elements(TwoJ(1)), 3);
    }

    #[test]
    fn offsets_are_gap_free() {
        for jmax in 0..=14 {
            let maps = HalfIntIndexMaps::new(TwoJ(jmax));
            for t in 0..=jmax {
                assert_eq!(
                    maps.u_block_offset(t + 1) - maps.u_block_offset(t),
                    full_block_len(t)
                );
                assert_eq!(
                    maps.u_half_offset(t + 1) - maps.u_half_offset(t),
                    half_block_len(t)
                );
            }
            assert_eq!(maps.u_full_len(), u_total_elements(TwoJ(jmax)));
            assert_eq!(maps.u_half_len(), u_half_elements(TwoJ(jmax)));
            let zsum: usize = maps
                .coupling_triples()
                .iter()
                .map(|t| half_block_len(t.twoj))
                .sum();
            assert_eq!(zsum, maps.z_len());
        }
    }

    #[test]
    fn lookups_round_trip() {
        let maps = HalfIntIndexMaps::new(TwoJ(6));
        for (i, t) in maps.bispectrum_triples().iter().enumerate() {
            assert_eq!(maps.bispectrum_index(t.twoj1, t.twoj2, t.twoj), Some(i));
        }
        for (i, t) in maps.coupling_triples().iter().enumerate() {
            assert_eq!(maps.coupling_index(t.twoj1, t.twoj2, t.twoj), Some(i));
        }
        assert_eq!(maps.coupling_index(1, 1, 1), None);
        assert_eq!(maps.bispectrum_index(7, 0, 7), None);
        for h in 0..maps.u_half_len() {
            let f = maps.half_to_full_index(h);
            assert!(f < maps.u_full_len());
            for &iz in maps.y_targets(h) {
                assert_eq!(maps.z_entries()[iz as usize].u_half as usize, h);
                assert_eq!(maps.z_entries()[iz as usize].u_full as usize, f);
            }
        }
    }

    #[test]
    fn expand_trivial_blocks() {
        let c = Complex64::new(0.3, -0.7);
        assert_eq!(half_to_full_expand(&[c], 0).unwrap(), vec![c]);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let full = half_to_full_expand(&[one, zero], 1).unwrap();
        assert_eq!(full, vec![one, zero, zero, one]);
        assert!(half_to_full_expand(&[one], 1).is_err());
        assert!(full_to_half_compress(&[one; 3], 1).is_err());
    }

    fn symmetric_block(twoj: u32, seed: &[f64]) -> Vec<Complex64> {
        let n = twoj as usize + 1;
        let mut half = vec![Complex64::new(0.0, 0.0); half_block_len(twoj)];
        for (i, h) in half.iter_mut().enumerate() {
            *h = Complex64::new(seed[(2 * i) % seed.len()], seed[(2 * i + 1) % seed.len()]);
        }
        if twoj % 2 == 0 {
            // middle row must already be self-consistent
            let mid = twoj as usize / 2;
            for col in (mid + 1)..n {
                let src = half[mid * n + (n - 1 - col)];
                half[mid * n + col] = mirror_value(src, mid, n - 1 - col);
            }
            let c = half[mid * n + mid];
            half[mid * n + mid] = Complex64::new(c.re, 0.0);
        }
        half_to_full_expand(&half, twoj).unwrap()
    }

    proptest! {
        #[test]
        fn compress_expand_round_trip_is_exact(
            twoj in 0u32..12,
            seed in proptest::collection::vec(-10.0f64..10.0, 8..64),
        ) {
            let full = symmetric_block(twoj, &seed);
            let back = half_to_full_expand(&full_to_half_compress(&full, twoj).unwrap(), twoj).unwrap();
            prop_assert_eq!(full, back);
        }
    }
}

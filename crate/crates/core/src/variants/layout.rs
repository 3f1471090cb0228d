//! Physical layouts for per-atom complex arrays and per-pair stacks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::snap::kernels::Strided;
use crate::snap::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayLayout {
    /// `[atom][index]`, complex interleaved.
    IndexFastest,
    /// `[index][atom]`, complex interleaved.
    AtomFastest,
    /// `[atom][index]` real plane followed by the matching imaginary plane.
    SplitIndexFastest,
    /// `[atom block][index][lane]` real plane and imaginary plane, atoms
    /// padded to a multiple of `tile`.
    Aosoa { tile: usize },
}

impl ArrayLayout {
    pub fn is_split(self) -> bool {
        matches!(self, Self::SplitIndexFastest | Self::Aosoa { .. })
    }

    pub fn tile(self) -> Option<usize> {
        match self {
            Self::Aosoa { tile } => Some(tile),
            _ => None,
        }
    }
}

impl std::fmt::Display for ArrayLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::IndexFastest => write!(f, "index-fastest"),
            Self::AtomFastest => write!(f, "atom-fastest"),
            Self::SplitIndexFastest => write!(f, "split-index-fastest"),
            Self::Aosoa { tile } => write!(f, "aosoa({tile})"),
        }
    }
}

/// Logical `natoms x nidx` complex extents and their physical placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutView {
    pub natoms: usize,
    pub nidx: usize,
    pub layout: ArrayLayout,
}

impl LayoutView {
    pub fn new(natoms: usize, nidx: usize, layout: ArrayLayout) -> Result<Self> {
        if layout.tile() == Some(0) {
            return Err(SnapError::InvalidConfig("AoSoA tile width must be >= 1".into()));
        }
        Ok(Self {
            natoms,
            nidx,
            layout,
        })
    }

    /// Atom extent after padding to whole tiles.
    pub fn padded_atoms(&self) -> usize {
        match self.layout {
            ArrayLayout::Aosoa { tile } => self.natoms.div_ceil(tile) * tile,
            _ => self.natoms,
        }
    }

    /// Length of one real or imaginary plane (split layouts).
    pub fn plane_len(&self) -> usize {
        self.padded_atoms() * self.nidx
    }

    /// Number of `f64` slots.
    pub fn physical_len(&self) -> usize {
        2 * self.plane_len()
    }

    /// Physical slots of the real and imaginary parts of `(atom, idx)`.
    #[inline]
    pub fn slot(&self, atom: usize, idx: usize) -> (usize, usize) {
        let v = self.atom_strides(atom);
        (v.0 + idx * v.2, v.1 + idx * v.2)
    }

    /// `(re base, im base, stride)` of one atom; every layout is affine in the index.
    #[inline]
    pub fn atom_strides(&self, atom: usize) -> (usize, usize, usize) {
        match self.layout {
            ArrayLayout::IndexFastest => {
                let b = 2 * atom * self.nidx;
                (b, b + 1, 2)
            }
            ArrayLayout::AtomFastest => (2 * atom, 2 * atom + 1, 2 * self.natoms),
            ArrayLayout::SplitIndexFastest => {
                let b = atom * self.nidx;
                (b, b + self.plane_len(), 1)
            }
            ArrayLayout::Aosoa { tile } => {
                let b = (atom / tile) * self.nidx * tile + atom % tile;
                (b, b + self.plane_len(), tile)
            }
        }
    }

    pub fn atom_view<'a>(&self, data: &'a [f64], atom: usize) -> Strided<'a> {
        let (re, im, stride) = self.atom_strides(atom);
        Strided {
            data,
            re,
            im,
            stride,
        }
    }

    fn check_logical(&self, n: usize) -> Result<()> {
        if n != self.natoms * self.nidx {
            return Err(SnapError::SizeMismatch {
                what: "logical array",
                expected: self.natoms * self.nidx,
                got: n,
            });
        }
        Ok(())
    }

    /// Places atom-major logical values into a fresh physical buffer; pads are zero.
    pub fn pack(&self, values: &[Complex64]) -> Result<Vec<f64>> {
        self.check_logical(values.len())?;
        let mut buf = vec![0.0; self.physical_len()];
        for a in 0..self.natoms {
            for i in 0..self.nidx {
                let (r, m) = self.slot(a, i);
                let v = values[a * self.nidx + i];
                buf[r] = v.re;
                buf[m] = v.im;
            }
        }
        Ok(buf)
    }

    pub fn unpack(&self, buf: &[f64]) -> Result<Vec<Complex64>> {
        if buf.len() != self.physical_len() {
            return Err(SnapError::SizeMismatch {
                what: "physical buffer",
                expected: self.physical_len(),
                got: buf.len(),
            });
        }
        let mut out = Vec::with_capacity(self.natoms * self.nidx);
        for a in 0..self.natoms {
            for i in 0..self.nidx {
                let (r, m) = self.slot(a, i);
                out.push(Complex64::new(buf[r], buf[m]));
            }
        }
        Ok(out)
    }
}

/// A per-atom complex array in one physical layout.
///
/// One spare slot lets the start of the data sit either on a 16-byte
/// boundary (`aligned`) or deliberately 8 bytes past one.
#[derive(Debug, Clone)]
pub struct ComplexArray {
    view: LayoutView,
    aligned: bool,
    buf: Vec<f64>,
    start: usize,
}

impl ComplexArray {
    pub fn zeros(view: LayoutView, aligned: bool) -> Self {
        let buf = vec![0.0; view.physical_len() + 1];
        let misalign = (buf.as_ptr() as usize / 8) % 2;
        let start = if aligned { misalign } else { 1 - misalign };
        Self {
            view,
            aligned,
            buf,
            start,
        }
    }

    pub fn from_logical(view: LayoutView, aligned: bool, values: &[Complex64]) -> Result<Self> {
        let packed = view.pack(values)?;
        let mut a = Self::zeros(view, aligned);
        a.data_mut().copy_from_slice(&packed);
        Ok(a)
    }

    pub fn view(&self) -> &LayoutView {
        &self.view
    }

    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    pub fn data(&self) -> &[f64] {
        &self.buf[self.start..self.start + self.view.physical_len()]
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        let len = self.view.physical_len();
        &mut self.buf[self.start..self.start + len]
    }

    pub fn atom(&self, atom: usize) -> Strided<'_> {
        self.view.atom_view(self.data(), atom)
    }

    pub fn get(&self, atom: usize, idx: usize) -> Complex64 {
        let (r, m) = self.view.slot(atom, idx);
        let d = self.data();
        Complex64::new(d[r], d[m])
    }

    pub fn set(&mut self, atom: usize, idx: usize, v: Complex64) {
        let (r, m) = self.view.slot(atom, idx);
        let d = self.data_mut();
        d[r] = v.re;
        d[m] = v.im;
    }

    pub fn to_logical(&self) -> Vec<Complex64> {
        self.view.unpack(self.data()).expect("consistent extents")
    }

    /// The same logical content in another layout.
    pub fn relayout(&self, layout: ArrayLayout, aligned: bool) -> Result<Self> {
        let view = LayoutView::new(self.view.natoms, self.view.nidx, layout)?;
        let mut out = Self::zeros(view, aligned);
        for a in 0..view.natoms {
            for i in 0..view.nidx {
                out.set(a, i, self.get(a, i));
            }
        }
        Ok(out)
    }

    /// Bytes implied by the extents and layout padding.
    pub fn logical_bytes(&self) -> u64 {
        (self.view.physical_len() * 8) as u64
    }

    pub fn allocated_bytes(&self) -> u64 {
        (self.buf.capacity() * 8) as u64
    }

    /// Sum of all logical real and imaginary parts in atom-major order.
    pub fn checksum(&self) -> f64 {
        self.to_logical().iter().map(|v| v.re + v.im).sum()
    }
}

/// Iteration and storage order of per-pair stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOrder {
    /// Rows follow the compressed neighbor list.
    NeighborFastest,
    /// Row `slot * natoms + atom`, padded to the longest neighbor list.
    AtomFastest,
}

/// A stack of `row_len` complex values per pair.
#[derive(Debug, Clone)]
pub struct PairArray {
    pub order: PairOrder,
    pub natoms: usize,
    pub nslots: usize,
    pub row_len: usize,
    pub data: Vec<Complex64>,
}

impl PairArray {
    pub fn rows_for(problem: &Problem, order: PairOrder) -> usize {
        match order {
            PairOrder::NeighborFastest => problem.npairs(),
            PairOrder::AtomFastest => problem.natoms() * problem.neighbors.max_count(),
        }
    }

    pub fn zeros(problem: &Problem, order: PairOrder, row_len: usize) -> Self {
        let rows = Self::rows_for(problem, order);
        Self {
            order,
            natoms: problem.natoms(),
            nslots: problem.neighbors.max_count(),
            row_len,
            data: vec![Complex64::new(0.0, 0.0); rows * row_len],
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.row_len.max(1)
    }

    /// Same extents with no storage, for row bookkeeping while `data` is borrowed.
    pub fn shape(&self) -> PairArray {
        PairArray {
            data: Vec::new(),
            ..*self
        }
    }

    /// Physical row of pair `p`.
    #[inline]
    pub fn row_of(&self, problem: &Problem, p: usize) -> usize {
        match self.order {
            PairOrder::NeighborFastest => p,
            PairOrder::AtomFastest => {
                let a = problem.owner(p);
                (p - problem.neighbors.offsets[a]) * self.natoms + a
            }
        }
    }

    /// Pair stored in physical row `row`, `None` for padding rows.
    #[inline]
    pub fn pair_of(&self, problem: &Problem, row: usize) -> Option<usize> {
        match self.order {
            PairOrder::NeighborFastest => Some(row),
            PairOrder::AtomFastest => {
                let (slot, a) = (row / self.natoms, row % self.natoms);
                (slot < problem.neighbors.count(a)).then(|| problem.neighbors.offsets[a] + slot)
            }
        }
    }

    pub fn row(&self, problem: &Problem, p: usize) -> &[Complex64] {
        let r = self.row_of(problem, p);
        &self.data[r * self.row_len..(r + 1) * self.row_len]
    }

    pub fn bytes(&self) -> u64 {
        (self.data.len() * 16) as u64
    }

    pub fn allocated_bytes(&self) -> u64 {
        (self.data.capacity() * 16) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layouts() -> Vec<ArrayLayout> {
        vec![
            ArrayLayout::IndexFastest,
            ArrayLayout::AtomFastest,
            ArrayLayout::SplitIndexFastest,
            ArrayLayout::Aosoa { tile: 1 },
            ArrayLayout::Aosoa { tile: 4 },
            ArrayLayout::Aosoa { tile: 32 },
        ]
    }

    #[test]
    fn aosoa_pads_to_whole_tiles() {
        let v = LayoutView::new(6, 5, ArrayLayout::Aosoa { tile: 4 }).unwrap();
        assert_eq!(v.padded_atoms(), 8);
        let values: Vec<Complex64> = (0..30).map(|i| Complex64::new(i as f64 + 1.0, 0.5)).collect();
        let buf = v.pack(&values).unwrap();
        // atoms 6 and 7 of the last block stay zero
        for i in 0..5 {
            for pad in [6, 7] {
                let (r, m) = v.slot(pad, i);
                assert_eq!((buf[r], buf[m]), (0.0, 0.0));
            }
        }
        assert!(LayoutView::new(6, 5, ArrayLayout::Aosoa { tile: 0 }).is_err());
    }

    #[test]
    fn split_planes_each_hold_the_logical_count() {
        let v = LayoutView::new(3, 7, ArrayLayout::SplitIndexFastest).unwrap();
        assert_eq!(v.plane_len(), 21);
        assert_eq!(v.physical_len(), 42);
        let (r, m) = v.slot(2, 6);
        assert_eq!((r, m), (20, 41));
    }

    #[test]
    fn atom_fastest_slot() {
        let v = LayoutView::new(5, 9, ArrayLayout::AtomFastest).unwrap();
        assert_eq!(v.slot(3, 7), (2 * (7 * 5 + 3), 2 * (7 * 5 + 3) + 1));
    }

    #[test]
    fn alignment_flag_controls_start_address() {
        let v = LayoutView::new(4, 3, ArrayLayout::IndexFastest).unwrap();
        for aligned in [true, false] {
            let a = ComplexArray::zeros(v, aligned);
            let addr = a.data().as_ptr() as usize;
            assert_eq!(addr % 16 == 0, aligned);
            assert!(a.allocated_bytes() - a.logical_bytes() <= 8);
        }
    }

    #[test]
    fn pack_rejects_wrong_extent() {
        let v = LayoutView::new(2, 2, ArrayLayout::IndexFastest).unwrap();
        assert!(v.pack(&[Complex64::new(0.0, 0.0); 3]).is_err());
        assert!(v.unpack(&[0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_is_exact(
            natoms in 1usize..40,
            nidx in 1usize..12,
            seed in proptest::collection::vec(-1e3f64..1e3, 1..64),
        ) {
            let values: Vec<Complex64> = (0..natoms * nidx)
                .map(|i| Complex64::new(seed[i % seed.len()] * (i as f64 + 0.25), -seed[(3 * i) % seed.len()]))
                .collect();
            let base = ComplexArray::from_logical(
                LayoutView::new(natoms, nidx, ArrayLayout::IndexFastest).unwrap(), true, &values).unwrap();
            for layout in layouts() {
                let v = LayoutView::new(natoms, nidx, layout).unwrap();
                let back = v.unpack(&v.pack(&values).unwrap()).unwrap();
                prop_assert_eq!(&back, &values);
                let moved = base.relayout(layout, false).unwrap();
                prop_assert_eq!(moved.checksum().to_bits(), base.checksum().to_bits());
                let round = moved.relayout(ArrayLayout::IndexFastest, true).unwrap();
                prop_assert_eq!(round.data(), base.data());
            }
        }
    }
}

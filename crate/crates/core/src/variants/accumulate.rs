//! Shared-write helpers for parallel stages.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicU64, Ordering};

/// A mutable `f64` buffer that parallel tasks write at disjoint slots.
pub struct DisjointWriter<'a> {
    ptr: *mut f64,
    len: usize,
    _marker: PhantomData<&'a mut [f64]>,
}

// SAFETY: callers of `write`/`add` guarantee that no two tasks touch the same
// slot concurrently.
unsafe impl Send for DisjointWriter<'_> {}
unsafe impl Sync for DisjointWriter<'_> {}

impl<'a> DisjointWriter<'a> {
    pub fn new(buf: &'a mut [f64]) -> Self {
        Self {
            ptr: buf.as_mut_ptr(),
            len: buf.len(),
            _marker: PhantomData,
        }
    }

    /// # Safety
    /// No other task may access slot `i` concurrently.
    #[inline]
    pub unsafe fn write(&self, i: usize, v: f64) {
        assert!(i < self.len);
        *self.ptr.add(i) = v;
    }

    /// # Safety
    /// As for [`write`](Self::write).
    #[inline]
    pub unsafe fn add(&self, i: usize, v: f64) {
        assert!(i < self.len);
        *self.ptr.add(i) += v;
    }
}

/// Atomic read-modify-write adds on an `f64` buffer.
pub struct AtomicAdder<'a> {
    cells: &'a [AtomicU64],
}

impl<'a> AtomicAdder<'a> {
    pub fn new(buf: &'a mut [f64]) -> Self {
        // SAFETY: AtomicU64 has the size and, on every supported target, the
        // alignment of f64; the exclusive borrow rules out non-atomic access.
        assert_eq!(std::mem::align_of::<AtomicU64>(), std::mem::align_of::<f64>());
        let cells =
            unsafe { std::slice::from_raw_parts(buf.as_mut_ptr() as *const AtomicU64, buf.len()) };
        Self { cells }
    }

    #[inline]
    pub fn add(&self, i: usize, v: f64) {
        let cell = &self.cells[i];
        let mut cur = cell.load(Ordering::Relaxed);
        loop {
            let next = (f64::from_bits(cur) + v).to_bits();
            match cell.compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return,
                Err(seen) => cur = seen,
            }
        }
    }
}

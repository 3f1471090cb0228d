//! Numeric tolerances shared by tests, oracles and the `verify` command.
//!
//! All comparisons of vectors use the relative max-norm
//! `max|a - b| / max(max|b|, ABS_FLOOR)`.

/// Absolute floor applied to the denominator of relative comparisons.
pub const ABS_FLOOR: f64 = 1e-14;

/// |a|^2 + |b|^2 = 1 for the Cayley-Klein parameters.
pub const CAYLEY_KLEIN_NORM: f64 = 1e-14;

/// Row norms of every Wigner block.
pub const UNITARITY: f64 = 1e-12;

/// u[j-r][j-c] = (-1)^(r+c) conj(u[r][c]).
pub const WIGNER_SYMMETRY: f64 = 1e-12;

/// Clebsch-Gordan orthogonality sum rule.
pub const CG_ORTHOGONALITY: f64 = 1e-12;

/// Recursion against the explicit factorial-sum Wigner formula.
pub const WIGNER_DIRECT: f64 = 1e-10;

/// Finite-difference step as a fraction of the cutoff radius.
pub const FD_STEP_FRACTION: f64 = 1e-6;

/// Analytic Cayley-Klein derivatives against central differences.
pub const FD_MAPPING: f64 = 1e-6;

/// Analytic gradients (dU, dB, forces) against central differences.
pub const FD_GRADIENT: f64 = 1e-5;

/// Imaginary residue of a bispectrum component, relative to max(1, |B|).
pub const B_IMAG_RESIDUE: f64 = 1e-11;

/// Rotation invariance of per-atom bispectrum vectors.
pub const ROTATION_INVARIANCE: f64 = 1e-9;

/// Baseline (Z/dB) forces against adjoint (Y/dE) forces.
pub const CROSS_PIPELINE: f64 = 1e-10;

/// Any builtin variant against baseline-z.
pub const VARIANT_PHYSICS: f64 = 1e-8;

/// Between deterministic serialized variants.
pub const VARIANT_DETERMINISTIC: f64 = 1e-12;

/// Staged (stored dU) against fused (recomputed dU) force contributions.
pub const STAGED_VS_FUSED: f64 = 1e-12;

/// Sum of all forces, relative to the largest force magnitude.
pub const NEWTON_SUM: f64 = 1e-10;

/// Sum reordering (permuted neighbor lists) of Ulisttot.
pub const SUM_REORDER: f64 = 1e-12;

/// Linearity of the energy in beta.
pub const ENERGY_LINEARITY: f64 = 1e-12;

/// Concurrent atomic adds against privatized reduction.
pub const ACCUMULATION_STRATEGY: f64 = 1e-8;

/// Fraction of the 0.9 Rcut contribution allowed at Rcut (1 - 1e-8).
pub const CUTOFF_SMOOTHNESS: f64 = 1e-6;

/// Speedup ratio band outside which a self-comparison is flagged unstable.
pub const SPEEDUP_NOISE: f64 = 0.2;

/// Relative max-norm difference between two equally sized sequences.
pub fn rel_max_diff(actual: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(actual.len(), reference.len(), "length mismatch");
    let scale = reference
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(ABS_FLOOR);
    let diff = actual
        .iter()
        .zip(reference)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

/// Flattens a slice of 3-vectors for norm comparisons.
pub fn flatten3(v: &[[f64; 3]]) -> Vec<f64> {
    v.iter().flat_map(|x| x.iter().copied()).collect()
}

//! Independent reference implementations and verification checks.

pub mod checks;
pub mod energy;
pub mod wigner;

pub use checks::{
    cross_pipeline_check, finite_difference_forces, finite_difference_forces_with,
    newton_sum_check, rotation_invariance_check, verify_suite, CheckResult,
};
pub use energy::{oracle_bispectrum, oracle_energy, oracle_triples};
pub use wigner::{clebsch_gordan, wigner_direct, ORACLE_MAX_TWOJ};

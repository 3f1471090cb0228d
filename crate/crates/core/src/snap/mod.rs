//! Bispectrum descriptors, energies and forces.

pub mod kernels;
pub mod problem;
pub mod stages;
pub mod state;

pub use kernels::SnapContext;
pub use problem::{Geometry, NeighborList, Problem, SnapParams, DEFAULT_RCUT};
pub use state::{ArrayBytes, DescriptorState};

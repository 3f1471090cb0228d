use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::halfint::TwoJ;
use crate::snap::problem::{SnapParams, DEFAULT_RCUT};
use crate::variants::spec::{builtin_variants_with_tile, DEFAULT_TILE};

/// How neighbor lists are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    /// Exactly `nnbor` fabricated displacements per atom.
    Synthetic,
    /// Uniform atoms in a periodic box tuned to the target mean count.
    Periodic,
    /// A compact open-boundary cluster; every pair within the cutoff.
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub natoms: usize,
    /// Target neighbors per atom.
    pub nnbor: usize,
    pub twojmax: u32,
    pub rcut: f64,
    pub rmin0: f64,
    pub rfac0: f64,
    pub seed: u64,
    pub steps: usize,
    pub variants: Vec<String>,
    pub workers: usize,
    pub deterministic: bool,
    pub neighbor_mode: NeighborMode,
    pub tile: usize,
    pub memory_budget: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            natoms: 2000,
            nnbor: 26,
            twojmax: 8,
            rcut: DEFAULT_RCUT,
            rmin0: 0.0,
            rfac0: crate::angular::DEFAULT_RFAC0,
            seed: 1,
            steps: 5,
            variants: Vec::new(),
            workers: default_workers(),
            deterministic: false,
            neighbor_mode: NeighborMode::Synthetic,
            tile: DEFAULT_TILE,
            memory_budget: None,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.natoms == 0 {
            return Err(SnapError::InvalidConfig("natoms must be >= 1".into()));
        }
        if self.steps == 0 {
            return Err(SnapError::InvalidConfig("steps must be >= 1".into()));
        }
        if self.tile == 0 {
            return Err(SnapError::InvalidConfig("tile must be >= 1".into()));
        }
        let names: Vec<String> = builtin_variants_with_tile(self.tile)
            .into_iter()
            .map(|v| v.name)
            .collect();
        for v in &self.variants {
            if !names.contains(v) {
                return Err(SnapError::UnknownVariant(v.clone()));
            }
        }
        self.params().validate()
    }

    /// Parameters with zero coefficients; generation fills in β.
    pub fn params(&self) -> SnapParams {
        let mut p = SnapParams::new(TwoJ(self.twojmax));
        p.rcut = self.rcut;
        p.rmin0 = self.rmin0;
        p.rfac0 = self.rfac0;
        p
    }
}

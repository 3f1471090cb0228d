//! Versioned JSON problem files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::snap::problem::{Geometry, NeighborList, Problem, SnapParams};

pub const PROBLEM_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema: u32,
    pub positions: Vec<[f64; 3]>,
    pub types: Vec<usize>,
    pub box_length: Option<f64>,
    pub geometry: Geometry,
    pub neighbors: NeighborList,
    pub params: SnapParams,
    pub seed: Option<u64>,
}

impl From<&Problem> for ProblemFile {
    fn from(p: &Problem) -> Self {
        Self {
            schema: PROBLEM_SCHEMA,
            positions: p.positions.clone(),
            types: p.types.clone(),
            box_length: p.box_length,
            geometry: p.geometry,
            neighbors: p.neighbors.clone(),
            params: p.params.clone(),
            seed: p.seed,
        }
    }
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<Problem> {
        if self.schema != PROBLEM_SCHEMA {
            return Err(SnapError::InvalidConfig(format!(
                "unsupported problem schema {} (expected {PROBLEM_SCHEMA})",
                self.schema
            )));
        }
        Problem::new(
            self.positions,
            self.types,
            self.box_length,
            self.geometry,
            self.neighbors,
            self.params,
            self.seed,
        )
    }
}

pub fn problem_to_json(p: &Problem) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ProblemFile::from(p))?)
}

pub fn problem_from_json(s: &str) -> Result<Problem> {
    serde_json::from_str::<ProblemFile>(s)?.into_problem()
}

pub fn write_problem(p: &Problem, path: &Path) -> Result<()> {
    std::fs::write(path, problem_to_json(p)?)?;
    Ok(())
}

pub fn read_problem(path: &Path) -> Result<Problem> {
    problem_from_json(&std::fs::read_to_string(path)?)
}

use serde::{Deserialize, Serialize};

use crate::angular::DEFAULT_RFAC0;
use crate::error::{Result, SnapError};
use crate::halfint::{enumerate_bispectrum_triples, TwoJ};

/// Default cutoff radius (length units).
pub const DEFAULT_RCUT: f64 = 4.67637;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapParams {
    pub twojmax: TwoJ,
    pub rcut: f64,
    pub rmin0: f64,
    pub rfac0: f64,
    /// Neighbor density weight per atom type.
    pub type_weights: Vec<f64>,
    pub wself: f64,
    pub self_contribution: bool,
    /// Linear coefficients, one per bispectrum triple.
    pub beta: Vec<f64>,
}

impl SnapParams {
    /// Defaults with all-zero coefficients.
    pub fn new(twojmax: TwoJ) -> Self {
        Self {
            twojmax,
            rcut: DEFAULT_RCUT,
            rmin0: 0.0,
            rfac0: DEFAULT_RFAC0,
            type_weights: vec![1.0],
            wself: 1.0,
            self_contribution: true,
            beta: vec![0.0; enumerate_bispectrum_triples(twojmax).len()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rcut > self.rmin0 && self.rmin0 >= 0.0) {
            return Err(SnapError::InvalidCutoff {
                rcut: self.rcut,
                rmin0: self.rmin0,
            });
        }
        if !(self.rfac0 > 0.0 && self.rfac0 <= 1.0) {
            return Err(SnapError::InvalidRfac0(self.rfac0));
        }
        let nb = enumerate_bispectrum_triples(self.twojmax).len();
        if self.beta.len() != nb {
            return Err(SnapError::SizeMismatch {
                what: "beta",
                expected: nb,
                got: self.beta.len(),
            });
        }
        if self.type_weights.is_empty() {
            return Err(SnapError::InvalidConfig("type_weights is empty".into()));
        }
        Ok(())
    }

    pub fn self_weight(&self) -> f64 {
        if self.self_contribution {
            self.wself
        } else {
            0.0
        }
    }
}

/// How neighbor displacements relate to atom positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Periodic cubic box, displacements are minimum-image position differences.
    Periodic,
    /// Open boundaries, displacements are plain position differences.
    Open,
    /// Displacements fabricated independently of positions.
    Synthetic,
}

/// Neighbor lists in compressed-row form; pair `p` of atom `i` lives in
/// `offsets[i]..offsets[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub offsets: Vec<usize>,
    pub index: Vec<usize>,
    pub displacement: Vec<[f64; 3]>,
}

impl NeighborList {
    pub fn from_rows(rows: Vec<Vec<(usize, [f64; 3])>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut index = Vec::new();
        let mut displacement = Vec::new();
        offsets.push(0);
        for row in rows {
            for (k, d) in row {
                index.push(k);
                displacement.push(d);
            }
            offsets.push(index.len());
        }
        Self {
            offsets,
            index,
            displacement,
        }
    }

    pub fn natoms(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn npairs(&self) -> usize {
        self.index.len()
    }

    pub fn range(&self, atom: usize) -> std::ops::Range<usize> {
        self.offsets[atom]..self.offsets[atom + 1]
    }

    pub fn count(&self, atom: usize) -> usize {
        self.offsets[atom + 1] - self.offsets[atom]
    }

    pub fn max_count(&self) -> usize {
        (0..self.natoms()).map(|i| self.count(i)).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub positions: Vec<[f64; 3]>,
    pub types: Vec<usize>,
    pub box_length: Option<f64>,
    pub geometry: Geometry,
    pub neighbors: NeighborList,
    pub params: SnapParams,
    pub seed: Option<u64>,
    owner: Vec<usize>,
    reverse_offsets: Vec<usize>,
    reverse_pairs: Vec<usize>,
}

impl Problem {
    pub fn new(
        positions: Vec<[f64; 3]>,
        types: Vec<usize>,
        box_length: Option<f64>,
        geometry: Geometry,
        neighbors: NeighborList,
        params: SnapParams,
        seed: Option<u64>,
    ) -> Result<Self> {
        params.validate()?;
        let n = positions.len();
        if types.len() != n {
            return Err(SnapError::SizeMismatch {
                what: "types",
                expected: n,
                got: types.len(),
            });
        }
        if let Some(&t) = types.iter().find(|&&t| t >= params.type_weights.len()) {
            return Err(SnapError::InvalidConfig(format!(
                "atom type {t} has no weight"
            )));
        }
        if neighbors.offsets.len() != n + 1
            || neighbors.offsets[0] != 0
            || neighbors.offsets.windows(2).any(|w| w[1] < w[0])
            || neighbors.offsets[n] != neighbors.index.len()
            || neighbors.index.len() != neighbors.displacement.len()
        {
            return Err(SnapError::SizeMismatch {
                what: "neighbor list offsets",
                expected: n + 1,
                got: neighbors.offsets.len(),
            });
        }
        if geometry == Geometry::Periodic && box_length.is_none() {
            return Err(SnapError::InvalidConfig(
                "periodic geometry needs a box length".into(),
            ));
        }
        let mut owner = vec![0; neighbors.npairs()];
        for i in 0..n {
            for p in neighbors.range(i) {
                owner[p] = i;
                let k = neighbors.index[p];
                if k >= n {
                    return Err(SnapError::InvalidConfig(format!(
                        "neighbor index {k} out of range for {n} atoms"
                    )));
                }
                if k == i {
                    return Err(SnapError::InvalidConfig(format!(
                        "atom {i} lists itself as a neighbor"
                    )));
                }
                let d = neighbors.displacement[p];
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r == 0.0 {
                    return Err(SnapError::ZeroDisplacement {
                        atom: i,
                        neighbor: k,
                    });
                }
                if !(r > params.rmin0 && r < params.rcut) {
                    return Err(SnapError::OutsideCutoff {
                        r,
                        rmin0: params.rmin0,
                        rcut: params.rcut,
                    });
                }
            }
        }

        // pairs in which each atom is the neighbor, in increasing pair order
        let mut reverse_offsets = vec![0usize; n + 1];
        for &k in &neighbors.index {
            reverse_offsets[k + 1] += 1;
        }
        for i in 0..n {
            reverse_offsets[i + 1] += reverse_offsets[i];
        }
        let mut fill = reverse_offsets.clone();
        let mut reverse_pairs = vec![0; neighbors.npairs()];
        for (p, &k) in neighbors.index.iter().enumerate() {
            reverse_pairs[fill[k]] = p;
            fill[k] += 1;
        }

        Ok(Self {
            positions,
            types,
            box_length,
            geometry,
            neighbors,
            params,
            seed,
            owner,
            reverse_offsets,
            reverse_pairs,
        })
    }

    pub fn natoms(&self) -> usize {
        self.positions.len()
    }

    pub fn npairs(&self) -> usize {
        self.neighbors.npairs()
    }

    pub fn twojmax(&self) -> TwoJ {
        self.params.twojmax
    }

    /// Central atom of pair `p`.
    pub fn owner(&self, p: usize) -> usize {
        self.owner[p]
    }

    /// Pairs whose neighbor is `atom`, in increasing pair order.
    pub fn reverse_pairs(&self, atom: usize) -> &[usize] {
        &self.reverse_pairs[self.reverse_offsets[atom]..self.reverse_offsets[atom + 1]]
    }

    /// Density weight of the neighbor in pair `p`.
    pub fn pair_weight(&self, p: usize) -> f64 {
        self.params.type_weights[self.types[self.neighbors.index[p]]]
    }

    /// Copy with new coefficients.
    pub fn with_beta(&self, beta: Vec<f64>) -> Result<Self> {
        let mut params = self.params.clone();
        params.beta = beta;
        Self::new(
            self.positions.clone(),
            self.types.clone(),
            self.box_length,
            self.geometry,
            self.neighbors.clone(),
            params,
            self.seed,
        )
    }

    /// Copy with every displacement replaced by `f(displacement)`.
    pub fn map_displacements(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self> {
        let mut neighbors = self.neighbors.clone();
        for d in &mut neighbors.displacement {
            *d = f(*d);
        }
        Self::new(
            self.positions.clone(),
            self.types.clone(),
            self.box_length,
            Geometry::Synthetic,
            neighbors,
            self.params.clone(),
            self.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SnapParams {
        SnapParams::new(TwoJ(2))
    }

    #[test]
    fn rejects_zero_displacement() {
        let nl = NeighborList::from_rows(vec![vec![(1, [0.0; 3])], vec![]]);
        let err = Problem::new(
            vec![[0.0; 3]; 2],
            vec![0; 2],
            None,
            Geometry::Synthetic,
            nl,
            params(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, SnapError::ZeroDisplacement { atom: 0, neighbor: 1 }));
    }

    #[test]
    fn rejects_displacement_beyond_cutoff() {
        let nl = NeighborList::from_rows(vec![vec![(1, [0.0, 0.0, DEFAULT_RCUT])], vec![]]);
        assert!(Problem::new(
            vec![[0.0; 3]; 2],
            vec![0; 2],
            None,
            Geometry::Synthetic,
            nl,
            params(),
            None
        )
        .is_err());
    }

    #[test]
    fn rejects_wrong_beta_length() {
        let mut p = params();
        p.beta.push(1.0);
        assert!(matches!(p.validate(), Err(SnapError::SizeMismatch { .. })));
    }

    #[test]
    fn reverse_pairs_are_sorted() {
        let rows = vec![
            vec![(1, [1.0, 0.0, 0.0]), (2, [0.0, 1.0, 0.0])],
            vec![(0, [-1.0, 0.0, 0.0]), (2, [-1.0, 1.0, 0.0])],
            vec![(0, [0.0, -1.0, 0.0]), (1, [1.0, -1.0, 0.0])],
        ];
        let pr = Problem::new(
            vec![[0.0; 3]; 3],
            vec![0; 3],
            None,
            Geometry::Synthetic,
            NeighborList::from_rows(rows),
            params(),
            None,
        )
        .unwrap();
        assert_eq!(pr.reverse_pairs(0), &[2, 4]);
        assert_eq!(pr.reverse_pairs(1), &[0, 5]);
        assert_eq!(pr.reverse_pairs(2), &[1, 3]);
        assert_eq!(pr.owner(3), 1);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::variants::layout::{ArrayLayout, PairOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Stored Z, per-component derivatives dB.
    Baseline,
    /// Y accumulated from Z on the fly, forces from dU : Y.
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Staging {
    Monolithic,
    Fissioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParallelAxes {
    Atoms,
    AtomsNeighbors,
    AtomsNeighborsIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexLayout {
    Interleaved,
    SplitRealImag,
    Aosoa { tile: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    Serialized,
    /// Every output element is owned by one task, which reduces its
    /// contributions in a fixed order.
    Privatized,
    ConcurrentRmw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Materialize {
    pub ulist: bool,
    pub zlist: bool,
    pub dulist: bool,
}

/// Declarative description of one execution strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub formulation: Formulation,
    pub staging: Staging,
    pub parallel_axes: ParallelAxes,
    pub index_order: PairOrder,
    pub layout: ComplexLayout,
    pub half_symmetry: bool,
    pub transpose_before_y: bool,
    pub du_fission_per_direction: bool,
    pub fuse_du_with_force: bool,
    pub materialize: Materialize,
    pub accumulation: Accumulation,
    pub aligned_complex: bool,
    /// Layout Ulisttot is accumulated in.
    pub ulisttot_accum: ArrayLayout,
    /// Layout Ulisttot is read in by the Y stage.
    pub ulisttot_read: ArrayLayout,
    pub ylist: ArrayLayout,
}

fn inconsistent(name: &str, reason: &str) -> SnapError {
    SnapError::InconsistentVariant {
        name: name.to_string(),
        reason: reason.to_string(),
    }
}

impl VariantSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: &str| Err(inconsistent(&self.name, r));
        let m = self.materialize;
        if self.fuse_du_with_force && m.dulist {
            return bad("fused dU/force kernel cannot materialize dUlist");
        }
        match self.formulation {
            Formulation::Adjoint => {
                if m.zlist {
                    return bad("adjoint pipeline cannot materialize Zlist");
                }
                if !self.fuse_du_with_force && !m.dulist {
                    return bad("staged adjoint forces need dUlist");
                }
                if m.dulist && !m.ulist {
                    return bad("staged dU reads Ulist");
                }
            }
            Formulation::Baseline => {
                if !m.zlist {
                    return bad("baseline pipeline needs Zlist");
                }
                if self.staging != Staging::Monolithic {
                    return bad("baseline pipeline runs monolithic");
                }
                if self.fuse_du_with_force || self.half_symmetry {
                    return bad("fusion and half symmetry apply to the adjoint pipeline");
                }
            }
        }
        for l in [self.ulisttot_accum, self.ulisttot_read, self.ylist] {
            if l.tile() == Some(0) {
                return bad("AoSoA tile must be >= 1");
            }
        }
        if let ComplexLayout::Aosoa { tile } = self.layout {
            if tile == 0 {
                return bad("AoSoA tile must be >= 1");
            }
            if self.ylist != (ArrayLayout::Aosoa { tile }) {
                return bad("AoSoA layout applies to Ylist with the same tile");
            }
        }
        let ylist_ok = match self.layout {
            ComplexLayout::Interleaved => matches!(
                self.ylist,
                ArrayLayout::IndexFastest | ArrayLayout::AtomFastest
            ),
            ComplexLayout::SplitRealImag => self.ylist == ArrayLayout::SplitIndexFastest,
            ComplexLayout::Aosoa { .. } => true,
        };
        if !ylist_ok {
            return bad("Ylist layout does not match the complex layout");
        }
        if let ArrayLayout::Aosoa { tile } = self.ylist {
            if self.ulisttot_read != (ArrayLayout::Aosoa { tile }) {
                return bad("tile-wise Y needs Ulisttot in the same AoSoA tiles");
            }
        }
        let needs_transpose = self.half_symmetry || self.ulisttot_accum != self.ulisttot_read;
        if needs_transpose != self.transpose_before_y {
            return bad("transpose_before_y must be set exactly when Ulisttot changes layout or storage");
        }
        if self.du_fission_per_direction && !self.fuse_du_with_force && !m.dulist {
            return bad("per-direction dU fission needs a dU stage");
        }
        Ok(())
    }

    pub fn materialized_arrays(&self) -> Vec<&'static str> {
        let mut v = vec!["ulisttot"];
        if self.transpose_before_y {
            v.push("ulisttot_read");
        }
        if self.materialize.ulist {
            v.push("ulist");
        }
        if self.materialize.zlist {
            v.push("zlist");
        }
        v.push("blist");
        if self.formulation == Formulation::Adjoint {
            v.push("ylist");
        }
        if self.materialize.dulist {
            v.push("dulist");
        }
        v.push("delist");
        v.push("forces");
        v
    }
}

/// Default AoSoA tile width.
pub const DEFAULT_TILE: usize = 32;

/// The optimization ladder, in order.
pub fn builtin_variants() -> Vec<VariantSpec> {
    builtin_variants_with_tile(DEFAULT_TILE)
}

pub fn builtin_variants_with_tile(tile: usize) -> Vec<VariantSpec> {
    let baseline = VariantSpec {
        name: "baseline-z".into(),
        formulation: Formulation::Baseline,
        staging: Staging::Monolithic,
        parallel_axes: ParallelAxes::Atoms,
        index_order: PairOrder::NeighborFastest,
        layout: ComplexLayout::Interleaved,
        half_symmetry: false,
        transpose_before_y: false,
        du_fission_per_direction: false,
        fuse_du_with_force: false,
        materialize: Materialize {
            ulist: false,
            zlist: true,
            dulist: false,
        },
        accumulation: Accumulation::Privatized,
        aligned_complex: false,
        ulisttot_accum: ArrayLayout::IndexFastest,
        ulisttot_read: ArrayLayout::IndexFastest,
        ylist: ArrayLayout::IndexFastest,
    };
    let v1 = VariantSpec {
        name: "v1".into(),
        formulation: Formulation::Adjoint,
        staging: Staging::Fissioned,
        materialize: Materialize {
            ulist: true,
            zlist: false,
            dulist: true,
        },
        ..baseline.clone()
    };
    let v2 = VariantSpec {
        name: "v2".into(),
        parallel_axes: ParallelAxes::AtomsNeighbors,
        accumulation: Accumulation::ConcurrentRmw,
        ..v1.clone()
    };
    let v3 = VariantSpec {
        name: "v3".into(),
        ulisttot_accum: ArrayLayout::AtomFastest,
        ulisttot_read: ArrayLayout::AtomFastest,
        ylist: ArrayLayout::AtomFastest,
        ..v2.clone()
    };
    let v4 = VariantSpec {
        name: "v4".into(),
        index_order: PairOrder::AtomFastest,
        ..v3.clone()
    };
    let v5 = VariantSpec {
        name: "v5".into(),
        parallel_axes: ParallelAxes::AtomsNeighborsIndex,
        ..v4.clone()
    };
    let v6 = VariantSpec {
        name: "v6".into(),
        transpose_before_y: true,
        ulisttot_read: ArrayLayout::IndexFastest,
        ..v5.clone()
    };
    let v7 = VariantSpec {
        name: "v7".into(),
        aligned_complex: true,
        ..v6.clone()
    };
    let fused = VariantSpec {
        name: "fused".into(),
        parallel_axes: ParallelAxes::AtomsNeighbors,
        index_order: PairOrder::NeighborFastest,
        layout: ComplexLayout::Aosoa { tile },
        half_symmetry: true,
        transpose_before_y: true,
        du_fission_per_direction: true,
        fuse_du_with_force: true,
        materialize: Materialize::default(),
        ulisttot_accum: ArrayLayout::SplitIndexFastest,
        ulisttot_read: ArrayLayout::Aosoa { tile },
        ylist: ArrayLayout::Aosoa { tile },
        ..v7.clone()
    };
    vec![baseline, v1, v2, v3, v4, v5, v6, v7, fused]
}

pub fn find_variant(name: &str) -> Result<VariantSpec> {
    builtin_variants()
        .into_iter()
        .find(|v| v.name == name)
        .ok_or_else(|| SnapError::UnknownVariant(name.to_string()))
}

pub fn variant_names() -> Vec<String> {
    builtin_variants().into_iter().map(|v| v.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_shape() {
        let v = builtin_variants();
        assert_eq!(v.len(), 9);
        let names: Vec<&str> = v.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            ["baseline-z", "v1", "v2", "v3", "v4", "v5", "v6", "v7", "fused"]
        );
        for s in &v {
            s.validate().unwrap();
        }
        let by = |n: &str| v.iter().find(|s| s.name == n).unwrap();
        assert!(by("v6").transpose_before_y);
        assert!(!by("v5").transpose_before_y);
        let fused = by("fused");
        assert!(!fused.materialize.ulist && !fused.materialize.dulist);
        assert!(!fused.materialized_arrays().contains(&"ulist"));
        assert!(!fused.materialized_arrays().contains(&"dulist"));
        assert!(by("v7").aligned_complex && !by("v6").aligned_complex);
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        let mut s = find_variant("fused").unwrap();
        s.materialize.dulist = true;
        assert!(matches!(s.validate(), Err(SnapError::InconsistentVariant { .. })));

        let mut s = find_variant("v1").unwrap();
        s.materialize.zlist = true;
        assert!(s.validate().is_err());

        let mut s = find_variant("v3").unwrap();
        s.ulisttot_read = ArrayLayout::IndexFastest;
        assert!(s.validate().is_err());

        let mut s = find_variant("fused").unwrap();
        s.layout = ComplexLayout::Aosoa { tile: 0 };
        assert!(s.validate().is_err());

        assert!(matches!(find_variant("v9"), Err(SnapError::UnknownVariant(_))));
    }
}

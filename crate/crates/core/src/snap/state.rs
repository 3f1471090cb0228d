use serde::{Deserialize, Serialize};

use crate::variants::layout::{ComplexArray, PairArray};

/// Bytes held by one named array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayBytes {
    pub name: String,
    /// Extent times element size, including layout padding.
    pub logical: u64,
    pub allocated: u64,
}

impl ArrayBytes {
    pub fn new(name: &str, logical: u64, allocated: u64) -> Self {
        Self {
            name: name.to_string(),
            logical,
            allocated,
        }
    }
}

/// Intermediate arrays of one pipeline run; absent entries were not materialized.
#[derive(Debug, Clone, Default)]
pub struct DescriptorState {
    pub ulisttot: Option<ComplexArray>,
    pub ulisttot_half: bool,
    pub ulisttot_read: Option<ComplexArray>,
    pub ulist: Option<PairArray>,
    pub zlist: Option<ComplexArray>,
    pub ylist: Option<ComplexArray>,
    pub dulist: Option<PairArray>,
    pub blist: Vec<f64>,
    pub delist: Vec<[f64; 3]>,
    pub forces: Vec<[f64; 3]>,
}

impl DescriptorState {
    pub fn array_bytes(&self) -> Vec<ArrayBytes> {
        let mut out = Vec::new();
        let complex = [
            ("ulisttot", &self.ulisttot),
            ("ulisttot_read", &self.ulisttot_read),
        ];
        for (name, a) in complex {
            if let Some(a) = a {
                out.push(ArrayBytes::new(name, a.logical_bytes(), a.allocated_bytes()));
            }
        }
        if let Some(a) = &self.ulist {
            out.push(ArrayBytes::new("ulist", a.bytes(), a.allocated_bytes()));
        }
        if let Some(a) = &self.zlist {
            out.push(ArrayBytes::new("zlist", a.logical_bytes(), a.allocated_bytes()));
        }
        out.push(vec_bytes("blist", self.blist.len(), self.blist.capacity(), 8));
        if let Some(a) = &self.ylist {
            out.push(ArrayBytes::new("ylist", a.logical_bytes(), a.allocated_bytes()));
        }
        if let Some(a) = &self.dulist {
            out.push(ArrayBytes::new("dulist", a.bytes(), a.allocated_bytes()));
        }
        out.push(vec_bytes("delist", self.delist.len(), self.delist.capacity(), 24));
        out.push(vec_bytes("forces", self.forces.len(), self.forces.capacity(), 24));
        out
    }
}

fn vec_bytes(name: &str, len: usize, cap: usize, elem: u64) -> ArrayBytes {
    ArrayBytes::new(name, len as u64 * elem, cap as u64 * elem)
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnapError {
    #[error("zero-length displacement between atom {atom} and neighbor {neighbor}")]
    ZeroDisplacement { atom: usize, neighbor: usize },

    #[error("displacement vector has zero length")]
    ZeroLengthDisplacement,

    #[error("neighbor distance {r} lies outside the open window ({rmin0}, {rcut})")]
    OutsideCutoff { r: f64, rmin0: f64, rcut: f64 },

    #[error("cutoff radius {rcut} must exceed inner radius {rmin0} (and rmin0 >= 0)")]
    InvalidCutoff { rcut: f64, rmin0: f64 },

    #[error("rfac0 must lie in (0, 1], got {0}")]
    InvalidRfac0(f64),

    #[error("size mismatch for {what}: expected {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("2J = {twojmax} exceeds the supported band 2J <= {max}")]
    BandLimit { twojmax: u32, max: u32 },

    #[error("inconsistent variant `{name}`: {reason}")]
    InconsistentVariant { name: String, reason: String },

    #[error("unknown variant `{0}`")]
    UnknownVariant(String),

    #[error("{array} needs {required} bytes, above the memory budget of {budget} bytes")]
    MemoryBudget {
        array: String,
        required: u64,
        budget: u64,
    },

    #[error("bispectrum component {component} of atom {atom} has imaginary residue {residue:e}")]
    ImaginaryResidue {
        atom: usize,
        component: usize,
        residue: f64,
    },

    #[error("cutoff {rcut} exceeds half the box length {box_length}")]
    CutoffExceedsHalfBox { rcut: f64, box_length: f64 },

    #[error("cannot reach {target} neighbors per atom with {natoms} atoms (best mean {best:.2})")]
    UnreachableNeighborCount {
        target: f64,
        natoms: usize,
        best: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("oracle supports 2j <= {max}, got {twoj}")]
    OracleBound { twoj: u32, max: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SnapError>;

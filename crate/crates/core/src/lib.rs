pub mod angular;
pub mod error;
pub mod halfint;
pub mod harness;
pub mod oracle;
pub mod snap;
pub mod tolerances;
pub mod variants;

pub use error::{Result, SnapError};

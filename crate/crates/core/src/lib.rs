//! Exact small-scale simulation of universal blind quantum computation and
//! of the state-preparation resources it can be built on.

pub mod analysis;
pub mod angle;
pub mod cq;
pub mod error;
pub mod linalg;
pub mod mbqc;
pub mod prep;
pub mod reduction;
pub mod states;
pub mod ubqc;

pub use angle::Angle;
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
pub use states::{DensityMatrix, KrausChannel, PureState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

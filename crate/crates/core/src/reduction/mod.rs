//! Reductions between preparation resources: four states to eight, two
//! states to four, and the overlap-squaring step.

pub mod four_state;
pub mod overlap;
pub mod symmetric;
pub mod two_state;
pub mod two_state_security;

pub use four_state::*;
pub use overlap::{overlap_halve, overlap_halve_iterated, OverlapHalving};
pub use symmetric::{SymBlock, SymmetricOperator};
pub use two_state::*;
pub use two_state_security::*;

//! Conformally invariant curve quantities and the curve equations built from them.

mod flows;
mod quantities;

pub use flows::{CurveFlow, Equation};
pub use quantities::*;

//! Conformal geodesics and the fourth-order conformal Mercator equation:
//! curvature, flows, closed-form solutions, tractor calculus, first-variation
//! checks and Hamiltonian reformulations.

pub mod checks;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod hamiltonian;
pub mod integrate;
pub mod io;
pub mod jet;
pub mod oracles;
pub mod series;
pub mod state;
pub mod tractor;
pub mod trajectory;
pub mod variational;

pub use error::{Error, Result};
pub use state::CurveState;

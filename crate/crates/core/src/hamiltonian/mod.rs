//! Hamiltonian reformulations: the canonical form of the flat fourth-order
//! flow, flat Kähler magnetic and Poisson dynamics, and first integrals built
//! from conformal Killing–Yano pairs.

mod cky;
mod kahler;
mod ostrogradsky;

pub use cky::*;
pub use kahler::*;
pub use ostrogradsky::*;

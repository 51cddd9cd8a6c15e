//! Ground-state splitting of long-range Ising chains, quantum rotor chains and
//! a projector toy model, by exact diagonalization, semiclassical formulas and
//! secular equations.

pub mod error;
pub mod model;
pub mod ed;
pub mod instanton;
pub mod numerics;
pub mod rotor;
pub mod scaling;
pub mod toy;

pub use error::{Error, Result};
pub use model::{Beta, CouplingKind, ModelParams};

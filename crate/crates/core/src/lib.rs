//! Exact finite-volume checks for the random-current lace expansion of the
//! ferromagnetic Ising model.
//!
//! Everything here is brute force on small graphs: spin sums, current sums,
//! pair sweeps and the nested expansion coefficients built on top of them.
//! The [`greens`] module is the exception; it works with fields on a torus.

pub mod bits;
pub mod budget;
pub mod connectivity;
pub mod currents;
pub mod diagrams;
pub mod error;
pub mod expansion;
pub mod greens;
pub mod lattice;
pub mod spin_oracle;
pub mod sum;
pub mod switching;

pub use bits::{BondSet, SiteSet};
pub use budget::Budget;
pub use error::{Error, Result};
pub use lattice::{Bond, DirectedBond, GraphSpec, Lattice};

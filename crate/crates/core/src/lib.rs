//! Random interlacements restricted to a finite set `G ⊂ Z^d` (`d >= 3`).
//!
//! The crate samples the restricted process exactly in law, on top of a
//! numerical lattice Green's function and the equilibrium measure of `G`,
//! and provides Monte Carlo estimators for the derivative of the probability
//! of an increasing event with respect to the intensity `u`.

pub mod bessel;
pub mod capacity;
pub mod error;
pub mod events;
pub mod green;
pub mod interlacement;
pub mod lattice;
pub mod pivotal;
pub mod russo;
pub mod stats;
pub mod walk;

pub use capacity::Equilibrium;
pub use error::{Error, Result};
pub use events::{EventSpec, IncreasingEvent};
pub use green::PotentialTable;
pub use interlacement::{Configuration, LevelPoint, LevelProcess};
pub use lattice::{LatticeSet, Site};
pub use stats::Estimate;
pub use walk::{GTrace, TraceSampler};

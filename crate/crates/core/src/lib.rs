//! Phase-space portraits of a one-dimensional wave packet.
//!
//! A Gaussian packet is propagated through a double-barrier structure with a
//! Crank–Nicolson solver. Snapshots of the wave function are turned into three
//! phase-space distributions:
//!
//! * [`wigner`]: the Wigner–Weyl transform, real but not positive;
//! * [`husimi`]: the coherent-state (Gaussian-smoothed) distribution, positive
//!   but with smeared marginals;
//! * [`bohmian`]: a histogram of guided trajectories, positive and with exact
//!   charge and current marginals up to sampling noise.
//!
//! The [`harness`] module ties the pipelines together, checks every field
//! against the probability axioms and writes CSV/JSON artifacts.
//!
//! Internal units are nm, fs, eV and the free-electron mass; see [`units`].

pub mod bohmian;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod husimi;
pub mod solver;
pub mod spectral;
pub mod units;
pub mod wave;
pub mod wigner;

pub use error::{Error, Result};
pub use field::{DistributionKind, PhaseSpaceField};
pub use grid::{MomentumGrid, SpatialGrid};
pub use units::Mass;
pub use wave::{polar_decompose, ExactMarginals, PolarDecomposition, WaveFunction};

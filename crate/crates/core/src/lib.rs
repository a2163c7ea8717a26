//! Optical transmittance of ultra-dilute gas clouds whose particles are
//! spatially spread wave packets.
//!
//! Lengths are measured in units of the detector half-width `r`.
//!
//! * [`opacity`]: the classical opacity `g` and its equivalent forms.
//! * [`distribution`]: single-particle densities and tunnel probabilities.
//! * [`engine`]: single-particle, lattice-product and limit transmittances.
//! * [`cloud`]: physical cloud descriptions turned into layered lattices.
//! * [`montecarlo`]: stochastic oracles for the analytic laws.

pub mod cloud;
pub mod distribution;
pub mod engine;
pub mod error;
pub mod montecarlo;
pub mod opacity;
pub mod quadrature;
pub mod special;

pub use distribution::{DensityTable, SpreadDistribution};
pub use engine::{
    DetectorGeometry, DetectorShape, ModelLabel, ParticleLattice, TransmittanceCurve,
};
pub use error::{Error, Result};
pub use opacity::{OpacityKind, OpacitySpec};

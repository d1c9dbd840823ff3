//! Link-level simulation of the grouped annulus-modulated (GAM) transceiver
//! for RIS-assisted symbiotic radio.
//!
//! The crate is organised bottom-up:
//!
//! - [`corrchan`] synthesizes spatially correlated RIS channels and reduces
//!   them to the equivalent full-row-rank, purely reflective model.
//! - [`echelon`] factors the equivalent channel as `B·C·Pᴴ` with the
//!   combinatorially pairing (CP) algorithm and three baselines.
//! - [`hexlat`] builds annular constellations from the hexagonal lattice and
//!   maps constellation points back to phase pairs.
//! - [`xcvr`] plans subchannels, modulates, adds noise and runs successive
//!   interference cancellation with Monte Carlo SER accounting.

pub mod corrchan;
pub mod echelon;
mod error;
pub mod hexlat;
pub mod linalg;
pub mod rng;
pub mod xcvr;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};

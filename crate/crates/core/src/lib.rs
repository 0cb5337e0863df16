//! Simulation and reconstruction toolkit for single-shot synthetic-wavelength
//! interferometric depth imaging.
//!
//! The crate is organized around the measurement pipeline:
//!
//! - [`field`]: complex-field containers, unitary 2D FFTs, synthetic-wavelength
//!   algebra, wrapped phase maps.
//! - [`sim`]: forward physics — rough-surface speckle fields, crossed-fringe
//!   interferogram rendering, frame sequences, hidden-point-source captures.
//! - [`demod`]: single-image Fourier demodulation — carrier location, sideband
//!   extraction, spectral separation checks.
//! - [`recon`]: synthetic-field formation, depth conversion, beat-note fields,
//!   and multi-frequency phase unwrapping.
//! - [`metrology`]: plane fits and depth-precision reports.
//! - [`nlos`]: angular-spectrum propagation and focus search for imaging
//!   through a thin scatterer.
//!
//! All operations are pure functions of their inputs; every random draw is
//! funneled through explicit seeds, so identical inputs produce bit-identical
//! outputs.

pub mod demod;
pub mod error;
pub mod field;
pub mod metrology;
pub mod nlos;
pub mod recon;
pub mod sim;

pub use error::{Error, Result};

//! Error type shared by all library modules.

use thiserror::Error;

/// Errors produced by the simulation and reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a container invariant (non-finite values, wrong length).
    #[error("invalid data: {0}")]
    DataValidity(String),

    /// Two operands do not share the same grid geometry.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// No spectral peak stood out above the noise floor in the search region.
    #[error("carrier not found: {0}")]
    CarrierNotFound(String),

    /// Spectral regions that must stay separated would overlap.
    #[error("spectral overlap: {0}")]
    SpectralOverlap(String),

    /// Both wavelengths are equal; the synthetic wavelength diverges.
    #[error("synthetic wavelength is infinite: both wavelengths equal {0} m")]
    InfiniteSyntheticWavelength(f64),

    /// Plane fit attempted on a rank-deficient set of points.
    #[error("degenerate plane fit: {0}")]
    DegenerateFit(String),

    /// No unwrapping ladder can be built from the given fields.
    #[error("unwrap cascade infeasible at stage {stage}: {reason}")]
    CascadeInfeasible { stage: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

//! Spherical data pipeline: lat/lon ⇄ HEALPix projection with overset
//! padding, FFT-accelerated spherical harmonic transforms, angular power
//! spectra, reconstruction metrics, and compression-rate bookkeeping.

pub mod codec;
pub mod error;
pub mod field;
pub mod grids;
pub mod legendre;
pub mod metrics;
pub mod projection;
pub mod rng;
pub mod sht;

pub use error::{Error, Result};
pub use field::{Dtype, FieldContainer, FieldMeta, GridTag, ScalarField};
pub use grids::{Grid, GridDescriptor, HealpixGrid, LatLonGrid, PaddedTileGeometry, Ring};
pub use legendre::LegendreTable;
pub use num_complex::Complex64;
pub use sht::{PowerSpectrum, SpectrumMode, SphericalCoeffs};

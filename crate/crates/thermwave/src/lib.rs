//! 1D thermal-wave interference modeling for multi-layer coating systems
//! under lock-in excitation.
//!
//! A periodically modulated light source heats the surface of a coated part.
//! The absorbed energy launches a strongly damped thermal wave that is
//! reflected and transmitted at every layer interface; the superposition of
//! all wave trains determines the complex surface-temperature amplitude. Its
//! phase angle, which an infrared camera can measure, carries the layer
//! thicknesses and the thermal material properties of the stack.
//!
//! The crate is organized around that measurement chain:
//!
//! - [`wavecore`]: diffusion length, complex wave numbers, interface
//!   reflection/transmission, the effective-reflection recursion, and the
//!   surface response with its phase and amplitude.
//! - [`oracle`]: brute-force wave-train summation used to cross-check the
//!   closed forms in `wavecore`.
//! - [`forward`]: phase spectra over a frequency grid, plus synthetic
//!   measurement generation with seeded noise.
//! - [`inverse`]: bounded nonlinear least squares (multi-start
//!   Levenberg-Marquardt in log-parameter space) recovering thicknesses or
//!   thermal properties from phase spectra.
//! - [`calibration`]: the two-step procedure that first estimates unknown
//!   thermal properties from training samples with known thicknesses, then
//!   validates thickness recovery on a confirmation set.
//! - [`io`]: stack configuration files, phase CSV files, and calibration
//!   batch manifests.

pub mod calibration;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod io;
pub mod oracle;
pub mod wavecore;

pub use error::{Error, ParseError};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

//! NV-ensemble dephasing toolkit.
//!
//! `spin_core` builds Hamiltonians and spectra, `meanfield` turns bath level
//! structure into decay rates, `pulsesim` runs Monte Carlo pulse sequences,
//! `fitkit` fits decays and zero-field ODMR spectra, and `budget` decomposes
//! measured rates and projects sensitivity.

pub mod budget;
pub mod constants;
pub mod error;
pub mod fitkit;
pub mod meanfield;
pub mod pulsesim;
pub mod spin_core;

pub use budget::{ConversionFactors, DephasingBudget, SampleRecord};
pub use constants::{PhysicalConstants, GAUSS, PPM_PER_NM3};
pub use error::{Error, Result};
pub use fitkit::{FitModel, FitResult, OdmrSpectrum};
pub use meanfield::{BathSpeciesSpec, RatePerDensity, SequenceGates};
pub use pulsesim::{DecayCurve, NoiseModel, PulseParams, SequenceKind, SequenceSpec};
pub use spin_core::{HermitianOperator, Orientation, SpinQuantum, StrainTensor};


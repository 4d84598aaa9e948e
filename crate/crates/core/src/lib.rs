//! Measurement-chain simulator for levitated ferromagnetic torsional
//! oscillator (FMTO) magnetometers.
//!
//! The crate follows a signal from magnetic torque to a calibrated field
//! sensitivity:
//!
//! 1. [`oscillator`] and [`material`] describe the physical oscillator.
//! 2. [`dynamics`] integrates the torsional Langevin equation and provides
//!    the analytic susceptibility and thermal-noise spectra.
//! 3. [`optics`] renders camera frames of the deflected laser spot and
//!    recovers the spot position with a sub-pixel centroid tracker.
//! 4. [`lockin`] and [`spectral`] turn tracks into tone amplitudes, PSDs and
//!    resonance fits.
//! 5. [`calibration`] builds the field-to-pixel transfer function and the
//!    sensitivity curves.
//! 6. [`coils`] converts coil currents to fields, and [`exotic`] turns a
//!    sensitivity into bounds on a velocity-dependent spin coupling.
//!
//! The closed-form physics is generic over [`Scalar`] (`f32` or `f64`).
//! Time-domain simulation, image processing and spectral estimation run in
//! `f64`. The `*64` aliases below name the concrete types used by that
//! pipeline.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod coils;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod exotic;
pub mod lockin;
pub mod material;
pub mod optics;
pub mod oscillator;
pub mod presets;
pub mod series;
pub mod spectral;

mod linalg;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use calibration::{SensitivityCurve, SensitivityProvenance, TransferFunction};
pub use coils::CoilPair;
pub use constants::PhysicalConstants;
pub use dynamics::{AngleSeries, DriveSignal, Integrator, SimulationConfig};
pub use exotic::{CouplingBound, ExoticSourceConfig};
pub use lockin::{LockInResult, SweepResult};
pub use material::MaterialProperties;
pub use optics::{FrameSequence, ReadoutGeometry, SpotTrack};
pub use oscillator::OscillatorParams;
pub use series::TimeSeries;
pub use spectral::{LorentzianFit, SpectrumEstimate, Window};

/// Double-precision oscillator parameters used by the simulation pipeline.
pub type Oscillator64 = OscillatorParams<f64>;
/// Double-precision material description.
pub type Material64 = MaterialProperties<f64>;
/// Double-precision physical constants.
pub type Constants64 = PhysicalConstants<f64>;
/// Double-precision coil pair.
pub type CoilPair64 = CoilPair<f64>;
/// Double-precision exotic-source configuration.
pub type ExoticSource64 = ExoticSourceConfig<f64>;
/// Double-precision transfer function.
pub type TransferFunction64 = TransferFunction<f64>;

/// Single-precision oscillator parameters.
pub type Oscillator32 = OscillatorParams<f32>;
/// Single-precision material description.
pub type Material32 = MaterialProperties<f32>;
/// Single-precision coil pair.
pub type CoilPair32 = CoilPair<f32>;

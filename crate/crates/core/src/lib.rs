//! Sum-frequency generation with broadband energy-time entangled photons.
//!
//! Three engines compute SFG counts for the same optical system:
//!
//! - [`analytic`]: closed-form correlated and uncorrelated rate laws
//! - [`fock`]: exact expectation values on a truncated multimode Fock space
//! - [`stream`]: Monte Carlo time-tagged photon streams with coincidence
//!   counting and a detector model
//!
//! [`experiment`] runs power sweeps with any engine and cross-checks them.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod parallel;
pub mod rng;
pub mod stream;

pub use analytic::{OperatingPoint, RatePrediction, SpectralConfig};
pub use error::{Result, SimError};
pub use experiment::{Engine, SweepCurve, SweepMode, SweepPoint};

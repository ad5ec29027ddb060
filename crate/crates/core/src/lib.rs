//! Simulation of 3D hybrid beamforming small cells.
//!
//! The crate is organised bottom-up:
//!
//! * [`array_rf`]: planar array geometry, element patterns and the quantized
//!   phase-shifter / attenuator model of the radio unit.
//! * [`channel`]: clustered multipath channels, their exact spatial
//!   correlation, trajectories and AWGN.
//! * [`phy`]: LTE-style OFDM numerology, PSS, resource grid, filtering,
//!   synchronization, channel estimation, equalization and SNR measurement.
//! * [`beamtrack`]: CSI-free perturbation tracking of the analog beam weight
//!   and the dominant-eigenvector oracle it converges to.
//! * [`linksim`]: per-subframe link orchestration with the radio-unit latency
//!   and update cadence.
//! * [`syssim`]: multi-cell downlink rate evaluation.

pub mod array_rf;
pub mod beamtrack;
pub mod channel;
mod error;
pub mod linalg;
pub mod linksim;
pub mod phy;
pub mod rng;
pub mod syssim;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

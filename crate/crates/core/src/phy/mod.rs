//! LTE-style OFDM physical layer: 20 MHz numerology with extended cyclic
//! prefix, Zadoff-Chu PSS, cell-specific reference signals, Gray QAM,
//! PSS extraction filter, timing acquisition, channel estimation,
//! zero-forcing equalization and SNR measurement.

mod equalize;
mod estimate;
mod gold;
mod grid;
pub mod iq;
mod lpf;
mod numerology;
mod ofdm;
mod qam;
mod sync;
mod zc;

pub use equalize::{bit_errors, equalize_zf, Equalized, ESTIMATE_FLOOR, EVM_FLOOR_DB};
pub use estimate::{estimate_channel, measure_snr, ChannelEstimate, SnrMeasurement};
pub use gold::gold_sequence;
pub use grid::{
    build_grid, pss_only_grid, pss_subcarriers, ReRole, ResourceGrid, SubframeLayout, RS_SPACING,
    RS_SYMBOLS_IN_SLOT,
};
pub use lpf::{design_lpf, magnitude_db, measure_mask, FilterSpec, LpfDesign, RESPONSE_GRID};
pub use numerology::Numerology;
pub use ofdm::OfdmModem;
pub use qam::Modulation;
pub use sync::{synchronize, PssReplica, SyncResult, Synchronizer, DEFAULT_PEAK_RATIO};
pub use zc::{circular_autocorrelation, zadoff_chu, PSS_LENGTH, PSS_ROOT};

use crate::{C64, Result};

/// Builds the grid of one subframe and its time-domain samples.
pub fn build_subframe(
    modem: &OfdmModem,
    layout: &SubframeLayout,
    modulation: Modulation,
    bits: &[u8],
) -> Result<(ResourceGrid, Vec<C64>)> {
    let grid = build_grid(layout, modulation, bits)?;
    let samples = modem.modulate(&grid);
    Ok((grid, samples))
}

//! Reference-signal channel estimation and SNR measurement.

use super::grid::{ResourceGrid, SubframeLayout};
use crate::C64;

/// Per-RE channel estimates of one subframe plus the raw LS values at the
/// reference signals they were interpolated from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    subcarriers: usize,
    symbols: usize,
    values: Vec<C64>,
    /// Raw least-squares estimates, one vector per RS-bearing symbol.
    pub rs_raw: Vec<Vec<C64>>,
    pub rs_symbols: Vec<usize>,
    pub rs_rows: Vec<usize>,
}

impl ChannelEstimate {
    pub fn get(&self, symbol: usize, row: usize) -> C64 {
        self.values[symbol * self.subcarriers + row]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Mean `|ĥ|²` over all raw RS estimates; the tracker's power observable.
    pub fn rs_power(&self) -> f64 {
        let n: usize = self.rs_raw.iter().map(Vec::len).sum();
        self.rs_raw
            .iter()
            .flatten()
            .map(|h| h.norm_sqr())
            .sum::<f64>()
            / n as f64
    }
}

/// LS at the reference signals, linear interpolation across subcarriers
/// (on physical subcarrier positions, so the DC gap is respected), edge
/// hold, and hold in time until the next RS-bearing symbol.
pub fn estimate_channel(grid: &ResourceGrid, layout: &SubframeLayout) -> ChannelEstimate {
    let num = &layout.numerology;
    let n_sc = layout.subcarriers();
    let rs_rows = layout.rs_rows().to_vec();
    let rs_symbols = layout.rs_symbols().to_vec();
    let positions: Vec<f64> = rs_rows
        .iter()
        .map(|&r| f64::from(num.subcarrier_index(r)))
        .collect();

    let rs_raw: Vec<Vec<C64>> = rs_symbols
        .iter()
        .map(|&sym| {
            rs_rows
                .iter()
                .zip(layout.rs_values(sym))
                .map(|(&row, x)| grid.get(sym, row) / x)
                .collect()
        })
        .collect();

    let interpolated: Vec<Vec<C64>> = rs_raw
        .iter()
        .map(|raw| {
            let mut out = vec![C64::new(0.0, 0.0); n_sc];
            let mut seg = 0;
            for (row, slot) in out.iter_mut().enumerate() {
                let k = f64::from(num.subcarrier_index(row));
                while seg + 1 < positions.len() && positions[seg + 1] <= k {
                    seg += 1;
                }
                *slot = if k <= positions[0] {
                    raw[0]
                } else if seg + 1 >= positions.len() {
                    raw[positions.len() - 1]
                } else {
                    let t = (k - positions[seg]) / (positions[seg + 1] - positions[seg]);
                    raw[seg] * (1.0 - t) + raw[seg + 1] * t
                };
            }
            out
        })
        .collect();

    let symbols = layout.symbols();
    let mut values = Vec::with_capacity(n_sc * symbols);
    for sym in 0..symbols {
        let src = rs_symbols.iter().rposition(|&s| s <= sym).unwrap_or(0);
        values.extend_from_slice(&interpolated[src]);
    }
    ChannelEstimate {
        subcarriers: n_sc,
        symbols,
        values,
        rs_raw,
        rs_symbols,
        rs_rows,
    }
}

/// RS-residual SNR measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrMeasurement {
    pub snr_db: f64,
    pub signal_power: f64,
    pub noise_power: f64,
    /// Set when the residual vanished and `snr_db` is the `+∞` sentinel.
    pub noise_free: bool,
}

impl SnrMeasurement {
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// Floor applied to the signal estimate, in dB relative to the noise.
const SNR_FLOOR_DB: f64 = -100.0;

/// Measures SNR from the raw RS estimates of one subframe.
///
/// The channel is taken as constant across the RS-bearing symbols of the
/// subframe: the smoothed estimate is the mean over those symbols and the
/// residuals around it measure the noise. With `S` RS symbols the residual
/// power is `σ²(S−1)/S` and the smoothed power is biased by `σ²/S`; both are
/// corrected.
pub fn measure_snr(estimate: &ChannelEstimate) -> SnrMeasurement {
    let s = estimate.rs_raw.len();
    assert!(s >= 2, "SNR measurement needs at least two RS-bearing symbols");
    let per_rs = estimate.rs_raw[0].len();
    let mut residual = 0.0;
    let mut smoothed_power = 0.0;
    for i in 0..per_rs {
        let mean = estimate.rs_raw.iter().map(|v| v[i]).sum::<C64>() / s as f64;
        smoothed_power += mean.norm_sqr();
        residual += estimate
            .rs_raw
            .iter()
            .map(|v| (v[i] - mean).norm_sqr())
            .sum::<f64>();
    }
    let noise = residual / (per_rs * (s - 1)) as f64;
    let signal = smoothed_power / per_rs as f64 - noise / s as f64;
    if noise <= 0.0 {
        return SnrMeasurement {
            snr_db: f64::INFINITY,
            signal_power: signal,
            noise_power: 0.0,
            noise_free: true,
        };
    }
    let snr_db = if signal > 0.0 {
        (10.0 * (signal / noise).log10()).max(SNR_FLOOR_DB)
    } else {
        SNR_FLOOR_DB
    };
    SnrMeasurement {
        snr_db,
        signal_power: signal,
        noise_power: noise,
        noise_free: false,
    }
}

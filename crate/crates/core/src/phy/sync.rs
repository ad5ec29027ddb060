//! PSS timing acquisition.
//!
//! The received samples and the time-domain PSS replica are both passed
//! through the low-pass filter and cross-correlated. Filtering both sides with
//! the same taps leaves the correlation peak at the true lag, so no explicit
//! group-delay term is needed. All filtering and correlation is done with one
//! zero-padded FFT per call: `c = IFFT(X · conj(R) · |H|²)`.
//!
//! The PSS spans under 1 MHz, which limits single-sample accuracy at low SNR,
//! so the coarse lag is refined on the reference signals of the PSS subframe.
//! Each candidate shift `e` within [`FINE_SEARCH`] samples is scored by
//! `Σ_l |Σ_k ĥ_l(k)·exp(j2πke/N)|²` over the RS-bearing symbols `l`, where
//! `ĥ_l` are LS estimates taken at the coarse timing. The same score picks
//! between the RS sequences of subframes 0 and 5, which resolves the
//! half-frame ambiguity of the PSS.

use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::Arc;

use super::grid::{pss_only_grid, SubframeLayout};
use super::numerology::Numerology;
use super::ofdm::OfdmModem;
use crate::{C64, Error, Result};

/// Time-domain PSS symbol (cyclic prefix included) and where it sits inside
/// a half-frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PssReplica {
    pub numerology: Numerology,
    pub samples: Vec<C64>,
    pub position_in_half_frame: usize,
    pub half_frame_samples: usize,
}

impl PssReplica {
    pub fn new(numerology: Numerology) -> Result<Self> {
        let grid = pss_only_grid(numerology)?;
        let time = OfdmModem::new(numerology).modulate(&grid);
        let sym = numerology.symbols_per_slot - 1;
        let len = numerology.samples_per_symbol();
        Ok(Self {
            numerology,
            samples: time[sym * len..(sym + 1) * len].to_vec(),
            position_in_half_frame: sym * len,
            half_frame_samples: numerology.samples_per_half_frame(),
        })
    }
}

/// Successful acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// Sample index of the half-frame start implied by the detected PSS.
    pub offset: i64,
    /// Lag of the correlation peak, i.e. where the PSS symbol starts.
    pub peak_lag: usize,
    /// Peak magnitude over the largest magnitude away from the peak.
    pub peak_ratio: f64,
    /// Refinement applied to the coarse PSS lag, in samples.
    pub fine_shift: i64,
    /// Subframe of the frame (0 or 5) the detected PSS belongs to, when the
    /// whole subframe was available for refinement.
    pub subframe_in_frame: Option<usize>,
}

/// Half-width of the fine timing search, in samples.
pub const FINE_SEARCH: i64 = 8;

/// Lags within this distance of the peak (or of the peak shifted by whole
/// half-frames) are not candidates for the secondary peak.
const PEAK_EXCLUSION: usize = 64;

/// Default minimum peak-to-secondary ratio.
pub const DEFAULT_PEAK_RATIO: f64 = 1.5;

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `conj(R)·|H|² / F`, the combined replica and filter response.
    kernel: Vec<C64>,
}

/// Receiver-side PSS detector; caches FFT plans per transform size, so one
/// instance belongs to one receiver pipeline.
pub struct Synchronizer {
    replica: PssReplica,
    taps: Vec<f64>,
    min_peak_ratio: f64,
    planner: FftPlanner<f64>,
    plans: HashMap<usize, Plan>,
    modem: OfdmModem,
    layouts: [SubframeLayout; 2],
}

impl std::fmt::Debug for Synchronizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synchronizer")
            .field("taps", &self.taps.len())
            .field("min_peak_ratio", &self.min_peak_ratio)
            .finish()
    }
}

impl Synchronizer {
    pub fn new(replica: PssReplica, taps: Vec<f64>, min_peak_ratio: f64) -> Self {
        let num = replica.numerology;
        Self {
            modem: OfdmModem::new(num),
            layouts: [
                SubframeLayout::new(num, 0),
                SubframeLayout::new(num, num.subframes_per_half_frame()),
            ],
            replica,
            taps,
            min_peak_ratio,
            planner: FftPlanner::new(),
            plans: HashMap::new(),
        }
    }

    pub fn replica(&self) -> &PssReplica {
        &self.replica
    }

    fn plan(&mut self, size: usize) -> &Plan {
        if !self.plans.contains_key(&size) {
            let forward = self.planner.plan_fft_forward(size);
            let inverse = self.planner.plan_fft_inverse(size);
            let mut r = vec![C64::new(0.0, 0.0); size];
            r[..self.replica.samples.len()].copy_from_slice(&self.replica.samples);
            forward.process(&mut r);
            let mut h = vec![C64::new(0.0, 0.0); size];
            for (x, t) in h.iter_mut().zip(&self.taps) {
                *x = C64::new(*t, 0.0);
            }
            forward.process(&mut h);
            let kernel = r
                .iter()
                .zip(&h)
                .map(|(r, h)| r.conj() * h.norm_sqr() / size as f64)
                .collect();
            self.plans.insert(
                size,
                Plan {
                    forward,
                    inverse,
                    kernel,
                },
            );
        }
        &self.plans[&size]
    }

    /// Magnitude of the filtered cross-correlation for lags
    /// `0..=samples.len() - replica.len()`.
    pub fn correlation(&mut self, samples: &[C64]) -> Result<Vec<f64>> {
        let r_len = self.replica.samples.len();
        if samples.len() < r_len {
            return Err(Error::Parameter(format!(
                "{} samples cannot hold the {r_len}-sample PSS replica",
                samples.len()
            )));
        }
        let size = (samples.len() + r_len + 2 * self.taps.len()).next_power_of_two();
        let plan = self.plan(size);
        let mut buf = vec![C64::new(0.0, 0.0); size];
        buf[..samples.len()].copy_from_slice(samples);
        plan.forward.process(&mut buf);
        for (x, k) in buf.iter_mut().zip(&plan.kernel) {
            *x *= k;
        }
        plan.inverse.process(&mut buf);
        Ok(buf[..=samples.len() - r_len].iter().map(|c| c.norm()).collect())
    }

    /// Locates the PSS; ties resolve to the earliest lag.
    pub fn synchronize(&mut self, samples: &[C64]) -> Result<SyncResult> {
        let corr = self.correlation(samples)?;
        let mut peak_lag = 0;
        for (i, v) in corr.iter().enumerate() {
            if *v > corr[peak_lag] {
                peak_lag = i;
            }
        }
        let period = self.replica.half_frame_samples;
        let excluded = |lag: usize| {
            let d = lag.abs_diff(peak_lag) % period;
            d.min(period - d) <= PEAK_EXCLUSION
        };
        let secondary = corr
            .iter()
            .enumerate()
            .filter(|(i, _)| !excluded(*i))
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        let peak_ratio = if secondary > 0.0 {
            corr[peak_lag] / secondary
        } else {
            f64::INFINITY
        };
        if corr[peak_lag] == 0.0 || peak_ratio < self.min_peak_ratio {
            return Err(Error::SyncFailure { peak_ratio });
        }
        let coarse = peak_lag as i64 - self.replica.position_in_half_frame as i64;
        let (fine_shift, subframe_in_frame) = match self.refine(samples, coarse) {
            Some((e, sf)) => (e, Some(sf)),
            None => (0, None),
        };
        Ok(SyncResult {
            offset: coarse + fine_shift,
            peak_lag,
            peak_ratio,
            fine_shift,
            subframe_in_frame,
        })
    }

    /// Fine timing on the reference signals of the subframe starting at
    /// `coarse`. Up to [`FINE_SEARCH`] samples missing at either end of
    /// `samples` are zero-filled; `None` when more is missing.
    fn refine(&self, samples: &[C64], coarse: i64) -> Option<(i64, usize)> {
        let num = &self.replica.numerology;
        let len = num.samples_per_subframe();
        let have = samples.len() as i64;
        if coarse < -FINE_SEARCH || coarse + len as i64 > have + FINE_SEARCH {
            return None;
        }
        let window: Vec<C64> = (coarse..coarse + len as i64)
            .map(|i| {
                if (0..have).contains(&i) {
                    samples[i as usize]
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let grid = self.modem.demodulate(&window, num.symbols_per_subframe());
        let n = num.fft_size as f64;
        let mut best = (f64::NEG_INFINITY, 0i64, 0usize);
        for layout in &self.layouts {
            let ks: Vec<f64> = layout
                .rs_rows()
                .iter()
                .map(|&r| f64::from(num.subcarrier_index(r)))
                .collect();
            let raw: Vec<Vec<C64>> = layout
                .rs_symbols()
                .iter()
                .map(|&sym| {
                    layout
                        .rs_rows()
                        .iter()
                        .zip(layout.rs_values(sym))
                        .map(|(&row, x)| grid.get(sym, row) * x.conj())
                        .collect()
                })
                .collect();
            for e in -FINE_SEARCH..=FINE_SEARCH {
                let rot: Vec<C64> = ks
                    .iter()
                    .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k * e as f64 / n))
                    .collect();
                let score: f64 = raw
                    .iter()
                    .map(|h| h.iter().zip(&rot).map(|(h, r)| h * r).sum::<C64>().norm_sqr())
                    .sum();
                if score > best.0 {
                    best = (score, e, layout.subframe_in_frame);
                }
            }
        }
        Some((best.1, best.2))
    }
}

/// One-shot PSS acquisition with the default peak-ratio threshold.
pub fn synchronize(samples: &[C64], replica: &PssReplica, taps: &[f64]) -> Result<SyncResult> {
    Synchronizer::new(replica.clone(), taps.to_vec(), DEFAULT_PEAK_RATIO).synchronize(samples)
}

//! Kaiser-window FIR low-pass design.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{C64, Error, Result};

/// Magnitude mask of the PSS extraction filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    pub sample_rate_hz: f64,
    pub cutoff_hz: f64,
    /// Start of the stopband; the transition band is `[cutoff, stopband_edge]`.
    pub stopband_edge_hz: f64,
    pub stopband_attenuation_db: f64,
    /// Peak-to-peak passband ripple.
    pub passband_ripple_db: f64,
    pub max_taps: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 30.72e6,
            cutoff_hz: 1.4e6,
            stopband_edge_hz: 2.0e6,
            stopband_attenuation_db: 50.0,
            passband_ripple_db: 0.1,
            max_taps: 257,
        }
    }
}

/// Realized filter together with its measured margins.
#[derive(Debug, Clone, PartialEq)]
pub struct LpfDesign {
    pub taps: Vec<f64>,
    pub ripple_db: f64,
    pub attenuation_db: f64,
}

/// Points of the evaluation grid over `[0, fs)`.
pub const RESPONSE_GRID: usize = 4096;

/// `|H(f)|` in dB.
pub fn magnitude_db(taps: &[f64], f_hz: f64, sample_rate_hz: f64) -> f64 {
    let w = 2.0 * PI * f_hz / sample_rate_hz;
    let h: C64 = taps
        .iter()
        .enumerate()
        .map(|(n, t)| C64::from_polar(*t, -w * n as f64))
        .sum();
    20.0 * h.norm().max(1e-300).log10()
}

/// Passband ripple (peak-to-peak) and minimum stopband attenuation measured
/// on the [`RESPONSE_GRID`]-point grid.
pub fn measure_mask(taps: &[f64], spec: &FilterSpec) -> (f64, f64) {
    let mut pass_max = f64::MIN;
    let mut pass_min = f64::MAX;
    let mut stop_max = f64::MIN;
    for i in 0..=RESPONSE_GRID / 2 {
        let f = i as f64 * spec.sample_rate_hz / RESPONSE_GRID as f64;
        let db = magnitude_db(taps, f, spec.sample_rate_hz);
        if f <= spec.cutoff_hz {
            pass_max = pass_max.max(db);
            pass_min = pass_min.min(db);
        } else if f >= spec.stopband_edge_hz {
            stop_max = stop_max.max(db);
        }
    }
    (pass_max - pass_min, -stop_max)
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Windowed-sinc low-pass with `num_taps` (odd) taps, unit DC gain.
fn kaiser_lowpass(num_taps: usize, cutoff_hz: f64, fs: f64, beta: f64) -> Vec<f64> {
    let m = (num_taps - 1) as f64 / 2.0;
    let fc = cutoff_hz / fs;
    let i0b = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..num_taps)
        .map(|n| {
            let t = n as f64 - m;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let r = t / m;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}

/// Designs a linear-phase low-pass meeting `spec` with as few taps as the
/// Kaiser method allows.
pub fn design_lpf(spec: &FilterSpec) -> Result<LpfDesign> {
    if !(0.0 < spec.cutoff_hz
        && spec.cutoff_hz < spec.stopband_edge_hz
        && spec.stopband_edge_hz < spec.sample_rate_hz / 2.0)
    {
        return Err(Error::Parameter(format!(
            "band edges {} / {} Hz not ordered below Nyquist",
            spec.cutoff_hz, spec.stopband_edge_hz
        )));
    }
    let ripple_lin = 10f64.powf(spec.passband_ripple_db / 20.0);
    let delta_pass = (ripple_lin - 1.0) / (ripple_lin + 1.0);
    let delta_stop = 10f64.powf(-spec.stopband_attenuation_db / 20.0);
    let target = -20.0 * delta_pass.min(delta_stop).log10();
    let transition = 2.0 * PI * (spec.stopband_edge_hz - spec.cutoff_hz) / spec.sample_rate_hz;
    let mid = 0.5 * (spec.cutoff_hz + spec.stopband_edge_hz);

    let mut best: Option<LpfDesign> = None;
    // Kaiser's order formula is approximate; walk up in design attenuation and
    // tap count until the measured mask holds.
    if spec.max_taps < 3 {
        return Err(Error::Parameter(format!("tap budget {} below 3", spec.max_taps)));
    }
    for extra_db in [0.0, 2.0, 4.0, 6.0] {
        let atten = target + extra_db;
        let estimate = ((atten - 7.95) / (2.285 * transition)).ceil() as usize + 1;
        let cap = if spec.max_taps % 2 == 1 { spec.max_taps } else { spec.max_taps.saturating_sub(1) };
        let mut taps = (estimate | 1).min(cap).max(3);
        while taps <= spec.max_taps {
            let h = kaiser_lowpass(taps, mid, spec.sample_rate_hz, kaiser_beta(atten));
            let (ripple, stop) = measure_mask(&h, spec);
            let design = LpfDesign {
                taps: h,
                ripple_db: ripple,
                attenuation_db: stop,
            };
            if ripple <= spec.passband_ripple_db && stop >= spec.stopband_attenuation_db {
                return Ok(design);
            }
            if best.as_ref().is_none_or(|b| stop > b.attenuation_db) {
                best = Some(design);
            }
            taps += 2;
        }
    }
    let b = best.expect("at least one candidate evaluated");
    Err(Error::Design {
        taps: b.taps.len(),
        ripple_db: b.ripple_db,
        attenuation_db: b.attenuation_db,
    })
}

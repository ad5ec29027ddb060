use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::grid::ResourceGrid;
use super::numerology::Numerology;
use crate::C64;

/// CP-OFDM modulator/demodulator with unitary FFT scaling (`1/√N` both ways).
#[derive(Clone)]
pub struct OfdmModem {
    numerology: Numerology,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    bins: Vec<usize>,
    scale: f64,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem")
            .field("numerology", &self.numerology)
            .finish()
    }
}

impl OfdmModem {
    pub fn new(numerology: Numerology) -> Self {
        let mut planner = FftPlanner::new();
        let n = numerology.fft_size;
        Self {
            numerology,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            bins: (0..numerology.active_subcarriers)
                .map(|r| numerology.fft_bin(r))
                .collect(),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn numerology(&self) -> &Numerology {
        &self.numerology
    }

    /// One CP-prefixed time-domain symbol per grid column, concatenated.
    pub fn modulate(&self, grid: &ResourceGrid) -> Vec<C64> {
        let n = self.numerology.fft_size;
        let cp = self.numerology.cp_samples;
        let mut out = Vec::with_capacity(grid.symbols() * (n + cp));
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for sym in 0..grid.symbols() {
            buf.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for (v, &b) in grid.symbol(sym).iter().zip(&self.bins) {
                buf[b] = *v;
            }
            self.inverse.process(&mut buf);
            buf.iter_mut().for_each(|x| *x *= self.scale);
            out.extend_from_slice(&buf[n - cp..]);
            out.extend_from_slice(&buf);
        }
        out
    }

    /// Demodulates `symbols` symbols starting at `samples[0]` (CP start of the
    /// first symbol).
    pub fn demodulate(&self, samples: &[C64], symbols: usize) -> ResourceGrid {
        let n = self.numerology.fft_size;
        let cp = self.numerology.cp_samples;
        let n_sc = self.numerology.active_subcarriers;
        let mut values = Vec::with_capacity(n_sc * symbols);
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for sym in 0..symbols {
            let start = sym * (n + cp) + cp;
            buf.copy_from_slice(&samples[start..start + n]);
            self.forward.process(&mut buf);
            values.extend(self.bins.iter().map(|&b| buf[b] * self.scale));
        }
        ResourceGrid::from_values(n_sc, symbols, values)
    }
}

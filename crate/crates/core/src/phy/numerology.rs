use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// OFDM numerology of a 20 MHz LTE carrier with extended cyclic prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerology {
    pub sample_rate_hz: f64,
    pub fft_size: usize,
    pub subcarrier_spacing_hz: f64,
    pub cp_samples: usize,
    pub symbols_per_slot: usize,
    pub slots_per_frame: usize,
    pub active_subcarriers: usize,
    pub channel_bandwidth_hz: f64,
}

impl Default for Numerology {
    fn default() -> Self {
        Self {
            sample_rate_hz: 30.72e6,
            fft_size: 2048,
            subcarrier_spacing_hz: 15e3,
            cp_samples: 512,
            symbols_per_slot: 6,
            slots_per_frame: 20,
            active_subcarriers: 1200,
            channel_bandwidth_hz: 20e6,
        }
    }
}

impl Numerology {
    pub const SLOTS_PER_SUBFRAME: usize = 2;
    pub const SUBFRAMES_PER_HALF_FRAME: usize = 5;

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.fft_size == 0 || !self.fft_size.is_power_of_two() {
            return err(format!("fft size {} is not a power of two", self.fft_size));
        }
        if (self.sample_rate_hz / self.fft_size as f64 - self.subcarrier_spacing_hz).abs() > 1e-6 {
            return err("sample rate / fft size must equal the subcarrier spacing".into());
        }
        if self.active_subcarriers == 0
            || self.active_subcarriers % 2 != 0
            || self.active_subcarriers >= self.fft_size
        {
            return err(format!(
                "active subcarrier count {} must be even and below the fft size",
                self.active_subcarriers
            ));
        }
        if self.active_subcarriers as f64 * self.subcarrier_spacing_hz > self.channel_bandwidth_hz {
            return err("active subcarriers exceed the channel bandwidth".into());
        }
        if self.symbols_per_slot < 4 {
            return err("need at least 4 symbols per slot for the reference-signal pattern".into());
        }
        if self.cp_samples == 0 || self.cp_samples >= self.fft_size {
            return err(format!("cyclic prefix of {} samples", self.cp_samples));
        }
        if self.slots_per_frame % (2 * Self::SLOTS_PER_SUBFRAME) != 0 {
            return err("slots per frame must split into two half-frames of whole subframes".into());
        }
        Ok(())
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_samples
    }

    pub fn samples_per_slot(&self) -> usize {
        self.samples_per_symbol() * self.symbols_per_slot
    }

    pub fn symbols_per_subframe(&self) -> usize {
        self.symbols_per_slot * Self::SLOTS_PER_SUBFRAME
    }

    pub fn samples_per_subframe(&self) -> usize {
        self.samples_per_slot() * Self::SLOTS_PER_SUBFRAME
    }

    pub fn subframes_per_frame(&self) -> usize {
        self.slots_per_frame / Self::SLOTS_PER_SUBFRAME
    }

    pub fn subframes_per_half_frame(&self) -> usize {
        self.subframes_per_frame() / 2
    }

    pub fn samples_per_half_frame(&self) -> usize {
        self.samples_per_subframe() * self.subframes_per_half_frame()
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.samples_per_slot() as f64 / self.sample_rate_hz
    }

    pub fn subframe_duration_s(&self) -> f64 {
        self.samples_per_subframe() as f64 / self.sample_rate_hz
    }

    pub fn cp_duration_s(&self) -> f64 {
        self.cp_samples as f64 / self.sample_rate_hz
    }

    /// Signed subcarrier index (DC excluded) of grid row `row`.
    pub fn subcarrier_index(&self, row: usize) -> i32 {
        let half = (self.active_subcarriers / 2) as i32;
        let r = row as i32;
        if r < half {
            r - half
        } else {
            r - half + 1
        }
    }

    /// Grid row of signed subcarrier `k`; `None` for DC and out-of-band.
    pub fn row_of(&self, k: i32) -> Option<usize> {
        let half = (self.active_subcarriers / 2) as i32;
        match k {
            0 => None,
            k if k < -half || k > half => None,
            k if k < 0 => Some((k + half) as usize),
            k => Some((k + half - 1) as usize),
        }
    }

    pub fn fft_bin(&self, row: usize) -> usize {
        self.subcarrier_index(row).rem_euclid(self.fft_size as i32) as usize
    }

    pub fn active_subcarrier_indices(&self) -> Vec<i32> {
        (0..self.active_subcarriers)
            .map(|r| self.subcarrier_index(r))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lte_extended_cp_invariants() {
        let n = Numerology::default();
        n.validate().unwrap();
        assert_eq!(n.samples_per_symbol(), 2560);
        assert_eq!(n.samples_per_slot(), 15360);
        assert!((n.slot_duration_s() - 0.5e-3).abs() < 1e-12);
        assert_eq!(n.samples_per_subframe(), 30720);
        assert_eq!(n.samples_per_half_frame(), 153_600);
        assert!(n.active_subcarriers as f64 * n.subcarrier_spacing_hz <= 20e6);
    }

    #[test]
    fn subcarrier_mapping_skips_dc() {
        let n = Numerology::default();
        assert_eq!(n.subcarrier_index(0), -600);
        assert_eq!(n.subcarrier_index(599), -1);
        assert_eq!(n.subcarrier_index(600), 1);
        assert_eq!(n.subcarrier_index(1199), 600);
        for r in 0..1200 {
            assert_eq!(n.row_of(n.subcarrier_index(r)), Some(r));
        }
        assert_eq!(n.row_of(0), None);
        assert_eq!(n.fft_bin(599), 2047);
        assert_eq!(n.fft_bin(600), 1);
    }

    #[test]
    fn rejects_inconsistent_overrides() {
        let bad = Numerology {
            fft_size: 1000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = Numerology {
            active_subcarriers: 1400,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

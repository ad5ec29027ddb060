use serde::{Deserialize, Serialize};

use crate::C64;

/// Square QAM constellations with Gray mapping and unit average power.
///
/// The first half of each symbol's bits selects the in-phase level and the
/// second half the quadrature level; each axis is a Gray-coded PAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    fn levels_per_axis(self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }

    fn scale(self) -> f64 {
        let m = (1usize << self.bits_per_symbol()) as f64;
        (2.0 * (m - 1.0) / 3.0).sqrt()
    }

    fn axis_level(self, bits: &[u8]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, b| (acc << 1) | usize::from(*b));
        let mut binary = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            binary ^= shift;
            shift >>= 1;
        }
        (2 * binary) as f64 - (self.levels_per_axis() - 1) as f64
    }

    fn axis_bits(self, value: f64, out: &mut Vec<u8>) {
        let l = self.levels_per_axis();
        let idx = ((value + (l - 1) as f64) / 2.0).round().clamp(0.0, (l - 1) as f64) as usize;
        let gray = idx ^ (idx >> 1);
        let nb = self.bits_per_symbol() / 2;
        for i in (0..nb).rev() {
            out.push(((gray >> i) & 1) as u8);
        }
    }

    /// Maps `bits_per_symbol` bits to one constellation point.
    pub fn map(self, bits: &[u8]) -> C64 {
        let h = self.bits_per_symbol() / 2;
        C64::new(self.axis_level(&bits[..h]), self.axis_level(&bits[h..2 * h])) / self.scale()
    }

    /// Appends the hard-decision bits of `symbol` to `out`.
    pub fn demap_hard(self, symbol: C64, out: &mut Vec<u8>) {
        let s = symbol * self.scale();
        self.axis_bits(s.re, out);
        self.axis_bits(s.im, out);
    }

    /// Nearest constellation point.
    pub fn nearest(self, symbol: C64) -> C64 {
        let scale = self.scale();
        let top = (self.levels_per_axis() - 1) as f64;
        let slice = |v: f64| (((v * scale + top) / 2.0).round().clamp(0.0, top) * 2.0 - top) / scale;
        C64::new(slice(symbol.re), slice(symbol.im))
    }

    pub fn constellation(self) -> Vec<C64> {
        let b = self.bits_per_symbol();
        (0..1usize << b)
            .map(|v| {
                let bits: Vec<u8> = (0..b).rev().map(|i| ((v >> i) & 1) as u8).collect();
                self.map(&bits)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_average_power_and_roundtrip() {
        for m in [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64] {
            let pts = m.constellation();
            let p = pts.iter().map(|x| x.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((p - 1.0).abs() < 1e-12);
            for (v, x) in pts.iter().enumerate() {
                assert!((m.nearest(*x * 1.01) - x).norm() < 1e-12);
                let mut bits = Vec::new();
                m.demap_hard(*x, &mut bits);
                let back = bits.iter().fold(0usize, |a, b| (a << 1) | usize::from(*b));
                assert_eq!(back, v);
            }
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for m in [Modulation::Qam16, Modulation::Qam64] {
            let pts = m.constellation();
            let dmin = 2.0 / m.scale();
            for (i, a) in pts.iter().enumerate() {
                for (j, b) in pts.iter().enumerate() {
                    if ((a - b).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1);
                    }
                }
            }
        }
    }
}

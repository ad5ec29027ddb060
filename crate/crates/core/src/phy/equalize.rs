use super::estimate::ChannelEstimate;
use super::grid::{ReRole, ResourceGrid, SubframeLayout};
use super::qam::Modulation;
use crate::C64;

/// Channel estimates with a magnitude below this are treated as erasures.
pub const ESTIMATE_FLOOR: f64 = 1e-12;

/// EVM reported when the error vanishes.
pub const EVM_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    /// Equalized data symbols in grid order; erased REs are skipped.
    pub symbols: Vec<C64>,
    /// Hard-decision bits; erased REs contribute zeros so positions line up
    /// with the transmitted bits.
    pub bits: Vec<u8>,
    pub evm_db: f64,
    pub erased: usize,
}

/// Single-tap zero-forcing equalization of every data RE followed by Gray
/// hard decisions. EVM is measured against the nearest constellation point.
pub fn equalize_zf(
    grid: &ResourceGrid,
    estimate: &ChannelEstimate,
    layout: &SubframeLayout,
    modulation: Modulation,
) -> Equalized {
    let bps = modulation.bits_per_symbol();
    let mut out = Equalized {
        symbols: Vec::with_capacity(layout.data_capacity()),
        bits: Vec::with_capacity(layout.data_capacity() * bps),
        evm_db: EVM_FLOOR_DB,
        erased: 0,
    };
    let mut err = 0.0;
    let n_sc = layout.subcarriers();
    let h_all = estimate.values();
    for sym in 0..layout.symbols() {
        let roles = &layout.roles()[sym * n_sc..(sym + 1) * n_sc];
        let y = grid.symbol(sym);
        let h = &h_all[sym * n_sc..(sym + 1) * n_sc];
        for ((role, y), h) in roles.iter().zip(y).zip(h) {
            if *role != ReRole::Data {
                continue;
            }
            if h.norm_sqr() < ESTIMATE_FLOOR * ESTIMATE_FLOOR {
                out.erased += 1;
                out.bits.extend(std::iter::repeat_n(0, bps));
                continue;
            }
            let x = y / h;
            err += (x - modulation.nearest(x)).norm_sqr();
            modulation.demap_hard(x, &mut out.bits);
            out.symbols.push(x);
        }
    }
    if !out.symbols.is_empty() {
        let mse = err / out.symbols.len() as f64;
        out.evm_db = if mse > 0.0 {
            (10.0 * mse.log10()).max(EVM_FLOOR_DB)
        } else {
            EVM_FLOOR_DB
        };
    }
    out
}

/// Number of positions where `a` and `b` differ.
pub fn bit_errors(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::add_awgn;
    use crate::phy::estimate::estimate_channel;
    use crate::phy::grid::build_grid;
    use crate::phy::numerology::Numerology;
    use crate::phy::ofdm::OfdmModem;
    use crate::rng;
    use rand::Rng;
    use statrs::function::erf::erfc;

    fn q(x: f64) -> f64 {
        0.5 * erfc(x / std::f64::consts::SQRT_2)
    }

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut g = rng::stream(seed, "bits", 0);
        (0..n).map(|_| g.random_range(0..2)).collect()
    }

    #[test]
    fn ideal_loopback_64qam_is_error_free() {
        let num = Numerology::default();
        let modem = OfdmModem::new(num);
        for sf in [0, 1, 5] {
            let layout = SubframeLayout::new(num, sf);
            let bits = random_bits(layout.data_capacity() * 6, sf as u64);
            let grid = build_grid(&layout, Modulation::Qam64, &bits).unwrap();
            let rx = modem.demodulate(&modem.modulate(&grid), layout.symbols());
            let est = estimate_channel(&rx, &layout);
            let eq = equalize_zf(&rx, &est, &layout, Modulation::Qam64);
            assert_eq!(bit_errors(&eq.bits, &bits), 0);
            assert_eq!(eq.bits.len(), bits.len());
            assert!(eq.evm_db < -40.0);
        }
    }

    #[test]
    fn zero_estimate_erases_data() {
        let layout = SubframeLayout::new(Numerology::default(), 1);
        let grid = ResourceGrid::zeros(layout.subcarriers(), layout.symbols());
        let est = estimate_channel(&grid, &layout);
        let eq = equalize_zf(&grid, &est, &layout, Modulation::Qpsk);
        assert_eq!(eq.erased, layout.data_capacity());
        assert!(eq.symbols.is_empty());
        assert_eq!(eq.bits.len(), layout.data_capacity() * 2);
    }

    #[test]
    fn qam16_ber_matches_gray_awgn_theory() {
        // Known channel (estimated from a noiseless copy), AWGN on the REs.
        let layout = SubframeLayout::new(Numerology::default(), 1);
        let n0: f64 = 10f64.powf(-10.0 / 10.0);
        let a = (1.0 / (5.0 * n0)).sqrt();
        let theory = (3.0 * q(a) + 2.0 * q(3.0 * a) - q(5.0 * a)) / 4.0;
        let mut errors = 0;
        let mut total = 0;
        for t in 0..10 {
            let bits = random_bits(layout.data_capacity() * 4, 100 + t);
            let clean = build_grid(&layout, Modulation::Qam16, &bits).unwrap();
            let est = estimate_channel(&clean, &layout);
            let mut values = clean.values().to_vec();
            add_awgn(&mut values, n0, &mut rng::stream(7, "noise", t));
            let noisy = ResourceGrid::from_values(layout.subcarriers(), layout.symbols(), values);
            let eq = equalize_zf(&noisy, &est, &layout, Modulation::Qam16);
            errors += bit_errors(&eq.bits, &bits);
            total += bits.len();
        }
        let ber = errors as f64 / total as f64;
        assert!((ber - theory).abs() < 0.1 * theory, "ber {ber} theory {theory}");
    }
}

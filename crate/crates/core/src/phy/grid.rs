use super::gold::gold_sequence;
use super::numerology::Numerology;
use super::qam::Modulation;
use super::zc::{zadoff_chu, PSS_LENGTH, PSS_ROOT};
use crate::{C64, Error, Result};

/// Role of one resource element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReRole {
    Data,
    Rs,
    Pss,
    Null,
}

/// Slot-relative symbols carrying reference signals.
pub const RS_SYMBOLS_IN_SLOT: [usize; 2] = [0, 3];
/// Subcarrier period of the reference signals.
pub const RS_SPACING: usize = 6;
/// Sub-carriers on each side of DC reserved around the PSS.
const PSS_RESERVED_HALF: i32 = 36;

/// Which resource elements of a subframe carry what.
///
/// Rows are active subcarriers (DC excluded), columns are OFDM symbols. The
/// PSS occupies the last symbol of the first slot of subframes 0 and 5.
#[derive(Debug, Clone, PartialEq)]
pub struct SubframeLayout {
    pub numerology: Numerology,
    pub subframe_in_frame: usize,
    roles: Vec<ReRole>,
    rs_symbols: Vec<usize>,
    rs_rows: Vec<usize>,
    pss_symbol: Option<usize>,
}

impl SubframeLayout {
    pub fn new(numerology: Numerology, subframe_in_frame: usize) -> Self {
        let n_sc = numerology.active_subcarriers;
        let n_sym = numerology.symbols_per_subframe();
        let rs_symbols: Vec<usize> = (0..Numerology::SLOTS_PER_SUBFRAME)
            .flat_map(|s| RS_SYMBOLS_IN_SLOT.map(|l| s * numerology.symbols_per_slot + l))
            .collect();
        let rs_rows: Vec<usize> = (0..n_sc).step_by(RS_SPACING).collect();
        let pss_symbol = (subframe_in_frame % numerology.subframes_per_half_frame() == 0)
            .then_some(numerology.symbols_per_slot - 1);

        let mut roles = vec![ReRole::Data; n_sc * n_sym];
        for &sym in &rs_symbols {
            for &row in &rs_rows {
                roles[sym * n_sc + row] = ReRole::Rs;
            }
        }
        if let Some(sym) = pss_symbol {
            for k in -PSS_RESERVED_HALF..=PSS_RESERVED_HALF {
                if let Some(row) = numerology.row_of(k) {
                    let half = (PSS_LENGTH / 2) as i32;
                    roles[sym * n_sc + row] = if k.abs() <= half {
                        ReRole::Pss
                    } else {
                        ReRole::Null
                    };
                }
            }
        }
        Self {
            numerology,
            subframe_in_frame,
            roles,
            rs_symbols,
            rs_rows,
            pss_symbol,
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.numerology.active_subcarriers
    }

    pub fn symbols(&self) -> usize {
        self.numerology.symbols_per_subframe()
    }

    pub fn role(&self, symbol: usize, row: usize) -> ReRole {
        self.roles[symbol * self.subcarriers() + row]
    }

    pub fn roles(&self) -> &[ReRole] {
        &self.roles
    }

    pub fn rs_symbols(&self) -> &[usize] {
        &self.rs_symbols
    }

    pub fn rs_rows(&self) -> &[usize] {
        &self.rs_rows
    }

    pub fn pss_symbol(&self) -> Option<usize> {
        self.pss_symbol
    }

    pub fn data_capacity(&self) -> usize {
        self.roles.iter().filter(|r| **r == ReRole::Data).count()
    }

    /// Known QPSK reference symbols of subframe-relative symbol `symbol`, one
    /// per entry of [`Self::rs_rows`].
    pub fn rs_values(&self, symbol: usize) -> Vec<C64> {
        let spl = self.numerology.symbols_per_slot;
        let slot = self.subframe_in_frame * Numerology::SLOTS_PER_SUBFRAME + symbol / spl;
        let l = (symbol % spl) as u32;
        let c_init = (1u32 << 10) * (7 * (slot as u32 + 1) + l + 1);
        let c = gold_sequence(c_init, 2 * self.rs_rows.len());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        c.chunks(2)
            .map(|b| C64::new(s * (1.0 - 2.0 * f64::from(b[0])), s * (1.0 - 2.0 * f64::from(b[1]))))
            .collect()
    }
}

/// Frequency-domain content of one subframe.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    subcarriers: usize,
    symbols: usize,
    values: Vec<C64>,
}

impl ResourceGrid {
    pub fn zeros(subcarriers: usize, symbols: usize) -> Self {
        Self {
            subcarriers,
            symbols,
            values: vec![C64::new(0.0, 0.0); subcarriers * symbols],
        }
    }

    pub fn from_values(subcarriers: usize, symbols: usize, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), subcarriers * symbols);
        Self {
            subcarriers,
            symbols,
            values,
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn get(&self, symbol: usize, row: usize) -> C64 {
        self.values[symbol * self.subcarriers + row]
    }

    pub fn set(&mut self, symbol: usize, row: usize, v: C64) {
        self.values[symbol * self.subcarriers + row] = v;
    }

    pub fn symbol(&self, symbol: usize) -> &[C64] {
        &self.values[symbol * self.subcarriers..(symbol + 1) * self.subcarriers]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Multiplies every symbol by a per-subcarrier response.
    pub fn apply_frequency_response(&mut self, response: &[C64]) {
        assert_eq!(response.len(), self.subcarriers);
        for sym in self.values.chunks_mut(self.subcarriers) {
            for (x, h) in sym.iter_mut().zip(response) {
                *x *= h;
            }
        }
    }

    pub fn power(&self) -> f64 {
        self.values.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Time-domain PSS symbol content: the punctured Zadoff-Chu sequence mapped
/// around DC, element 31 landing on the (unused) DC carrier.
pub fn pss_subcarriers() -> Result<Vec<(i32, C64)>> {
    let zc = zadoff_chu(PSS_ROOT, PSS_LENGTH)?;
    let half = (PSS_LENGTH / 2) as i32;
    Ok(zc
        .into_iter()
        .enumerate()
        .map(|(n, x)| (n as i32 - half, x))
        .filter(|(k, _)| *k != 0)
        .collect())
}

/// Fills a subframe grid: reference signals, PSS and QAM data.
pub fn build_grid(layout: &SubframeLayout, modulation: Modulation, bits: &[u8]) -> Result<ResourceGrid> {
    let bps = modulation.bits_per_symbol();
    let capacity = layout.data_capacity() * bps;
    if bits.len() != capacity {
        return Err(Error::Framing(format!(
            "{} data bits given, subframe {} holds {capacity}",
            bits.len(),
            layout.subframe_in_frame
        )));
    }
    let n_sc = layout.subcarriers();
    let mut grid = ResourceGrid::zeros(n_sc, layout.symbols());
    for &sym in layout.rs_symbols() {
        for (row, v) in layout.rs_rows().iter().zip(layout.rs_values(sym)) {
            grid.set(sym, *row, v);
        }
    }
    if let Some(sym) = layout.pss_symbol() {
        for (k, x) in pss_subcarriers()? {
            let row = layout.numerology.row_of(k).expect("PSS inside the active band");
            grid.set(sym, row, x);
        }
    }
    let mut chunks = bits.chunks_exact(bps);
    for sym in 0..layout.symbols() {
        for row in 0..n_sc {
            if layout.role(sym, row) == ReRole::Data {
                let b = chunks.next().expect("capacity checked above");
                grid.set(sym, row, modulation.map(b));
            }
        }
    }
    Ok(grid)
}

/// Grid holding only the PSS of a PSS-bearing subframe.
pub fn pss_only_grid(numerology: Numerology) -> Result<ResourceGrid> {
    let layout = SubframeLayout::new(numerology, 0);
    let sym = layout.pss_symbol().expect("subframe 0 carries the PSS");
    let mut grid = ResourceGrid::zeros(layout.subcarriers(), layout.symbols());
    for (k, x) in pss_subcarriers()? {
        grid.set(sym, numerology.row_of(k).expect("PSS inside the band"), x);
    }
    Ok(grid)
}

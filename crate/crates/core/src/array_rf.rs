//! Antenna array geometry, element patterns and the radio-unit quantizer.
//!
//! Array coordinates are local to the panel. The panel faces the local `+x`
//! axis; array rows are spaced along the horizontal `y` axis and array
//! columns along the vertical `z` axis. For an arrival direction with azimuth
//! `az` (from `+x` towards `+y`) and elevation `el` (above the horizon) the
//! direction cosines along the two array axes are
//!
//! ```text
//! u = cos(el)·sin(az)     (row axis)
//! v = sin(el)             (column axis)
//! ```
//!
//! and element `(row, col)` sees the phase `2π·d·(row·u + col·v)` with `d`
//! the spacing in wavelengths.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{linalg, C64, Error, Result};

/// Radiation pattern shared by every element of an array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementPattern {
    #[default]
    Isotropic,
    /// `G(θ) = 2(q+1)·cos^q θ` in the front hemisphere, floored at the
    /// peak gain minus the front-to-back ratio.
    CosinePower {
        exponent: f64,
        front_to_back_db: f64,
    },
}

impl ElementPattern {
    /// Power gain (linear) towards a local direction.
    pub fn power_gain(&self, azimuth: f64, elevation: f64) -> f64 {
        match *self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::CosinePower {
                exponent,
                front_to_back_db,
            } => {
                let peak = 2.0 * (exponent + 1.0);
                let floor = 10f64.powf(-front_to_back_db / 10.0);
                let c = elevation.cos() * azimuth.cos();
                let shape = if c > 0.0 { c.powf(exponent) } else { 0.0 };
                peak * shape.max(floor)
            }
        }
    }

    pub fn amplitude(&self, azimuth: f64, elevation: f64) -> f64 {
        self.power_gain(azimuth, elevation).sqrt()
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ElementPattern::Isotropic => Ok(()),
            ElementPattern::CosinePower {
                exponent,
                front_to_back_db,
            } => {
                if !(exponent >= 0.0 && exponent.is_finite()) {
                    return Err(Error::Config(format!(
                        "element pattern exponent must be finite and >= 0, got {exponent}"
                    )));
                }
                if !(front_to_back_db >= 0.0) {
                    return Err(Error::Config(format!(
                        "front-to-back ratio must be >= 0 dB, got {front_to_back_db}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Uniform rectangular array of `rows × cols` elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
    #[serde(default)]
    pub pattern: ElementPattern,
}

fn default_spacing() -> f64 {
    0.6
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, spacing_wavelengths: f64) -> Result<Self> {
        let g = Self {
            rows,
            cols,
            spacing_wavelengths,
            pattern: ElementPattern::Isotropic,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_pattern(mut self, pattern: ElementPattern) -> Self {
        self.pattern = pattern;
        self
    }

    /// A single element, as used by the conventional receiver.
    pub fn single(pattern: ElementPattern) -> Self {
        Self {
            rows: 1,
            cols: 1,
            spacing_wavelengths: default_spacing(),
            pattern,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config(format!(
                "array must have at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.spacing_wavelengths > 0.0 && self.spacing_wavelengths.is_finite()) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {}",
                self.spacing_wavelengths
            )));
        }
        self.pattern.validate()
    }

    /// Number of elements `N`, the length of every beam weight.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(row, col)` of element `k`; elements are numbered row-major.
    pub fn element_position(&self, k: usize) -> (usize, usize) {
        (k / self.cols, k % self.cols)
    }
}

/// Pure geometric array response with unit-magnitude entries (norm `√N`).
pub fn steering_vector(geometry: &ArrayGeometry, azimuth: f64, elevation: f64) -> Vec<C64> {
    let u = elevation.cos() * azimuth.sin();
    let v = elevation.sin();
    let k0 = 2.0 * PI * geometry.spacing_wavelengths;
    (0..geometry.len())
        .map(|k| {
            let (r, c) = geometry.element_position(k);
            C64::from_polar(1.0, k0 * (r as f64 * u + c as f64 * v))
        })
        .collect()
}

/// Steering vector weighted by the element amplitude pattern.
pub fn array_response(geometry: &ArrayGeometry, azimuth: f64, elevation: f64) -> Vec<C64> {
    let amp = geometry.pattern.amplitude(azimuth, elevation);
    let mut s = steering_vector(geometry, azimuth, elevation);
    s.iter_mut().for_each(|x| *x *= amp);
    s
}

/// Unit-norm analog weight of one subarray.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeight(Vec<C64>);

impl BeamWeight {
    pub const NORM_TOLERANCE: f64 = 1e-9;

    /// Scales `coefficients` to unit norm.
    pub fn normalize(coefficients: &[C64]) -> Result<Self> {
        linalg::normalized(coefficients)
            .map(Self)
            .ok_or_else(|| Error::Parameter("cannot normalize a zero beam weight".into()))
    }

    /// Accepts a vector that is already unit norm.
    pub fn from_unit(coefficients: Vec<C64>) -> Result<Self> {
        let n = linalg::norm(&coefficients);
        if (n - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::Parameter(format!("beam weight norm is {n}, expected 1")));
        }
        Ok(Self(coefficients))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n])
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Phase shifter and variable-gain attenuator of the radio-unit control board.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfHardwareModel {
    pub phase_bits: u32,
    pub amplitude_bits: u32,
    pub amplitude_step_db: f64,
    pub update_delay_ms: f64,
}

impl Default for RfHardwareModel {
    fn default() -> Self {
        Self {
            phase_bits: 4,
            amplitude_bits: 6,
            amplitude_step_db: 0.25,
            update_delay_ms: 1.0,
        }
    }
}

impl RfHardwareModel {
    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.phase_bits) || !(1..=16).contains(&self.amplitude_bits) {
            return Err(Error::Config(format!(
                "quantizer resolution out of range: {} phase bits, {} amplitude bits",
                self.phase_bits, self.amplitude_bits
            )));
        }
        if !(self.amplitude_step_db > 0.0) {
            return Err(Error::Config("attenuator step must be positive".into()));
        }
        Ok(())
    }

    pub fn phase_levels(&self) -> u32 {
        1 << self.phase_bits
    }

    pub fn amplitude_levels(&self) -> u32 {
        1 << self.amplitude_bits
    }

    pub fn phase_step_rad(&self) -> f64 {
        2.0 * PI / f64::from(self.phase_levels())
    }

    /// Deepest attenuation, `(2^bits - 1) · step`.
    pub fn amplitude_range_db(&self) -> f64 {
        f64::from(self.amplitude_levels() - 1) * self.amplitude_step_db
    }

    pub fn max_phase_error_rad(&self) -> f64 {
        self.phase_step_rad() / 2.0
    }

    pub fn max_amplitude_error_db(&self) -> f64 {
        self.amplitude_step_db / 2.0
    }
}

/// Output of [`quantize_weight`]: the coefficients actually realized by the
/// hardware together with the control codes sent to it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedWeight {
    pub coefficients: Vec<C64>,
    pub phase_codes: Vec<u32>,
    pub attenuation_codes: Vec<u32>,
    /// Coefficients that were exactly zero and got the deepest attenuation.
    pub zero_coefficients: usize,
}

/// Snaps each coefficient onto the phase-shifter and attenuator grids.
///
/// Phases round to the nearest multiple of the phase step, ties upward.
/// Attenuation is taken relative to the largest-magnitude coefficient,
/// rounded to the nearest step and clamped to the attenuator range. The
/// result is not renormalized: the largest coefficient keeps its magnitude.
pub fn quantize_weight(w: &[C64], hw: &RfHardwareModel) -> QuantizedWeight {
    let max_mag = w.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let phase_step = hw.phase_step_rad();
    let levels = hw.phase_levels();
    let max_code = hw.amplitude_levels() - 1;

    let mut out = QuantizedWeight {
        coefficients: Vec::with_capacity(w.len()),
        phase_codes: Vec::with_capacity(w.len()),
        attenuation_codes: Vec::with_capacity(w.len()),
        zero_coefficients: 0,
    };
    for c in w {
        let mag = c.norm();
        let (pcode, acode) = if mag == 0.0 {
            out.zero_coefficients += 1;
            (0, max_code)
        } else {
            let phase = c.arg().rem_euclid(2.0 * PI);
            let pcode = ((phase / phase_step + 0.5).floor() as u32) % levels;
            let atten_db = 20.0 * (max_mag / mag).log10();
            let acode = ((atten_db / hw.amplitude_step_db + 0.5).floor() as u32).min(max_code);
            (pcode, acode)
        };
        let amp = max_mag * 10f64.powf(-f64::from(acode) * hw.amplitude_step_db / 20.0);
        out.coefficients
            .push(C64::from_polar(amp, f64::from(pcode) * phase_step));
        out.phase_codes.push(pcode);
        out.attenuation_codes.push(acode);
    }
    out
}

/// Beamformed observable `w^H h`.
pub fn apply_weight(w: &[C64], h: &[C64]) -> Result<C64> {
    if w.len() != h.len() {
        return Err(Error::Config(format!(
            "weight has {} coefficients but channel has {} elements",
            w.len(),
            h.len()
        )));
    }
    Ok(linalg::inner(w, h))
}

//! Perturbation-based tracking of the analog beam weight that maximizes the
//! average beamformed power, and the dominant-eigenvector oracle it converges
//! to.
//!
//! One iteration:
//!
//! 1. [`TrackerState::perturb`] draws a random direction `p ⊥ a_i` and forms
//!    the probe pair `w± = normalize(a_i ± δp)`.
//! 2. The receiver measures the mean RS power under each probe.
//! 3. [`TrackerState::estimate_gradient`] turns the power difference into a
//!    directional derivative `d = (P₊ − P₋)/(2δ)` and folds the relative
//!    estimate `(d / P̄)·p` into an exponential average `m`, where `P̄` is a
//!    running mean of the measured power.
//! 4. [`TrackerState::update_weight`] moves along `g = m/‖m‖` with step
//!    `α_i = α₀/(1 + i/τ_α) · min(1, ‖m‖)` and renormalizes.
//!
//! Dividing by `P̄` makes the trajectory independent of the channel scale, and
//! the `min(1, ‖m‖)` factor shrinks the step as the relative gradient vanishes
//! near the optimum.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::array_rf::BeamWeight;
use crate::channel::CorrelationMatrix;
use crate::linalg::{self, HermitianMatrix};
use crate::rng::complex_normal;
use crate::{C64, Error, Result};

/// Tracker hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub alpha0: f64,
    pub tau_alpha: f64,
    pub delta: f64,
    /// Weight of the previous gradient memory in the exponential average.
    pub smoothing: f64,
    /// Weight of the previous value in the running mean power.
    pub power_smoothing: f64,
    pub history_len: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.3,
            tau_alpha: 200.0,
            delta: 0.05,
            smoothing: 0.7,
            power_smoothing: 0.9,
            history_len: 64,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("tracker: {m}")));
        if !(self.alpha0 > 0.0) {
            return bad("alpha0 must be positive");
        }
        if !(self.tau_alpha > 0.0) {
            return bad("tau_alpha must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.smoothing) || !(0.0..1.0).contains(&self.power_smoothing) {
            return bad("smoothing factors must lie in [0, 1)");
        }
        if self.history_len == 0 {
            return bad("history_len must be at least 1");
        }
        Ok(())
    }

    /// Scheduled step `α₀/(1 + i/τ_α)` before power normalization.
    pub fn scheduled_alpha(&self, iteration: usize) -> f64 {
        self.alpha0 / (1.0 + iteration as f64 / self.tau_alpha)
    }
}

/// Mean baseband power measured while `weight` was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerObservation {
    pub weight: Vec<C64>,
    pub power: f64,
    pub subframe: usize,
}

/// Probe pair of one iteration and the direction it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePair {
    pub plus: BeamWeight,
    pub minus: BeamWeight,
    /// Unit vector orthogonal to the current weight.
    pub direction: Vec<C64>,
}

/// Ascent direction handed to [`TrackerState::update_weight`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Unit vector, or all zeros for "do not move".
    pub direction: Vec<C64>,
    /// Power-normalized step factor in `[0, 1]`.
    pub scale: f64,
}

impl Gradient {
    pub fn zero(n: usize) -> Self {
        Self {
            direction: vec![C64::new(0.0, 0.0); n],
            scale: 0.0,
        }
    }

    /// Unit direction `g` with full step scale.
    pub fn unit(direction: &[C64]) -> Result<Self> {
        Ok(Self {
            direction: BeamWeight::normalize(direction)?.into_vec(),
            scale: 1.0,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 || self.direction.iter().all(|c| *c == C64::new(0.0, 0.0))
    }
}

/// `(P₊ − P₋)/(2δ)`.
pub fn directional_derivative(plus: f64, minus: f64, delta: f64) -> f64 {
    (plus - minus) / (2.0 * delta)
}

/// Mutable state of one subarray's tracker.
#[derive(Debug, Clone)]
pub struct TrackerState {
    config: TrackerConfig,
    weight: BeamWeight,
    iteration: usize,
    alpha: f64,
    history: VecDeque<(BeamWeight, f64)>,
    memory: Vec<C64>,
    mean_power: Option<f64>,
    gradient: Vec<C64>,
}

impl TrackerState {
    /// Starts from a uniformly random unit vector.
    pub fn new<R: Rng + ?Sized>(config: TrackerConfig, elements: usize, rng: &mut R) -> Result<Self> {
        loop {
            let draw: Vec<C64> = (0..elements).map(|_| complex_normal(rng)).collect();
            if linalg::norm(&draw) > 1e-12 {
                return Self::with_weight(config, BeamWeight::normalize(&draw)?);
            }
        }
    }

    pub fn with_weight(config: TrackerConfig, weight: BeamWeight) -> Result<Self> {
        config.validate()?;
        let n = weight.len();
        if n == 0 {
            return Err(Error::Config("tracker needs at least one element".into()));
        }
        Ok(Self {
            config,
            alpha: config.scheduled_alpha(0),
            weight,
            iteration: 0,
            history: VecDeque::with_capacity(config.history_len),
            memory: vec![C64::new(0.0, 0.0); n],
            mean_power: None,
            gradient: vec![C64::new(0.0, 0.0); n],
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn weight(&self) -> &BeamWeight {
        &self.weight
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.config.delta
    }

    /// Most recent `(weight, power)` observations, oldest first.
    pub fn history(&self) -> &VecDeque<(BeamWeight, f64)> {
        &self.history
    }

    /// Last gradient direction returned by [`Self::estimate_gradient`].
    pub fn gradient(&self) -> &[C64] {
        &self.gradient
    }

    /// Draws a probe pair around the current weight.
    pub fn perturb<R: Rng + ?Sized>(&self, rng: &mut R) -> ProbePair {
        let a = self.weight.as_slice();
        let direction = loop {
            let mut p: Vec<C64> = (0..a.len()).map(|_| complex_normal(rng)).collect();
            linalg::project_out(&mut p, a);
            if let Some(u) = linalg::normalized(&p).filter(|_| linalg::norm(&p) >= 1e-12) {
                break u;
            }
            if a.len() == 1 {
                break vec![C64::new(0.0, 0.0)];
            }
        };
        let probe = |sign: f64| -> BeamWeight {
            let w: Vec<C64> = a
                .iter()
                .zip(&direction)
                .map(|(a, p)| a + p * (sign * self.config.delta))
                .collect();
            BeamWeight::normalize(&w).expect("probe has norm ≥ 1")
        };
        ProbePair {
            plus: probe(1.0),
            minus: probe(-1.0),
            direction,
        }
    }

    fn record(&mut self, obs: &PowerObservation) {
        if self.history.len() == self.config.history_len {
            self.history.pop_front();
        }
        if let Ok(w) = BeamWeight::normalize(&obs.weight) {
            self.history.push_back((w, obs.power));
        }
    }

    /// Folds one probe pair's measurements into the gradient memory.
    pub fn estimate_gradient(
        &mut self,
        plus: &PowerObservation,
        minus: &PowerObservation,
        probe: &ProbePair,
    ) -> Gradient {
        self.record(plus);
        self.record(minus);
        let n = self.memory.len();
        if plus.power == minus.power {
            self.gradient = vec![C64::new(0.0, 0.0); n];
            return Gradient::zero(n);
        }
        let d = directional_derivative(plus.power, minus.power, self.config.delta);
        let pair_mean = 0.5 * (plus.power + minus.power);
        let mean = match self.mean_power {
            None => pair_mean,
            Some(m) => self.config.power_smoothing * m + (1.0 - self.config.power_smoothing) * pair_mean,
        };
        self.mean_power = Some(mean);
        if !(mean > 0.0) {
            self.gradient = vec![C64::new(0.0, 0.0); n];
            return Gradient::zero(n);
        }
        let s = self.config.smoothing;
        for (m, p) in self.memory.iter_mut().zip(&probe.direction) {
            *m = *m * s + p * ((1.0 - s) * d / mean);
        }
        linalg::project_out(&mut self.memory, self.weight.as_slice());
        let size = linalg::norm(&self.memory);
        if size < 1e-300 {
            self.gradient = vec![C64::new(0.0, 0.0); n];
            return Gradient::zero(n);
        }
        self.gradient = self.memory.iter().map(|m| m / size).collect();
        Gradient {
            direction: self.gradient.clone(),
            scale: size.min(1.0),
        }
    }

    /// `a_{i+1} = normalize(a_i + α_i·g_i)` with the power-normalized step.
    pub fn update_weight(&mut self, g: &Gradient) {
        let scheduled = self.config.scheduled_alpha(self.iteration);
        if !g.is_zero() {
            self.alpha = scheduled * g.scale;
            let next: Vec<C64> = self
                .weight
                .as_slice()
                .iter()
                .zip(&g.direction)
                .map(|(a, g)| a + g * self.alpha)
                .collect();
            if let Ok(w) = BeamWeight::normalize(&next) {
                self.weight = w;
            }
        }
        self.iteration += 1;
    }

    /// Runs one full iteration with a caller-supplied power measurement.
    pub fn step<R, F>(&mut self, rng: &mut R, mut measure: F) -> (ProbePair, f64, f64)
    where
        R: Rng + ?Sized,
        F: FnMut(&BeamWeight) -> f64,
    {
        let probe = self.perturb(rng);
        let pp = measure(&probe.plus);
        let pm = measure(&probe.minus);
        let obs = |w: &BeamWeight, power| PowerObservation {
            weight: w.as_slice().to_vec(),
            power,
            subframe: self.iteration,
        };
        let (op, om) = (obs(&probe.plus, pp), obs(&probe.minus, pm));
        let g = self.estimate_gradient(&op, &om, &probe);
        self.update_weight(&g);
        (probe, pp, pm)
    }
}

/// Dominant eigenpair of a Hermitian PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenOracle {
    pub vector: Vec<C64>,
    pub value: f64,
    /// Second eigenvalue, from power iteration on the deflated matrix.
    pub second: f64,
    /// Set when the top eigenvalue is repeated within `1e-6` relative.
    pub degenerate: bool,
}

const SQUARINGS: usize = 64;
const POLISH_ITERATIONS: usize = 200;

/// Dominant eigenpair by repeated squaring followed by power iteration.
fn dominant(r: &HermitianMatrix) -> (Vec<C64>, f64) {
    let n = r.dim();
    let scale = r.frobenius_norm();
    if scale == 0.0 {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[0] = C64::new(1.0, 0.0);
        return (e, 0.0);
    }
    // S ← S²/‖S²‖ converges to the projector onto the top eigenspace.
    let mut s = r.scaled(1.0 / scale);
    for _ in 0..SQUARINGS {
        let sq = s.mul(&s);
        let norm = sq.frobenius_norm();
        if norm == 0.0 {
            break;
        }
        let next = sq.scaled(1.0 / norm);
        let change = next.frobenius_distance(&s);
        s = next;
        if change < 1e-15 {
            break;
        }
    }
    let col = (0..n)
        .max_by(|&a, &b| s.get(a, a).re.total_cmp(&s.get(b, b).re))
        .unwrap_or(0);
    let start: Vec<C64> = (0..n).map(|i| s.get(i, col)).collect();
    let mut v = linalg::normalized(&start).unwrap_or_else(|| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[col] = C64::new(1.0, 0.0);
        e
    });
    let mut lambda = r.quadratic_form(&v);
    for _ in 0..POLISH_ITERATIONS {
        let rv = r.mul_vec(&v);
        let residual: f64 = rv
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual < 1e-12 * lambda.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        match linalg::normalized(&rv) {
            Some(u) => v = u,
            None => break,
        }
        lambda = r.quadratic_form(&v);
    }
    (v, lambda)
}

/// Dominant eigenvector and eigenvalue of `r`.
pub fn eigen_oracle(r: &CorrelationMatrix) -> EigenOracle {
    let (vector, value) = dominant(r);
    let mut deflated = r.clone();
    deflated.add_outer(-value, &vector);
    let second = if r.dim() > 1 { dominant(&deflated).1 } else { 0.0 };
    EigenOracle {
        degenerate: value > 0.0 && (value - second).abs() < 1e-6 * value || value == 0.0,
        vector,
        value,
        second,
    }
}

/// Cap for [`optimality_gap`] when the weight captures no power.
pub const GAP_CAP_DB: f64 = 100.0;

/// `10·log10(λ_max / (a^H R a))` in dB, capped at [`GAP_CAP_DB`]. The weight
/// is taken as applied, so attenuation in a quantized weight counts as loss.
pub fn optimality_gap(weight: &[C64], r: &CorrelationMatrix, lambda_max: f64) -> f64 {
    let p = r.quadratic_form(weight);
    if !(p > 0.0) || lambda_max / p > 10f64.powf(GAP_CAP_DB / 10.0) {
        return GAP_CAP_DB;
    }
    (10.0 * (lambda_max / p).log10()).clamp(0.0, GAP_CAP_DB)
}

//! Clustered multipath spatial channels.
//!
//! The element-domain channel on subcarrier `k` at subframe `t` is
//!
//! ```text
//! h(k, t) = Σ_l √p_l · g_l(t) · v_l · exp(−j2π·k·Δf·τ_l)
//! ```
//!
//! with `v_l` the array response towards cluster `l` (steering vector times
//! element amplitude) and `g_l(t)` a unit-variance fading coefficient. The
//! fading coefficients of different clusters are independent, so the spatial
//! correlation is `Σ_l p_l v_l v_l^H` regardless of delays.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::array_rf::{array_response, ArrayGeometry};
use crate::linalg::{self, HermitianMatrix};
use crate::rng::{self, complex_normal, SimRng};
use crate::{C64, Error, Result};

/// Spatial correlation matrix `E[h h^H]`.
pub type CorrelationMatrix = HermitianMatrix;

/// One multipath cluster as seen from the receiving array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathCluster {
    /// Radians, local array frame.
    pub azimuth: f64,
    /// Radians, local array frame.
    pub elevation: f64,
    pub power_fraction: f64,
    #[serde(default)]
    pub delay_s: f64,
    /// Deterministic phase advance of the fading coefficient per subframe.
    #[serde(default)]
    pub doppler_phase_rate: f64,
}

impl PathCluster {
    pub fn new(azimuth: f64, elevation: f64, power_fraction: f64) -> Self {
        Self {
            azimuth,
            elevation,
            power_fraction,
            delay_s: 0.0,
            doppler_phase_rate: 0.0,
        }
    }
}

/// Checks the cluster-set invariants. `max_delay_s` is the cyclic prefix.
pub fn validate_clusters(clusters: &[PathCluster], max_delay_s: f64) -> Result<()> {
    if clusters.is_empty() {
        return Err(Error::Config("channel needs at least one cluster".into()));
    }
    let total: f64 = clusters.iter().map(|c| c.power_fraction).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "cluster power fractions sum to {total}, expected 1"
        )));
    }
    for (i, c) in clusters.iter().enumerate() {
        if !(c.power_fraction >= 0.0) {
            return Err(Error::Config(format!("cluster {i} has negative power")));
        }
        if !(c.delay_s >= 0.0 && c.delay_s < max_delay_s) {
            return Err(Error::Config(format!(
                "cluster {i} delay {} s outside [0, {max_delay_s})",
                c.delay_s
            )));
        }
    }
    Ok(())
}

/// Statistics of the per-cluster fading coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingModel {
    /// Draw the initial coefficient from CN(0,1) instead of a unit-modulus
    /// random phase.
    pub rayleigh: bool,
    /// Gauss-Markov correlation between successive subframes; `1` means no
    /// innovation (only the Doppler rotation).
    pub coherence: f64,
}

impl Default for FadingModel {
    fn default() -> Self {
        Self {
            rayleigh: false,
            coherence: 1.0,
        }
    }
}

impl FadingModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.coherence) {
            return Err(Error::Config(format!(
                "fading coherence must lie in [0, 1], got {}",
                self.coherence
            )));
        }
        if self.coherence < 1.0 && !self.rayleigh {
            return Err(Error::Config(
                "Gauss-Markov innovation requires rayleigh = true".into(),
            ));
        }
        Ok(())
    }
}

/// Per-cluster fading coefficients advanced one subframe at a time.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    model: FadingModel,
    coefficients: Vec<C64>,
    subframe: usize,
    rng: SimRng,
}

impl FadingProcess {
    pub fn new(model: FadingModel, clusters: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, "fading", 0);
        let coefficients = (0..clusters)
            .map(|_| {
                if model.rayleigh {
                    complex_normal(&mut rng)
                } else {
                    C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
                }
            })
            .collect();
        Self {
            model,
            coefficients,
            subframe: 0,
            rng,
        }
    }

    pub fn subframe(&self) -> usize {
        self.subframe
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    /// Advances to `subframe`, using each cluster's Doppler rate for every
    /// step taken. Moving backwards is not supported.
    pub fn advance_to(&mut self, subframe: usize, clusters: &[PathCluster]) {
        assert!(subframe >= self.subframe, "fading process cannot rewind");
        assert_eq!(clusters.len(), self.coefficients.len());
        let rho = self.model.coherence;
        let innovation = (1.0 - rho * rho).max(0.0).sqrt();
        while self.subframe < subframe {
            for (g, c) in self.coefficients.iter_mut().zip(clusters) {
                let mut next = *g * rho;
                if innovation > 0.0 {
                    next += complex_normal(&mut self.rng) * innovation;
                }
                *g = next * C64::from_polar(1.0, c.doppler_phase_rate);
            }
            self.subframe += 1;
        }
    }
}

/// Channel realization for one subframe in factored form.
///
/// Stores the cluster gains `√p_l g_l`, the array responses and the delays;
/// the element-domain vector of any subcarrier is assembled on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialChannel {
    pub subframe: usize,
    pub subcarrier_spacing_hz: f64,
    /// Signed subcarrier indices (DC = 0) at which the channel is evaluated.
    pub subcarriers: Vec<i32>,
    gains: Vec<C64>,
    responses: Vec<Vec<C64>>,
    delays: Vec<f64>,
}

impl SpatialChannel {
    pub fn from_parts(
        clusters: &[PathCluster],
        geometry: &ArrayGeometry,
        fading: &[C64],
        subcarriers: Vec<i32>,
        subcarrier_spacing_hz: f64,
        subframe: usize,
    ) -> Self {
        Self {
            subframe,
            subcarrier_spacing_hz,
            subcarriers,
            gains: clusters
                .iter()
                .zip(fading)
                .map(|(c, g)| g * c.power_fraction.sqrt())
                .collect(),
            responses: clusters
                .iter()
                .map(|c| array_response(geometry, c.azimuth, c.elevation))
                .collect(),
            delays: clusters.iter().map(|c| c.delay_s).collect(),
        }
    }

    pub fn elements(&self) -> usize {
        self.responses.first().map_or(0, Vec::len)
    }

    fn delay_phasor(&self, k: i32, l: usize) -> C64 {
        C64::from_polar(
            1.0,
            -2.0 * PI * f64::from(k) * self.subcarrier_spacing_hz * self.delays[l],
        )
    }

    /// Element-domain vector `h(k)` at position `idx` of [`Self::subcarriers`].
    pub fn element_response(&self, idx: usize) -> Vec<C64> {
        let k = self.subcarriers[idx];
        let mut h = vec![C64::new(0.0, 0.0); self.elements()];
        for (l, resp) in self.responses.iter().enumerate() {
            let c = self.gains[l] * self.delay_phasor(k, l);
            for (x, v) in h.iter_mut().zip(resp) {
                *x += c * v;
            }
        }
        h
    }

    /// Scalar baseband channel `w^H h(k)` on every subcarrier.
    pub fn beamformed(&self, w: &[C64]) -> Vec<C64> {
        let beam: Vec<C64> = self
            .responses
            .iter()
            .zip(&self.gains)
            .map(|(v, g)| g * linalg::inner(w, v))
            .collect();
        self.combine(&beam)
    }

    fn combine(&self, beam: &[C64]) -> Vec<C64> {
        let df = self.subcarrier_spacing_hz;
        self.subcarriers
            .iter()
            .map(|&k| {
                beam.iter()
                    .zip(&self.delays)
                    .map(|(b, tau)| b * C64::from_polar(1.0, -2.0 * PI * f64::from(k) * df * tau))
                    .sum()
            })
            .collect()
    }
}

/// Realizes the channel of `clusters` at `subframe` for stream `seed`.
///
/// Pure: the fading process is replayed from subframe 0, so the result only
/// depends on the arguments.
pub fn generate_channel(
    clusters: &[PathCluster],
    geometry: &ArrayGeometry,
    fading: FadingModel,
    subcarriers: Vec<i32>,
    subcarrier_spacing_hz: f64,
    subframe: usize,
    seed: u64,
) -> Result<SpatialChannel> {
    if clusters.is_empty() {
        return Err(Error::Config("channel needs at least one cluster".into()));
    }
    fading.validate()?;
    let mut process = FadingProcess::new(fading, clusters.len(), seed);
    process.advance_to(subframe, clusters);
    Ok(SpatialChannel::from_parts(
        clusters,
        geometry,
        process.coefficients(),
        subcarriers,
        subcarrier_spacing_hz,
        subframe,
    ))
}

/// `R = Σ_l p_l v_l v_l^H`, the expectation over independent fading.
pub fn exact_correlation(clusters: &[PathCluster], geometry: &ArrayGeometry) -> CorrelationMatrix {
    let mut r = HermitianMatrix::zeros(geometry.len());
    for c in clusters {
        r.add_outer(
            c.power_fraction,
            &array_response(geometry, c.azimuth, c.elevation),
        );
    }
    r
}

/// Linear motion between two cluster sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub start: Vec<PathCluster>,
    pub end: Vec<PathCluster>,
    /// Subframe at which motion begins.
    #[serde(default)]
    pub start_subframe: usize,
    pub duration_subframes: usize,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.start.len() != self.end.len() {
            return Err(Error::Config(format!(
                "trajectory endpoints have {} and {} clusters",
                self.start.len(),
                self.end.len()
            )));
        }
        if self.start.is_empty() {
            return Err(Error::Config("trajectory needs at least one cluster".into()));
        }
        Ok(())
    }

    /// Whether the clusters move during `subframe`.
    pub fn in_motion(&self, subframe: usize) -> bool {
        subframe >= self.start_subframe && subframe < self.start_subframe + self.duration_subframes
    }
}

/// Cluster set at `subframe`: every parameter is interpolated linearly
/// between the endpoints; outside the motion window the endpoints are held.
pub fn evolve_trajectory(spec: &TrajectorySpec, subframe: usize) -> Result<Vec<PathCluster>> {
    spec.validate()?;
    let elapsed = subframe.saturating_sub(spec.start_subframe);
    if elapsed == 0 {
        return Ok(spec.start.clone());
    }
    if elapsed >= spec.duration_subframes {
        return Ok(spec.end.clone());
    }
    let t = elapsed as f64 / spec.duration_subframes as f64;
    let lerp = |a: f64, b: f64| a + (b - a) * t;
    Ok(spec
        .start
        .iter()
        .zip(&spec.end)
        .map(|(a, b)| PathCluster {
            azimuth: lerp(a.azimuth, b.azimuth),
            elevation: lerp(a.elevation, b.elevation),
            power_fraction: lerp(a.power_fraction, b.power_fraction),
            delay_s: lerp(a.delay_s, b.delay_s),
            doppler_phase_rate: lerp(a.doppler_phase_rate, b.doppler_phase_rate),
        })
        .collect())
}

/// Adds circular complex Gaussian noise of power `noise_power` in place.
pub fn add_awgn<R: Rng + ?Sized>(signal: &mut [C64], noise_power: f64, rng: &mut R) {
    if noise_power <= 0.0 {
        return;
    }
    let scale = noise_power.sqrt();
    for s in signal.iter_mut() {
        *s += complex_normal(rng) * scale;
    }
}

/// Parameters of the default rich-scattering cluster layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RichScattering {
    pub clusters: usize,
    /// Mean arrival direction, degrees.
    pub mean_azimuth_deg: f64,
    pub mean_elevation_deg: f64,
    /// Laplacian scale of the per-cluster angle offsets, degrees.
    pub azimuth_spread_deg: f64,
    pub elevation_spread_deg: f64,
    /// Power of cluster `l` is proportional to `exp(−l / decay)`.
    pub power_decay: f64,
    /// Mean excess delay between consecutive clusters.
    pub mean_delay_step_s: f64,
    /// Largest per-subframe Doppler rotation, radians.
    pub max_doppler_phase_rate: f64,
}

impl Default for RichScattering {
    fn default() -> Self {
        Self {
            clusters: 6,
            mean_azimuth_deg: 0.0,
            mean_elevation_deg: 0.0,
            azimuth_spread_deg: 25.0,
            elevation_spread_deg: 8.0,
            power_decay: 2.0,
            mean_delay_step_s: 60e-9,
            max_doppler_phase_rate: 0.05,
        }
    }
}

impl RichScattering {
    /// Draws a cluster set. The strongest cluster sits at the mean direction
    /// perturbed like the others.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<PathCluster>> {
        if self.clusters == 0 {
            return Err(Error::Config("rich scattering needs at least one cluster".into()));
        }
        let laplace = |rng: &mut R, scale: f64| {
            let u: f64 = rng.random_range(-0.5..0.5);
            -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(1e-300).ln()
        };
        let delay_step = Exp::new(1.0 / self.mean_delay_step_s.max(1e-15))
            .map_err(|e| Error::Config(e.to_string()))?;
        let doppler = Uniform::new_inclusive(-self.max_doppler_phase_rate, self.max_doppler_phase_rate)
            .map_err(|e| Error::Config(e.to_string()))?;

        let mut delay = 0.0;
        let mut clusters: Vec<PathCluster> = (0..self.clusters)
            .map(|l| {
                let az = self.mean_azimuth_deg + laplace(rng, self.azimuth_spread_deg);
                let el = self.mean_elevation_deg + laplace(rng, self.elevation_spread_deg);
                if l > 0 {
                    delay += delay_step.sample(rng);
                }
                PathCluster {
                    azimuth: az.clamp(-180.0, 180.0).to_radians(),
                    elevation: el.clamp(-90.0, 90.0).to_radians(),
                    power_fraction: (-(l as f64) / self.power_decay).exp(),
                    delay_s: delay.min(4e-6),
                    doppler_phase_rate: doppler.sample(rng),
                }
            })
            .collect();
        let total: f64 = clusters.iter().map(|c| c.power_fraction).sum();
        clusters.iter_mut().for_each(|c| c.power_fraction /= total);
        Ok(clusters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_rf::steering_vector;

    const DF: f64 = 15e3;

    fn active() -> Vec<i32> {
        (-600..=600).filter(|k| *k != 0).collect()
    }

    fn ula6() -> ArrayGeometry {
        ArrayGeometry::new(6, 1, 0.6).unwrap()
    }

    #[test]
    fn flat_single_path_equals_steering_vector() {
        let g = ula6();
        let c = [PathCluster::new(0.3, 0.1, 1.0)];
        // Unit-modulus fading: take the realized coefficient out.
        let ch = generate_channel(&c, &g, FadingModel::default(), active(), DF, 0, 3).unwrap();
        let s = steering_vector(&g, 0.3, 0.1);
        let first = ch.element_response(0);
        let phase = first[0] / s[0];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        for idx in [0, 17, 599, 600, 1199] {
            let h = ch.element_response(idx);
            for (x, y) in h.iter().zip(&s) {
                assert!((x - phase * y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_ray_mean_power_is_sum_of_cluster_powers() {
        // Second ray delayed by 1/(2·BW_active): the relative phase sweeps π
        // across the band, so each realization matches the analytic two-ray
        // response and the fading average equals the total cluster power.
        let bw = 1200.0 * DF;
        let clusters = [
            PathCluster::new(0.0, 0.0, 0.5),
            PathCluster {
                delay_s: 1.0 / (2.0 * bw),
                ..PathCluster::new(0.0, 0.0, 0.5)
            },
        ];
        let g = ArrayGeometry::single(Default::default());
        let mut ensemble = 0.0;
        let seeds = 2000;
        for seed in 0..seeds {
            let ch =
                generate_channel(&clusters, &g, FadingModel::default(), active(), DF, 0, seed).unwrap();
            let powers: Vec<f64> = (0..1200).map(|i| ch.element_response(i)[0].norm_sqr()).collect();
            let mean = powers.iter().sum::<f64>() / 1200.0;
            let analytic: f64 = active()
                .iter()
                .map(|&k| {
                    let ph = C64::from_polar(1.0, -2.0 * PI * f64::from(k) * DF / (2.0 * bw));
                    (ch.gains[0] + ch.gains[1] * ph).norm_sqr()
                })
                .sum::<f64>()
                / 1200.0;
            assert!((mean - analytic).abs() < 1e-12);
            if seed == 0 {
                let max = powers.iter().cloned().fold(f64::MIN, f64::max);
                let min = powers.iter().cloned().fold(f64::MAX, f64::min);
                assert!(max - min > 0.5, "frequency response should vary");
            }
            ensemble += mean / seeds as f64;
        }
        assert!((ensemble - 1.0).abs() < 0.05, "{ensemble}");
    }

    #[test]
    fn generation_is_deterministic() {
        let g = ula6();
        let c = RichScattering::default().draw(&mut rng::stream(1, "c", 0)).unwrap();
        let m = FadingModel {
            rayleigh: true,
            coherence: 0.9,
        };
        let a = generate_channel(&c, &g, m, active(), DF, 25, 77).unwrap();
        let b = generate_channel(&c, &g, m, active(), DF, 25, 77).unwrap();
        assert_eq!(a, b);
        let d = generate_channel(&c, &g, m, active(), DF, 25, 78).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn empty_cluster_list_is_rejected() {
        let r = generate_channel(&[], &ula6(), FadingModel::default(), active(), DF, 0, 0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn single_cluster_correlation_is_rank_one() {
        let g = ula6();
        let a = steering_vector(&g, 0.5, 0.0);
        let r = exact_correlation(&[PathCluster::new(0.5, 0.0, 1.0)], &g);
        assert!((r.quadratic_form(&linalg::normalized(&a).unwrap()) - 6.0).abs() < 1e-12);
        assert!((r.trace() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_clusters_split_eigenvalues() {
        // Half-wavelength ULA: u = 0 and u = 1/3 are orthogonal DFT beams.
        let g = ArrayGeometry::new(6, 1, 0.5).unwrap();
        let az2 = (1.0f64 / 3.0).asin();
        let c = [PathCluster::new(0.0, 0.0, 0.7), PathCluster::new(az2, 0.0, 0.3)];
        let a1 = steering_vector(&g, 0.0, 0.0);
        let a2 = steering_vector(&g, az2, 0.0);
        assert!(linalg::inner(&a1, &a2).norm() < 1e-12);
        let r = exact_correlation(&c, &g);
        let u1 = linalg::normalized(&a1).unwrap();
        let u2 = linalg::normalized(&a2).unwrap();
        assert!((r.quadratic_form(&u1) - 0.7 * 6.0).abs() < 1e-12);
        assert!((r.quadratic_form(&u2) - 0.3 * 6.0).abs() < 1e-12);
        let ru1 = r.mul_vec(&u1);
        for (x, y) in ru1.iter().zip(&u1) {
            assert!((x - y * 4.2).norm() < 1e-12);
        }
    }

    #[test]
    fn correlation_matches_monte_carlo() {
        let g = ula6();
        let clusters = [
            PathCluster::new(0.2, 0.0, 0.5),
            PathCluster::new(-0.6, 0.1, 0.3),
            PathCluster::new(1.0, -0.2, 0.2),
        ];
        let exact = exact_correlation(&clusters, &g);
        let model = FadingModel {
            rayleigh: true,
            coherence: 1.0,
        };
        let trials = 100_000;
        let mut sample = HermitianMatrix::zeros(6);
        for seed in 0..trials {
            let ch = generate_channel(&clusters, &g, model, vec![37], DF, 0, seed).unwrap();
            sample.add_outer(1.0 / trials as f64, &ch.element_response(0));
        }
        let rel = sample.frobenius_distance(&exact) / exact.frobenius_norm();
        assert!(rel < 0.02, "relative Frobenius error {rel}");
    }

    #[test]
    fn trajectory_endpoints_and_midpoint() {
        let spec = TrajectorySpec {
            start: vec![PathCluster::new(0.0, 0.1, 0.6), PathCluster::new(1.0, 0.0, 0.4)],
            end: vec![PathCluster::new(0.5, -0.1, 0.2), PathCluster::new(0.0, 0.2, 0.8)],
            start_subframe: 0,
            duration_subframes: 100,
        };
        assert_eq!(evolve_trajectory(&spec, 0).unwrap(), spec.start);
        assert_eq!(evolve_trajectory(&spec, 100).unwrap(), spec.end);
        assert_eq!(evolve_trajectory(&spec, 5000).unwrap(), spec.end);
        let mid = evolve_trajectory(&spec, 50).unwrap();
        for ((m, a), b) in mid.iter().zip(&spec.start).zip(&spec.end) {
            assert!((m.azimuth - (a.azimuth + b.azimuth) / 2.0).abs() < 1e-15);
            assert!((m.elevation - (a.elevation + b.elevation) / 2.0).abs() < 1e-15);
            assert!((m.power_fraction - (a.power_fraction + b.power_fraction) / 2.0).abs() < 1e-15);
        }
        let bad = TrajectorySpec {
            end: vec![PathCluster::new(0.0, 0.0, 1.0)],
            ..spec
        };
        assert!(matches!(evolve_trajectory(&bad, 3), Err(Error::Config(_))));
    }

    #[test]
    fn awgn_zero_power_is_identity() {
        let mut s = vec![C64::new(1.0, -2.0); 16];
        let orig = s.clone();
        add_awgn(&mut s, 0.0, &mut rng::stream(0, "n", 0));
        assert_eq!(s, orig);
    }

    #[test]
    fn awgn_unit_power_variance() {
        let mut s = vec![C64::new(0.0, 0.0); 1_000_000];
        add_awgn(&mut s, 1.0, &mut rng::stream(4, "n", 0));
        let var = s.iter().map(|x| x.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((var - 1.0).abs() < 0.005, "{var}");
    }

    #[test]
    fn awgn_snr_loopback() {
        let mut rng = rng::stream(8, "n", 0);
        let clean: Vec<C64> = (0..200_000)
            .map(|i| C64::from_polar(1.0, i as f64 * 0.37))
            .collect();
        let mut noisy = clean.clone();
        add_awgn(&mut noisy, 0.1, &mut rng);
        let noise: f64 = noisy.iter().zip(&clean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        let sig: f64 = clean.iter().map(|x| x.norm_sqr()).sum::<f64>();
        let snr = 10.0 * (sig / noise).log10();
        assert!((snr - 10.0).abs() < 0.1, "{snr}");
    }

    #[test]
    fn correlation_is_hermitian_psd_and_single_cluster_eigvec_is_steering() {
        for seed in 0..50 {
            let c = RichScattering::default().draw(&mut rng::stream(seed, "rs", 0)).unwrap();
            let g = ArrayGeometry::new(6, 2, 0.6).unwrap();
            let r = exact_correlation(&c, &g);
            assert!(r.hermitian_error() < 1e-12);
            // PSD: quadratic form non-negative on random probes.
            let mut rng = rng::stream(seed, "probe", 0);
            for _ in 0..20 {
                let x: Vec<C64> = (0..12).map(|_| complex_normal(&mut rng)).collect();
                assert!(r.quadratic_form(&x) >= -1e-12);
            }
            assert!((r.trace() - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rich_scattering_is_valid() {
        for seed in 0..20 {
            let c = RichScattering::default().draw(&mut rng::stream(seed, "rs", 0)).unwrap();
            validate_clusters(&c, 512.0 / 30.72e6).unwrap();
            assert_eq!(c.len(), 6);
        }
    }
}

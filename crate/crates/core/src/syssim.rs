//! System-level downlink evaluation.
//!
//! Small-cell base stations are ceiling-mounted on the floors of a building
//! and serve mobile stations dropped uniformly over every floor. Each base
//! station has two RF chains, one per polarization. In the hybrid system each
//! chain drives a planar subarray through its saturated analog weight (the
//! quantized dominant eigenvector of the link correlation); in the
//! conventional system each chain feeds one directive element. A mobile
//! associates with the strongest long-term received power, every cell
//! schedules one of its mobiles per drop, and the ergodic single-user 2×2
//! spatial-multiplexing rate is evaluated with and without intercell
//! interference.
//!
//! The link from base station `b` to mobile `u` is narrowband:
//!
//! ```text
//! H[r, m] = √G_bu · Σ_l √p_l · X_l[r, m] · (w_m^H v_l)
//! ```
//!
//! with `G_bu` the large-scale gain, `v_l` the transmit array response towards
//! cluster `l`, `w_m` the analog weight of chain `m` and `X_l` a 2×2 Rayleigh
//! polarization matrix with cross-polar power set by the XPD.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_rf::{array_response, quantize_weight, ArrayGeometry, ElementPattern, RfHardwareModel};
use crate::beamtrack::eigen_oracle;
use crate::channel::{exact_correlation, PathCluster, RichScattering};
use crate::rng::{self, complex_normal};
use crate::{linalg, C64, Error, Result};

/// RF chains per base station.
pub const RF_CHAINS: usize = 2;

/// Rectangular multi-floor building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Building {
    pub length_m: f64,
    pub width_m: f64,
    pub floor_height_m: f64,
    pub floors: usize,
}

impl Default for Building {
    fn default() -> Self {
        Self {
            length_m: 60.0,
            width_m: 20.0,
            floor_height_m: 3.5,
            floors: 2,
        }
    }
}

/// One small-cell base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseStation {
    /// Metres; `z` is measured from the floor of the lowest storey.
    pub position: [f64; 3],
    pub floor: usize,
    /// Boresight azimuth in the horizontal plane, degrees from `+x`.
    #[serde(default)]
    pub azimuth_deg: f64,
    /// Boresight angle below the horizon, degrees; 90 faces the floor.
    #[serde(default = "default_downtilt")]
    pub downtilt_deg: f64,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
}

fn default_downtilt() -> f64 {
    90.0
}

fn default_tx_power() -> f64 {
    23.0
}

impl BaseStation {
    /// Panel frame: boresight, row axis, column axis.
    fn frame(&self) -> [[f64; 3]; 3] {
        let (az, tilt) = (self.azimuth_deg.to_radians(), self.downtilt_deg.to_radians());
        let b = [tilt.cos() * az.cos(), tilt.cos() * az.sin(), -tilt.sin()];
        let r = [-az.sin(), az.cos(), 0.0];
        let c = [
            b[1] * r[2] - b[2] * r[1],
            b[2] * r[0] - b[0] * r[2],
            b[0] * r[1] - b[1] * r[0],
        ];
        [b, r, c]
    }

    /// Local `(azimuth, elevation)` in radians of the direction towards `p`.
    pub fn local_direction(&self, p: [f64; 3]) -> (f64, f64) {
        let d = [
            p[0] - self.position[0],
            p[1] - self.position[1],
            p[2] - self.position[2],
        ];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if n == 0.0 {
            return (0.0, 0.0);
        }
        let [b, r, c] = self.frame();
        let dot = |a: [f64; 3]| (a[0] * d[0] + a[1] * d[1] + a[2] * d[2]) / n;
        (dot(r).atan2(dot(b)), dot(c).clamp(-1.0, 1.0).asin())
    }
}

/// Base stations, building and antenna configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Deployment {
    pub building: Building,
    pub base_stations: Vec<BaseStation>,
    /// Per-chain subarray of the hybrid system.
    pub subarray: ArrayGeometry,
    pub hardware: RfHardwareModel,
    pub quantize: bool,
}

impl Default for Deployment {
    fn default() -> Self {
        let building = Building::default();
        let base_stations = (0..building.floors)
            .flat_map(|floor| {
                (0..5).map(move |i| BaseStation {
                    position: [
                        building.length_m * (2 * i + 1) as f64 / 10.0,
                        building.width_m / 2.0,
                        (floor + 1) as f64 * building.floor_height_m,
                    ],
                    floor,
                    azimuth_deg: 0.0,
                    downtilt_deg: default_downtilt(),
                    tx_power_dbm: default_tx_power(),
                })
            })
            .collect();
        Self {
            building,
            base_stations,
            subarray: ArrayGeometry {
                rows: 6,
                cols: 2,
                spacing_wavelengths: 0.5,
                pattern: ElementPattern::CosinePower {
                    exponent: 1.0,
                    front_to_back_db: 20.0,
                },
            },
            hardware: RfHardwareModel::default(),
            quantize: true,
        }
    }
}

impl Deployment {
    /// A single base station in the default building.
    pub fn single_cell() -> Self {
        let mut d = Self::default();
        d.base_stations.truncate(1);
        d
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.building;
        if !(b.length_m > 0.0 && b.width_m > 0.0 && b.floor_height_m > 0.0) || b.floors == 0 {
            return Err(Error::Config("building needs positive dimensions and at least one floor".into()));
        }
        if self.base_stations.is_empty() {
            return Err(Error::Config("deployment has no base stations".into()));
        }
        for (i, bs) in self.base_stations.iter().enumerate() {
            if bs.floor >= b.floors {
                return Err(Error::Config(format!(
                    "base station {i} on floor {} of a {}-floor building",
                    bs.floor, b.floors
                )));
            }
            if !bs.position.iter().all(|x| x.is_finite()) || !bs.tx_power_dbm.is_finite() {
                return Err(Error::Config(format!("base station {i} has non-finite parameters")));
            }
        }
        self.subarray.validate()?;
        self.hardware.validate()
    }

    /// Antenna of a conventional chain: one element with the subarray pattern.
    pub fn conventional_element(&self) -> ArrayGeometry {
        ArrayGeometry::single(self.subarray.pattern)
    }
}

/// Large-scale and small-scale propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationModel {
    pub pathloss_exponent: f64,
    pub reference_loss_db: f64,
    pub floor_penetration_db: f64,
    pub shadowing_sigma_db: f64,
    /// Cross-polar discrimination of the scattered paths.
    pub xpd_db: f64,
    /// Angular spread of the clusters around the direct direction.
    pub scattering: RichScattering,
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self {
            pathloss_exponent: 3.0,
            reference_loss_db: 38.0,
            floor_penetration_db: 18.0,
            shadowing_sigma_db: 4.0,
            xpd_db: 8.0,
            scattering: RichScattering::default(),
        }
    }
}

impl PropagationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent >= 0.0 && self.floor_penetration_db >= 0.0) {
            return Err(Error::Config("pathloss exponent and floor loss must be >= 0".into()));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err(Error::Config("shadowing sigma must be finite and >= 0".into()));
        }
        if self.scattering.clusters == 0 {
            return Err(Error::Config("scattering needs at least one cluster".into()));
        }
        Ok(())
    }

    /// Distance and floor-penetration loss in dB, without shadowing.
    pub fn pathloss_db(&self, distance_m: f64, floors_crossed: usize) -> f64 {
        self.reference_loss_db
            + 10.0 * self.pathloss_exponent * distance_m.max(1.0).log10()
            + self.floor_penetration_db * floors_crossed as f64
    }
}

/// Full system-level configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemScenario {
    pub id: String,
    pub deployment: Deployment,
    pub propagation: PropagationModel,
    pub users_per_floor: usize,
    pub ms_height_m: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub rate_cap_bps: f64,
    /// Rayleigh realizations averaged into each ergodic rate.
    pub fading_samples: usize,
}

impl Default for SystemScenario {
    fn default() -> Self {
        Self {
            id: "default".into(),
            deployment: Deployment::default(),
            propagation: PropagationModel::default(),
            users_per_floor: 50,
            ms_height_m: 1.5,
            noise_figure_db: 9.0,
            bandwidth_hz: 20e6,
            rate_cap_bps: 200e6,
            fading_samples: 4,
        }
    }
}

impl SystemScenario {
    pub fn validate(&self) -> Result<()> {
        self.deployment.validate()?;
        self.propagation.validate()?;
        if self.users_per_floor == 0 {
            return Err(Error::Config("users_per_floor must be at least 1".into()));
        }
        if !(self.ms_height_m >= 0.0 && self.ms_height_m <= self.deployment.building.floor_height_m) {
            return Err(Error::Config("ms_height_m must lie within one storey".into()));
        }
        if !(self.bandwidth_hz > 0.0 && self.rate_cap_bps > 0.0) {
            return Err(Error::Config("bandwidth and rate cap must be positive".into()));
        }
        if self.fading_samples == 0 {
            return Err(Error::Config("fading_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Thermal noise plus noise figure over the bandwidth, in mW.
    pub fn noise_power_mw(&self) -> f64 {
        let dbm = -174.0 + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db;
        10f64.powf(dbm / 10.0)
    }
}

/// A dropped mobile station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MobileStation {
    pub id: usize,
    pub position: [f64; 3],
    pub floor: usize,
}

/// Uniform positions over the building: floor uniform, `x`/`y` uniform over
/// the footprint, height `ms_height_m` above the floor.
pub fn drop_users<R: Rng + ?Sized>(
    building: &Building,
    ms_height_m: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<MobileStation>> {
    if count == 0 {
        return Err(Error::Parameter("need at least one mobile".into()));
    }
    Ok((0..count)
        .map(|id| {
            let floor = rng.random_range(0..building.floors);
            let x = rng.random::<f64>() * building.length_m;
            let y = rng.random::<f64>() * building.width_m;
            MobileStation {
                id,
                position: [x, y, floor as f64 * building.floor_height_m + ms_height_m],
                floor,
            }
        })
        .collect())
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Long-term received power in dBm from base station `bs` at mobile `ms`:
/// transmit power, path loss, shadowing and the element gain towards the
/// mobile. Beamforming is excluded.
pub fn long_term_power_dbm(
    bs: &BaseStation,
    ms: &MobileStation,
    pattern: &ElementPattern,
    propagation: &PropagationModel,
    shadowing_db: f64,
) -> f64 {
    let (az, el) = bs.local_direction(ms.position);
    bs.tx_power_dbm - propagation.pathloss_db(distance(bs.position, ms.position), bs.floor.abs_diff(ms.floor))
        - shadowing_db
        + 10.0 * pattern.power_gain(az, el).log10()
}

/// Index of the base station with the strongest long-term power; ties go to
/// the lowest index. `shadowing_db[b]` belongs to base station `b`.
pub fn associate(
    ms: &MobileStation,
    deployment: &Deployment,
    propagation: &PropagationModel,
    shadowing_db: &[f64],
) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (b, bs) in deployment.base_stations.iter().enumerate() {
        let p = long_term_power_dbm(bs, ms, &deployment.subarray.pattern, propagation, shadowing_db[b]);
        if p > best.1 {
            best = (b, p);
        }
    }
    best.0
}

/// The four evaluated system variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemTag {
    Conventional,
    Hybrid,
    ConventionalNoIci,
    HybridNoIci,
}

impl SystemTag {
    pub const ALL: [SystemTag; 4] = [
        SystemTag::Conventional,
        SystemTag::Hybrid,
        SystemTag::ConventionalNoIci,
        SystemTag::HybridNoIci,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemTag::Conventional => "conventional",
            SystemTag::Hybrid => "hybrid",
            SystemTag::ConventionalNoIci => "conventional_no_ici",
            SystemTag::HybridNoIci => "hybrid_no_ici",
        }
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, SystemTag::Hybrid | SystemTag::HybridNoIci)
    }

    pub fn with_ici(self) -> bool {
        matches!(self, SystemTag::Conventional | SystemTag::Hybrid)
    }
}

/// 2×2 complex matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

fn zero2() -> Mat2 {
    [[C64::new(0.0, 0.0); 2]; 2]
}

fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = zero2();
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn adjoint2(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn det2(a: &Mat2) -> C64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Small-scale state of one base-station-to-mobile link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    pub clusters: Vec<PathCluster>,
    /// Large-scale power gain (linear, includes shadowing).
    pub gain: f64,
    /// Per fading sample, per cluster polarization matrix.
    pub polarization: Vec<Vec<Mat2>>,
}

impl LinkChannel {
    /// Draws clusters around the direct direction and `samples` Rayleigh
    /// polarization realizations.
    pub fn draw<R: Rng + ?Sized>(
        bs: &BaseStation,
        ms: &MobileStation,
        propagation: &PropagationModel,
        shadowing_db: f64,
        samples: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let (az, el) = bs.local_direction(ms.position);
        let scattering = RichScattering {
            mean_azimuth_deg: az.to_degrees(),
            mean_elevation_deg: el.to_degrees(),
            ..propagation.scattering
        };
        let clusters = scattering.draw(rng)?;
        let loss = propagation.pathloss_db(distance(bs.position, ms.position), bs.floor.abs_diff(ms.floor))
            + shadowing_db;
        let kappa = 10f64.powf(-propagation.xpd_db / 10.0);
        let (co, cross) = ((1.0 / (1.0 + kappa)).sqrt(), (kappa / (1.0 + kappa)).sqrt());
        let polarization = (0..samples)
            .map(|_| {
                clusters
                    .iter()
                    .map(|_| {
                        let mut x = zero2();
                        for (r, row) in x.iter_mut().enumerate() {
                            for (m, v) in row.iter_mut().enumerate() {
                                *v = complex_normal(rng) * if r == m { co } else { cross };
                            }
                        }
                        x
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            clusters,
            gain: 10f64.powf(-loss / 10.0),
            polarization,
        })
    }

    /// `E[h h^H]` of one chain's transmit array, normalized to unit cluster
    /// power.
    pub fn correlation(&self, geometry: &ArrayGeometry) -> crate::channel::CorrelationMatrix {
        exact_correlation(&self.clusters, geometry)
    }

    /// Effective 2×2 channel of fading sample `sample` with per-chain weight
    /// `w` on `geometry`.
    pub fn effective(&self, geometry: &ArrayGeometry, w: &[C64], sample: usize) -> Mat2 {
        let sqrt_g = self.gain.sqrt();
        let mut h = zero2();
        for (c, x) in self.clusters.iter().zip(&self.polarization[sample]) {
            let v = array_response(geometry, c.azimuth, c.elevation);
            let b = linalg::inner(w, &v) * (c.power_fraction.sqrt() * sqrt_g);
            for r in 0..2 {
                for m in 0..2 {
                    h[r][m] += x[r][m] * b;
                }
            }
        }
        h
    }
}

/// Saturated analog weight of a link: the dominant eigenvector of the link
/// correlation, optionally quantized.
pub fn saturated_weight(link: &LinkChannel, deployment: &Deployment) -> Vec<C64> {
    let oracle = eigen_oracle(&link.correlation(&deployment.subarray));
    if deployment.quantize {
        quantize_weight(&oracle.vector, &deployment.hardware).coefficients
    } else {
        oracle.vector
    }
}

/// Effective 2×2 downlink channel of `link` for the given system. Both chains
/// use `weight`; the conventional system ignores it.
pub fn beamform_downlink(link: &LinkChannel, deployment: &Deployment, tag: SystemTag, weight: &[C64], sample: usize) -> Mat2 {
    if tag.is_hybrid() {
        link.effective(&deployment.subarray, weight, sample)
    } else {
        link.effective(&deployment.conventional_element(), &[C64::new(1.0, 0.0)], sample)
    }
}

/// Rate of one 2×2 single-user link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    pub rate_bps: f64,
    /// Per-stream SINR in dB, strongest first.
    pub sinr_db: [f64; 2],
    /// Set when the interference-plus-noise covariance had to be regularized.
    pub regularized: bool,
}

/// Floor added to a singular interference-plus-noise covariance, mW.
pub const COVARIANCE_FLOOR_MW: f64 = 1e-30;

/// `min(cap, B·log2 det(I + (P/2)·H^H Q⁻¹ H))` with
/// `Q = σ²I + Σ_j (P_j/2)·G_j G_j^H` and equal power on both streams.
pub fn compute_rate(
    h: &Mat2,
    tx_power_mw: f64,
    interferers: &[(Mat2, f64)],
    noise_mw: f64,
    bandwidth_hz: f64,
    cap_bps: f64,
) -> RateResult {
    let mut q = zero2();
    q[0][0] = C64::new(noise_mw, 0.0);
    q[1][1] = C64::new(noise_mw, 0.0);
    for (g, p) in interferers {
        let gg = mul2(g, &adjoint2(g));
        for i in 0..2 {
            for j in 0..2 {
                q[i][j] += gg[i][j] * (p / 2.0);
            }
        }
    }
    let mut d = det2(&q).re;
    let scale = q[0][0].re.max(q[1][1].re);
    let mut regularized = false;
    if !(d > 1e-12 * scale * scale) || scale <= 0.0 {
        regularized = true;
        q[0][0] += COVARIANCE_FLOOR_MW;
        q[1][1] += COVARIANCE_FLOOR_MW;
        d = det2(&q).re;
    }
    let qinv: Mat2 = [
        [q[1][1] / d, -q[0][1] / d],
        [-q[1][0] / d, q[0][0] / d],
    ];
    let a = mul2(&adjoint2(h), &mul2(&qinv, h));
    let s = tx_power_mw / 2.0;
    let (tr, det) = ((a[0][0] + a[1][1]).re * s, det2(&a).re * s * s);
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l1 = (tr / 2.0 + disc).max(0.0);
    let l2 = (tr / 2.0 - disc).max(0.0);
    let rate = bandwidth_hz * ((1.0 + l1).log2() + (1.0 + l2).log2());
    let db = |x: f64| 10.0 * x.max(1e-30).log10();
    RateResult {
        rate_bps: if rate.is_nan() { cap_bps } else { rate.clamp(0.0, cap_bps) },
        sinr_db: [db(l1), db(l2)],
        regularized,
    }
}

/// Ergodic rate of one scheduled mobile under one system variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    pub drop: usize,
    pub ms_id: usize,
    pub serving_cell: usize,
    pub system: SystemTag,
    /// Mean per-stream SINR over the fading samples, dB.
    pub sinr_db: [f64; 2],
    pub rate_bps: f64,
    pub regularized: bool,
}

/// Scheduled mobiles of one drop and their rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub samples: Vec<RateSample>,
    /// Cells without any associated mobile.
    pub idle_cells: usize,
}

/// Evaluates drop `drop` of a run seeded with `seed`.
pub fn evaluate_drop(scenario: &SystemScenario, seed: u64, drop: usize) -> Result<DropOutcome> {
    let dep = &scenario.deployment;
    let prop = &scenario.propagation;
    let n_bs = dep.base_stations.len();
    let mut g = rng::stream(seed, "drop", drop as u64);
    let count = scenario.users_per_floor * dep.building.floors;
    let users = drop_users(&dep.building, scenario.ms_height_m, count, &mut g)?;
    let shadow = Normal::new(0.0, prop.shadowing_sigma_db).map_err(|e| Error::Config(e.to_string()))?;
    let shadowing: Vec<Vec<f64>> = users
        .iter()
        .map(|_| (0..n_bs).map(|_| shadow.sample(&mut g)).collect())
        .collect();
    let serving: Vec<usize> = users
        .iter()
        .zip(&shadowing)
        .map(|(u, s)| associate(u, dep, prop, s))
        .collect();

    let mut scheduled: Vec<Option<usize>> = vec![None; n_bs];
    for (b, slot) in scheduled.iter_mut().enumerate() {
        let mine: Vec<usize> = (0..users.len()).filter(|&u| serving[u] == b).collect();
        if !mine.is_empty() {
            *slot = Some(mine[g.random_range(0..mine.len())]);
        }
    }
    let idle_cells = scheduled.iter().filter(|s| s.is_none()).count();

    // links[b][u'] for every active cell b and every scheduled mobile u'.
    let active: Vec<(usize, usize)> = scheduled
        .iter()
        .enumerate()
        .filter_map(|(b, s)| s.map(|u| (b, u)))
        .collect();
    let mut links = vec![Vec::with_capacity(active.len()); n_bs];
    for &(b, _) in &active {
        for &(_, u) in &active {
            links[b].push(LinkChannel::draw(
                &dep.base_stations[b],
                &users[u],
                prop,
                shadowing[u][b],
                scenario.fading_samples,
                &mut g,
            )?);
        }
    }
    let weights: Vec<Vec<C64>> = (0..n_bs)
        .map(|b| match active.iter().position(|a| a.0 == b) {
            Some(i) => saturated_weight(&links[b][i], dep),
            None => Vec::new(),
        })
        .collect();

    let noise = scenario.noise_power_mw();
    let power = |b: usize| 10f64.powf(dep.base_stations[b].tx_power_dbm / 10.0);
    let mut samples = Vec::with_capacity(active.len() * 4);
    for (i, &(b, u)) in active.iter().enumerate() {
        for tag in SystemTag::ALL {
            let mut rate = 0.0;
            let mut sinr = [0.0; 2];
            let mut regularized = false;
            for f in 0..scenario.fading_samples {
                let h = beamform_downlink(&links[b][i], dep, tag, &weights[b], f);
                let interferers: Vec<(Mat2, f64)> = if tag.with_ici() {
                    active
                        .iter()
                        .filter(|a| a.0 != b)
                        .map(|&(j, _)| (beamform_downlink(&links[j][i], dep, tag, &weights[j], f), power(j)))
                        .collect()
                } else {
                    Vec::new()
                };
                let r = compute_rate(&h, power(b), &interferers, noise, scenario.bandwidth_hz, scenario.rate_cap_bps);
                rate += r.rate_bps;
                for (s, db) in sinr.iter_mut().zip(r.sinr_db) {
                    *s += 10f64.powf(db / 10.0);
                }
                regularized |= r.regularized;
            }
            let n = scenario.fading_samples as f64;
            samples.push(RateSample {
                drop,
                ms_id: users[u].id,
                serving_cell: b,
                system: tag,
                sinr_db: sinr.map(|s| 10.0 * (s / n).max(1e-30).log10()),
                rate_bps: rate / n,
                regularized,
            });
        }
    }
    Ok(DropOutcome { samples, idle_cells })
}

/// Rate statistics of one system variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantStats {
    pub system: SystemTag,
    pub samples: usize,
    pub mean_bps: f64,
    pub p5_bps: f64,
    pub p50_bps: f64,
    pub p95_bps: f64,
    /// Empirical CDF evaluated on [`CDF_POINTS`] rates from 0 to the cap.
    pub cdf: Vec<(f64, f64)>,
}

/// Rate grid points of the reported CDFs.
pub const CDF_POINTS: usize = 201;

/// Empirical CDF `P(rate ≤ x)` at `points` rates evenly spaced on `[0, cap]`.
pub fn empirical_cdf(sorted: &[f64], cap: f64, points: usize) -> Vec<(f64, f64)> {
    let n = sorted.len().max(1) as f64;
    (0..points)
        .map(|i| {
            let x = cap * i as f64 / (points - 1).max(1) as f64;
            let k = sorted.partition_point(|v| *v <= x);
            (x, k as f64 / n)
        })
        .collect()
}

/// Nearest-rank percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl VariantStats {
    fn from_rates(system: SystemTag, mut rates: Vec<f64>, cap: f64) -> Self {
        let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
        rates.sort_by(f64::total_cmp);
        Self {
            system,
            samples: rates.len(),
            mean_bps: mean,
            p5_bps: percentile(&rates, 5.0),
            p50_bps: percentile(&rates, 50.0),
            p95_bps: percentile(&rates, 95.0),
            cdf: empirical_cdf(&rates, cap, CDF_POINTS),
        }
    }
}

/// Outcome of [`run_system_eval`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemEval {
    pub drops: usize,
    pub idle_cells: usize,
    pub regularized: usize,
    /// In [`SystemTag::ALL`] order.
    pub variants: Vec<VariantStats>,
    pub samples: Vec<RateSample>,
}

impl SystemEval {
    pub fn variant(&self, tag: SystemTag) -> &VariantStats {
        self.variants
            .iter()
            .find(|v| v.system == tag)
            .expect("every variant is evaluated")
    }

    /// Rates of one variant in drop order.
    pub fn rates(&self, tag: SystemTag) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.system == tag)
            .map(|s| s.rate_bps)
            .collect()
    }
}

/// Evaluates `drops` independent drops in parallel on the current rayon pool.
/// Results do not depend on the number of workers.
pub fn run_system_eval(scenario: &SystemScenario, drops: usize, seed: u64) -> Result<SystemEval> {
    scenario.validate()?;
    if drops == 0 {
        return Err(Error::Parameter("need at least one drop".into()));
    }
    let outcomes: Vec<DropOutcome> = (0..drops)
        .into_par_iter()
        .map(|d| evaluate_drop(scenario, seed, d))
        .collect::<Result<_>>()?;
    let idle_cells = outcomes.iter().map(|o| o.idle_cells).sum();
    let samples: Vec<RateSample> = outcomes.into_iter().flat_map(|o| o.samples).collect();
    let regularized = samples.iter().filter(|s| s.regularized).count();
    let variants = SystemTag::ALL
        .iter()
        .map(|&tag| {
            let rates = samples.iter().filter(|s| s.system == tag).map(|s| s.rate_bps).collect();
            VariantStats::from_rates(tag, rates, scenario.rate_cap_bps)
        })
        .collect();
    Ok(SystemEval {
        drops,
        idle_cells,
        regularized,
        variants,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BW: f64 = 20e6;
    const CAP: f64 = 200e6;

    fn eye(s: f64) -> Mat2 {
        [[C64::new(s, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(s, 0.0)]]
    }

    fn ms_at(position: [f64; 3], floor: usize) -> MobileStation {
        MobileStation { id: 0, position, floor }
    }

    #[test]
    fn drops_stay_inside_the_box() {
        let unit = Building { length_m: 1.0, width_m: 1.0, floor_height_m: 1.0, floors: 1 };
        let mut g = rng::stream(1, "t", 0);
        let u = drop_users(&unit, 0.5, 1, &mut g).unwrap();
        let p = u[0].position;
        assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        assert_eq!(p[2], 0.5);
        assert!(drop_users(&unit, 0.5, 0, &mut g).is_err());
    }

    #[test]
    fn floors_are_equally_likely() {
        let b = Building { floors: 4, ..Building::default() };
        let n = 100_000;
        let u = drop_users(&b, 1.5, n, &mut rng::stream(2, "t", 0)).unwrap();
        for f in 0..4 {
            let c = u.iter().filter(|m| m.floor == f).count() as f64;
            assert!((c / (n as f64 / 4.0) - 1.0).abs() < 0.02, "floor {f}: {c}");
        }
        let again = drop_users(&b, 1.5, n, &mut rng::stream(2, "t", 0)).unwrap();
        assert_eq!(u, again);
    }

    #[test]
    fn colocated_mobile_picks_that_station() {
        let d = Deployment::default();
        let p = PropagationModel::default();
        let bs = d.base_stations[3];
        let ms = ms_at([bs.position[0], bs.position[1], bs.position[2] - 2.0], bs.floor);
        assert_eq!(associate(&ms, &d, &p, &[0.0; 10]), 3);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut d = Deployment::single_cell();
        let mut twin = d.base_stations[0];
        twin.position[0] += 10.0;
        d.base_stations.push(twin);
        let mid = d.base_stations[0].position[0] + 5.0;
        let ms = ms_at([mid, d.base_stations[0].position[1], 1.5], 0);
        let p = PropagationModel::default();
        assert_eq!(associate(&ms, &d, &p, &[0.0, 0.0]), 0);
    }

    #[test]
    fn association_matches_exhaustive_scan() {
        let d = Deployment::default();
        let p = PropagationModel::default();
        let mut g = rng::stream(3, "t", 0);
        let users = drop_users(&d.building, 1.5, 500, &mut g).unwrap();
        for u in &users {
            let s: Vec<f64> = (0..10).map(|_| g.random_range(-8.0..8.0)).collect();
            let powers: Vec<f64> = d
                .base_stations
                .iter()
                .zip(&s)
                .map(|(b, sh)| {
                    let dist = distance(b.position, u.position).max(1.0);
                    let (az, el) = b.local_direction(u.position);
                    b.tx_power_dbm - 38.0 - 30.0 * dist.log10() - 18.0 * b.floor.abs_diff(u.floor) as f64 - sh
                        + 10.0 * d.subarray.pattern.power_gain(az, el).log10()
                })
                .collect();
            let max = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let expect = powers.iter().position(|p| *p == max).unwrap();
            assert_eq!(associate(u, &d, &p, &s), expect);
        }
    }

    #[test]
    fn ceiling_panel_sees_the_floor_below_at_boresight() {
        let bs = Deployment::default().base_stations[0];
        let below = [bs.position[0], bs.position[1], bs.position[2] - 2.0];
        let (az, el) = bs.local_direction(below);
        assert!(az.abs() < 1e-12 && el.abs() < 1e-12);
        // Moving along +y moves along the row axis.
        let (az, el) = bs.local_direction([below[0], below[1] + 2.0, below[2]]);
        assert!((az - std::f64::consts::FRAC_PI_4).abs() < 1e-12 && el.abs() < 1e-12);
    }

    fn single_path_link() -> LinkChannel {
        let mut x = zero2();
        x[0][0] = C64::new(1.0, 0.0);
        x[1][1] = C64::new(1.0, 0.0);
        LinkChannel {
            clusters: vec![PathCluster::new(0.3, -0.2, 1.0)],
            gain: 1.0,
            polarization: vec![vec![x]],
        }
    }

    #[test]
    fn single_path_hybrid_gain_is_n() {
        let dep = Deployment { quantize: false, ..Deployment::default() };
        let link = single_path_link();
        let w = saturated_weight(&link, &dep);
        let hyb = beamform_downlink(&link, &dep, SystemTag::Hybrid, &w, 0);
        let conv = beamform_downlink(&link, &dep, SystemTag::Conventional, &w, 0);
        let gain = hyb[0][0].norm_sqr() / conv[0][0].norm_sqr();
        assert!((gain - 12.0).abs() < 1e-9, "{gain}");
        assert_eq!(conv[0][1].norm(), 0.0);

        let q = Deployment { quantize: true, ..dep.clone() };
        let wq = saturated_weight(&link, &q);
        let gq = beamform_downlink(&link, &q, SystemTag::Hybrid, &wq, 0)[0][0].norm_sqr();
        let loss_db = 10.0 * (hyb[0][0].norm_sqr() / gq).log10();
        assert!((0.0..=0.5).contains(&loss_db), "{loss_db}");
    }

    #[test]
    fn eigen_gain_dominates_every_element() {
        let dep = Deployment { quantize: false, ..Deployment::default() };
        let p = PropagationModel::default();
        let mut g = rng::stream(4, "t", 0);
        let users = drop_users(&dep.building, 1.5, 50, &mut g).unwrap();
        for u in &users {
            let link = LinkChannel::draw(&dep.base_stations[0], u, &p, 0.0, 1, &mut g).unwrap();
            let r = link.correlation(&dep.subarray);
            let lambda = eigen_oracle(&r).value;
            let element = link.correlation(&dep.conventional_element()).get(0, 0).re;
            assert!(lambda >= element * (1.0 - 1e-9));
        }
    }

    #[test]
    fn rate_saturates_at_cap() {
        let r = compute_rate(&eye(1.0), 1e12, &[], 1e-3, BW, CAP);
        assert_eq!(r.rate_bps, CAP);
        assert!(!r.regularized);
    }

    #[test]
    fn identity_channel_closed_form() {
        for rho in [0.1, 1.0, 10.0, 100.0] {
            let r = compute_rate(&eye(1.0), rho, &[], 1.0, BW, f64::INFINITY);
            let expect = 2.0 * BW * (1.0 + rho / 2.0).log2();
            assert!((r.rate_bps - expect).abs() < 1e-6 * expect, "{rho}");
            assert!((r.sinr_db[0] - 10.0 * (rho / 2.0).log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_channel_gives_zero_rate() {
        let r = compute_rate(&zero2(), 100.0, &[], 1e-9, BW, CAP);
        assert_eq!(r.rate_bps, 0.0);
    }

    #[test]
    fn singular_covariance_is_regularized() {
        let r = compute_rate(&eye(1.0), 1.0, &[], 0.0, BW, CAP);
        assert!(r.regularized);
        assert_eq!(r.rate_bps, CAP);
    }

    #[test]
    fn removing_an_interferer_never_hurts() {
        let mut g = rng::stream(5, "t", 0);
        let rand_mat = |g: &mut rng::SimRng| -> Mat2 {
            let mut m = zero2();
            m.iter_mut().flatten().for_each(|v| *v = complex_normal(g));
            m
        };
        for _ in 0..500 {
            let h = rand_mat(&mut g);
            let i: Vec<(Mat2, f64)> = (0..3).map(|_| (rand_mat(&mut g), g.random_range(0.0..2.0))).collect();
            let full = compute_rate(&h, 1.0, &i, 0.1, BW, f64::INFINITY).rate_bps;
            for k in 0..3 {
                let mut fewer = i.clone();
                fewer.remove(k);
                let r = compute_rate(&h, 1.0, &fewer, 0.1, BW, f64::INFINITY).rate_bps;
                assert!(r >= full * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn percentile_and_cdf() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 50.0), 2.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        let c = empirical_cdf(&v, 4.0, 5);
        assert_eq!(c, vec![(0.0, 0.0), (1.0, 0.25), (2.0, 0.5), (3.0, 0.75), (4.0, 1.0)]);
    }

    #[test]
    fn isolated_cell_has_no_ici() {
        let s = SystemScenario {
            deployment: Deployment::single_cell(),
            users_per_floor: 5,
            ..SystemScenario::default()
        };
        let e = run_system_eval(&s, 20, 9).unwrap();
        assert_eq!(e.rates(SystemTag::Hybrid), e.rates(SystemTag::HybridNoIci));
        assert_eq!(e.rates(SystemTag::Conventional), e.rates(SystemTag::ConventionalNoIci));
    }

    #[test]
    fn small_default_run_properties() {
        let s = SystemScenario::default();
        let e = run_system_eval(&s, 40, 11).unwrap();
        let h = e.variant(SystemTag::Hybrid).mean_bps;
        let c = e.variant(SystemTag::Conventional).mean_bps;
        assert!(h > c, "{h} vs {c}");
        for v in &e.variants {
            assert!(v.cdf.windows(2).all(|w| w[0].1 <= w[1].1));
            assert_eq!(v.cdf.last().unwrap().1, 1.0);
        }
        for tag in [SystemTag::Hybrid, SystemTag::Conventional] {
            let no = if tag.is_hybrid() { SystemTag::HybridNoIci } else { SystemTag::ConventionalNoIci };
            for (a, b) in e.rates(tag).iter().zip(e.rates(no)) {
                assert!(*a <= b * (1.0 + 1e-12));
            }
        }
        assert!(e.samples.iter().all(|s| (0.0..=CAP).contains(&s.rate_bps)));
    }

    #[test]
    fn deterministic_across_runs() {
        let s = SystemScenario::default();
        let a = run_system_eval(&s, 5, 3).unwrap();
        let b = run_system_eval(&s, 5, 3).unwrap();
        assert_eq!(a, b);
    }
}

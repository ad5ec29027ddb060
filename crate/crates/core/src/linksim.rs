//! Link-level orchestration.
//!
//! Each subframe the channel is evolved, the currently active quantized beam
//! weight is applied, the received subframe is synthesized in the time domain
//! with AWGN, and the receiver runs synchronization, channel estimation, SNR
//! measurement and zero-forcing decoding. The mean RS power of every subframe
//! feeds the beam tracker.
//!
//! The radio unit applies new weights only on update-period boundaries. The
//! period starting at boundary `b_k` applies one probe of the current pair;
//! its observations are the subframes `[b_k, b_{k+1} − L)` with `L` the
//! control latency, and the weight computed from them takes effect at
//! `b_{k+1}`. Probes alternate `w₊`, `w₋`; the tracker updates after every
//! `w₋` period. The first subframes of every period are abandoned for
//! decoding but still measured.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::array_rf::{quantize_weight, ArrayGeometry, ElementPattern, RfHardwareModel};
use crate::beamtrack::{eigen_oracle, optimality_gap, PowerObservation, ProbePair, TrackerConfig, TrackerState};
use crate::channel::{
    evolve_trajectory, exact_correlation, validate_clusters, CorrelationMatrix, FadingModel,
    FadingProcess, PathCluster, RichScattering, SpatialChannel, TrajectorySpec,
};
use crate::phy::{
    build_grid, design_lpf, equalize_zf, estimate_channel, measure_snr, FilterSpec, Modulation,
    Numerology, OfdmModem, PssReplica, ResourceGrid, SubframeLayout, Synchronizer, DEFAULT_PEAK_RATIO,
};
use crate::rng::{self, complex_normal, StreamChecksum};
use crate::{C64, Error, Result};

/// Radio-unit control latency and update cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyModel {
    pub tcpip_ms: f64,
    pub control_program_ms: f64,
    pub ru_apply_ms: f64,
    /// Update period in half-frames; `0` updates every subframe.
    pub update_period_half_frames: usize,
    pub abandoned_half_frames: usize,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            tcpip_ms: 2.0,
            control_program_ms: 4.0,
            ru_apply_ms: 1.0,
            update_period_half_frames: 3,
            abandoned_half_frames: 2,
        }
    }
}

impl LatencyModel {
    /// Zero latency, a new weight every subframe, nothing abandoned.
    pub fn ideal() -> Self {
        Self {
            tcpip_ms: 0.0,
            control_program_ms: 0.0,
            ru_apply_ms: 0.0,
            update_period_half_frames: 0,
            abandoned_half_frames: 0,
        }
    }

    pub fn total_delay_ms(&self) -> f64 {
        self.tcpip_ms + self.control_program_ms + self.ru_apply_ms
    }

    pub fn period_subframes(&self, num: &Numerology) -> usize {
        (self.update_period_half_frames * num.subframes_per_half_frame()).max(1)
    }

    pub fn latency_subframes(&self, num: &Numerology) -> usize {
        let sf_ms = num.subframe_duration_s() * 1e3;
        (self.total_delay_ms() / sf_ms - 1e-9).ceil().max(0.0) as usize
    }

    pub fn abandoned_subframes(&self, num: &Numerology) -> usize {
        self.abandoned_half_frames * num.subframes_per_half_frame()
    }

    pub fn validate(&self, num: &Numerology) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("latency: {m}")));
        for (name, v) in [
            ("tcpip_ms", self.tcpip_ms),
            ("control_program_ms", self.control_program_ms),
            ("ru_apply_ms", self.ru_apply_ms),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0"));
            }
        }
        let half_frame_ms = num.slot_duration_s() * 1e3 * 10.0;
        let needed = (self.total_delay_ms() / half_frame_ms - 1e-9).ceil().max(0.0) as usize;
        if self.update_period_half_frames < needed {
            return bad(format!(
                "update period of {} half-frames is shorter than the {} ms control delay",
                self.update_period_half_frames,
                self.total_delay_ms()
            ));
        }
        let period = self.period_subframes(num);
        if self.latency_subframes(num) >= period {
            return bad("no observation window left between updates".into());
        }
        if self.abandoned_subframes(num) > period {
            return bad("more abandoned subframes than the update period holds".into());
        }
        Ok(())
    }
}

/// Where the clusters of a link come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Static { clusters: Vec<PathCluster> },
    /// One cluster set drawn per trial seed.
    RichScattering(RichScattering),
    Trajectory(TrajectorySpec),
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec::RichScattering(RichScattering::default())
    }
}

/// Everything a link trial needs besides the seed and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkScenario {
    pub id: String,
    pub numerology: Numerology,
    /// Hybrid subarray; the baseline receiver is one element with the same
    /// pattern.
    pub geometry: ArrayGeometry,
    pub hardware: RfHardwareModel,
    /// Apply the phase-shifter/attenuator quantizer to every weight.
    pub quantize: bool,
    pub modulation: Modulation,
    pub channel: ChannelSpec,
    pub fading: FadingModel,
    /// SNR per resource element of a unit-power isotropic element; sets the
    /// receiver noise power. `inf` disables noise.
    pub element_snr_db: f64,
    pub tracker: TrackerConfig,
    pub latency: LatencyModel,
    /// Fraction of the trial, counted from the end, used for mean SNRs.
    pub averaging_fraction: f64,
    /// Trajectory tests count subframes whose gap is below this.
    pub tracking_threshold_db: f64,
    /// Subframes excluded from trajectory statistics at the start.
    pub transient_subframes: usize,
}

impl Default for LinkScenario {
    fn default() -> Self {
        Self {
            id: "default".into(),
            numerology: Numerology::default(),
            geometry: ArrayGeometry {
                rows: 3,
                cols: 2,
                spacing_wavelengths: 0.6,
                pattern: ElementPattern::CosinePower {
                    exponent: 1.0,
                    front_to_back_db: 20.0,
                },
            },
            hardware: RfHardwareModel::default(),
            quantize: true,
            modulation: Modulation::Qam16,
            channel: ChannelSpec::default(),
            fading: FadingModel::default(),
            element_snr_db: 10.0,
            tracker: TrackerConfig::default(),
            latency: LatencyModel::default(),
            averaging_fraction: 0.5,
            tracking_threshold_db: 3.0,
            transient_subframes: 0,
        }
    }
}

impl LinkScenario {
    pub fn validate(&self) -> Result<()> {
        self.numerology.validate()?;
        self.geometry.validate()?;
        self.hardware.validate()?;
        self.fading.validate()?;
        self.tracker.validate()?;
        self.latency.validate(&self.numerology)?;
        let cp = self.numerology.cp_duration_s();
        match &self.channel {
            ChannelSpec::Static { clusters } => validate_clusters(clusters, cp)?,
            ChannelSpec::RichScattering(r) => {
                if r.clusters == 0 {
                    return Err(Error::Config("rich scattering needs at least one cluster".into()));
                }
            }
            ChannelSpec::Trajectory(t) => {
                t.validate()?;
                validate_clusters(&t.start, cp)?;
                validate_clusters(&t.end, cp)?;
            }
        }
        if !(self.averaging_fraction > 0.0 && self.averaging_fraction <= 1.0) {
            return Err(Error::Config("averaging_fraction must lie in (0, 1]".into()));
        }
        if self.element_snr_db.is_nan() {
            return Err(Error::Config("element_snr_db is NaN".into()));
        }
        Ok(())
    }

    pub fn noise_power(&self) -> f64 {
        10f64.powf(-self.element_snr_db / 10.0)
    }

    fn cluster_source(&self, seed: u64) -> Result<ClusterSource> {
        Ok(match &self.channel {
            ChannelSpec::Static { clusters } => ClusterSource::Fixed(clusters.clone()),
            ChannelSpec::RichScattering(r) => {
                ClusterSource::Fixed(r.draw(&mut rng::stream(seed, "clusters", 0))?)
            }
            ChannelSpec::Trajectory(t) => ClusterSource::Moving(t.clone()),
        })
    }
}

enum ClusterSource {
    Fixed(Vec<PathCluster>),
    Moving(TrajectorySpec),
}

impl ClusterSource {
    fn at(&self, subframe: usize) -> Result<Vec<PathCluster>> {
        match self {
            ClusterSource::Fixed(c) => Ok(c.clone()),
            ClusterSource::Moving(t) => evolve_trajectory(t, subframe),
        }
    }

    fn count(&self) -> usize {
        match self {
            ClusterSource::Fixed(c) => c.len(),
            ClusterSource::Moving(t) => t.start.len(),
        }
    }

    fn is_static(&self) -> bool {
        matches!(self, ClusterSource::Fixed(_))
    }
}

/// One subframe of a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub subframe: usize,
    pub weight_id: u64,
    /// Measured SNR; `None` when synchronization failed.
    pub snr_db: Option<f64>,
    /// `λ_max / σ²` of the current channel statistics.
    pub oracle_db: f64,
    pub gap_db: f64,
    /// Decode EVM; `None` in abandoned subframes or without sync.
    pub evm_db: Option<f64>,
    pub bit_errors: Option<usize>,
    pub sync_ok: bool,
    pub abandoned: bool,
    /// Mean RS power fed to the tracker.
    pub rs_power: f64,
}

/// A weight taking effect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightApplication {
    pub subframe: usize,
    pub weight_id: u64,
    /// Newest subframe whose observation influenced this weight.
    pub last_observation: Option<usize>,
    pub weight: Vec<C64>,
}

/// Complete, deterministic record of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub scenario_id: String,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub applications: Vec<WeightApplication>,
    pub period_subframes: usize,
    pub latency_subframes: usize,
    pub tracker_iterations: usize,
    pub final_weight: Vec<C64>,
    pub fading_checksum: u64,
    pub noise_checksum: u64,
}

impl TrialRecord {
    /// Checks that weights change only on period boundaries and that each
    /// was computed from observations at least the latency older.
    pub fn audit(&self) -> std::result::Result<(), String> {
        for a in &self.applications {
            if a.subframe % self.period_subframes != 0 {
                return Err(format!(
                    "weight {} applied at subframe {} off the {}-subframe cadence",
                    a.weight_id, a.subframe, self.period_subframes
                ));
            }
            if let Some(obs) = a.last_observation {
                // Observation of subframe `obs` ends at `obs + 1`.
                if obs + 1 + self.latency_subframes > a.subframe {
                    return Err(format!(
                        "weight {} applied at subframe {} uses the observation of subframe {obs}",
                        a.weight_id, a.subframe
                    ));
                }
            }
        }
        let mut current = None;
        let mut apps = self.applications.iter().peekable();
        for row in &self.rows {
            while apps.peek().is_some_and(|a| a.subframe <= row.subframe) {
                current = apps.next().map(|a| a.weight_id);
            }
            if current != Some(row.weight_id) {
                return Err(format!(
                    "subframe {} used weight {} but {current:?} was applied",
                    row.subframe, row.weight_id
                ));
            }
        }
        Ok(())
    }

    fn window(&self, fraction: f64) -> &[TraceRow] {
        let keep = ((self.rows.len() as f64 * fraction).ceil() as usize).min(self.rows.len());
        &self.rows[self.rows.len() - keep..]
    }

    /// Mean of the linear measured SNR over the last `fraction` of the
    /// trial, in dB.
    pub fn mean_snr_db(&self, fraction: f64) -> f64 {
        let v: Vec<f64> = self
            .window(fraction)
            .iter()
            .filter_map(|r| r.snr_db)
            .map(|s| 10f64.powf(s / 10.0))
            .collect();
        10.0 * (v.iter().sum::<f64>() / v.len() as f64).log10()
    }

    pub fn median_gap_db(&self, fraction: f64) -> f64 {
        let mut g: Vec<f64> = self.window(fraction).iter().map(|r| r.gap_db).collect();
        g.sort_by(f64::total_cmp);
        g[g.len() / 2]
    }
}

/// Samples by which the FFT window is placed ahead of the detected timing,
/// inside the cyclic prefix.
pub const TIMING_BACKOFF: i64 = 12;

/// Receiver chain of one antenna configuration.
struct Receiver {
    geometry: ArrayGeometry,
    sync: Synchronizer,
    timing: i64,
}

struct Context {
    modem: OfdmModem,
    layouts: Vec<SubframeLayout>,
    taps: Vec<f64>,
    replica: PssReplica,
    subcarriers: Vec<i32>,
}

impl Context {
    fn new(num: Numerology) -> Result<Self> {
        Ok(Self {
            modem: OfdmModem::new(num),
            layouts: (0..num.subframes_per_frame())
                .map(|sf| SubframeLayout::new(num, sf))
                .collect(),
            taps: design_lpf(&FilterSpec {
                sample_rate_hz: num.sample_rate_hz,
                ..FilterSpec::default()
            })?
            .taps,
            replica: PssReplica::new(num)?,
            subcarriers: num.active_subcarrier_indices(),
        })
    }

    fn receiver(&self, geometry: ArrayGeometry) -> Receiver {
        Receiver {
            geometry,
            sync: Synchronizer::new(self.replica.clone(), self.taps.clone(), DEFAULT_PEAK_RATIO),
            timing: 0,
        }
    }
}

struct Reception {
    snr_db: Option<f64>,
    evm_db: Option<f64>,
    bit_errors: Option<usize>,
    rs_power: Option<f64>,
    sync_ok: bool,
}

fn random_bits(n: usize, g: &mut impl RngCore) -> Vec<u8> {
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let word = g.next_u64();
        bits.extend((0..64).map(|i| ((word >> i) & 1) as u8).take(n - bits.len()));
    }
    bits
}

impl Receiver {
    #[allow(clippy::too_many_arguments)]
    fn receive(
        &mut self,
        ctx: &Context,
        layout: &SubframeLayout,
        tx: &ResourceGrid,
        bits: &[u8],
        channel: &SpatialChannel,
        weight: &[C64],
        noise: &[C64],
        modulation: Modulation,
        decode: bool,
    ) -> Reception {
        let mut grid = tx.clone();
        grid.apply_frequency_response(&channel.beamformed(weight));
        let mut samples = ctx.modem.modulate(&grid);
        for (s, n) in samples.iter_mut().zip(noise) {
            *s += n;
        }
        let mut sync_ok = true;
        if layout.pss_symbol().is_some() {
            match self.sync.synchronize(&samples) {
                Ok(r) => self.timing = r.offset - TIMING_BACKOFF,
                Err(_) => sync_ok = false,
            }
        }
        if !sync_ok {
            return Reception {
                snr_db: None,
                evm_db: None,
                bit_errors: None,
                rs_power: None,
                sync_ok,
            };
        }
        let aligned: Vec<C64> = if self.timing == 0 {
            samples
        } else {
            (0..samples.len() as i64)
                .map(|i| {
                    let j = i + self.timing;
                    if (0..samples.len() as i64).contains(&j) {
                        samples[j as usize]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect()
        };
        let rx = ctx.modem.demodulate(&aligned, layout.symbols());
        let est = estimate_channel(&rx, layout);
        let snr = measure_snr(&est);
        let (evm_db, bit_errors) = if decode {
            let eq = equalize_zf(&rx, &est, layout, modulation);
            (Some(eq.evm_db), Some(crate::phy::bit_errors(&eq.bits, bits)))
        } else {
            (None, None)
        };
        Reception {
            snr_db: Some(snr.snr_db),
            evm_db,
            bit_errors,
            rs_power: Some(est.rs_power()),
            sync_ok,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Plus,
    Minus,
}

/// Drives the tracker through the cadence model.
struct Controller {
    tracker: TrackerState,
    probe: ProbePair,
    side: Side,
    plus_obs: Option<PowerObservation>,
    window: Vec<(usize, f64)>,
    rng: rng::SimRng,
    hw: RfHardwareModel,
    quantize: bool,
    applied: Vec<C64>,
    applied_id: u64,
}

impl Controller {
    fn new(scenario: &LinkScenario, seed: u64) -> Result<Self> {
        let mut g = rng::stream(seed, "tracker", 0);
        let tracker = TrackerState::new(scenario.tracker, scenario.geometry.len(), &mut g)?;
        let probe = tracker.perturb(&mut g);
        let mut c = Self {
            tracker,
            probe,
            side: Side::Plus,
            plus_obs: None,
            window: Vec::new(),
            rng: g,
            hw: scenario.hardware,
            quantize: scenario.quantize,
            applied: Vec::new(),
            applied_id: 0,
        };
        c.applied = c.realize(c.probe.plus.as_slice());
        Ok(c)
    }

    fn realize(&self, w: &[C64]) -> Vec<C64> {
        if self.quantize {
            quantize_weight(w, &self.hw).coefficients
        } else {
            w.to_vec()
        }
    }

    fn observe(&mut self, subframe: usize, power: f64) {
        self.window.push((subframe, power));
    }

    /// Closes the current period and selects the next applied weight.
    fn boundary(&mut self) -> Option<usize> {
        if self.window.is_empty() {
            return None;
        }
        let last = self.window.last().map(|w| w.0);
        let first = self.window[0].0;
        let power = self.window.iter().map(|w| w.1).sum::<f64>() / self.window.len() as f64;
        self.window.clear();
        let obs = PowerObservation {
            weight: self.applied.clone(),
            power,
            subframe: first,
        };
        match self.side {
            Side::Plus => {
                self.plus_obs = Some(obs);
                self.side = Side::Minus;
                self.applied = self.realize(self.probe.minus.as_slice());
            }
            Side::Minus => {
                let plus = self.plus_obs.take().expect("plus observed before minus");
                let g = self.tracker.estimate_gradient(&plus, &obs, &self.probe);
                self.tracker.update_weight(&g);
                self.probe = self.tracker.perturb(&mut self.rng);
                self.side = Side::Plus;
                self.applied = self.realize(self.probe.plus.as_slice());
            }
        }
        self.applied_id += 1;
        last
    }
}

/// Channel, noise and data streams shared by every receiver of a trial.
struct Streams {
    source: ClusterSource,
    fading: FadingProcess,
    noise_rng: rng::SimRng,
    bits_rng: rng::SimRng,
    noise_power: f64,
    fading_sum: StreamChecksum,
    noise_sum: StreamChecksum,
    static_oracle: Option<(CorrelationMatrix, f64)>,
}

impl Streams {
    fn new(scenario: &LinkScenario, seed: u64) -> Result<Self> {
        let source = scenario.cluster_source(seed)?;
        let fading = FadingProcess::new(scenario.fading, source.count(), rng::derive_seed(seed, "fading", 0));
        let static_oracle = if source.is_static() {
            let r = exact_correlation(&source.at(0)?, &scenario.geometry);
            let lambda = eigen_oracle(&r).value;
            Some((r, lambda))
        } else {
            None
        };
        Ok(Self {
            source,
            fading,
            noise_rng: rng::stream(seed, "noise", 0),
            bits_rng: rng::stream(seed, "bits", 0),
            noise_power: scenario.noise_power(),
            fading_sum: StreamChecksum::default(),
            noise_sum: StreamChecksum::default(),
            static_oracle,
        })
    }

    fn noise(&mut self, len: usize) -> Vec<C64> {
        if self.noise_power <= 0.0 {
            return vec![C64::new(0.0, 0.0); len];
        }
        let s = self.noise_power.sqrt();
        let n: Vec<C64> = (0..len).map(|_| complex_normal(&mut self.noise_rng) * s).collect();
        self.noise_sum.absorb(&n);
        n
    }
}

fn oracle_db(lambda: f64, noise: f64) -> f64 {
    if noise > 0.0 {
        10.0 * (lambda / noise).log10()
    } else {
        f64::INFINITY
    }
}

/// Outcome of [`run_ab_comparison`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbSummary {
    pub hybrid_mean_snr_db: f64,
    pub baseline_mean_snr_db: f64,
    pub gain_db: f64,
    /// `10·log10(λ_max / R_baseline)` from the exact correlations.
    pub oracle_gain_db: f64,
    pub streams_match: bool,
    pub hybrid: TrialRecord,
    pub baseline: TrialRecord,
}

fn simulate(
    scenario: &LinkScenario,
    subframes: usize,
    seed: u64,
    with_baseline: bool,
) -> Result<(TrialRecord, Option<TrialRecord>)> {
    scenario.validate()?;
    if subframes == 0 {
        return Err(Error::Parameter("a trial needs at least one subframe".into()));
    }
    let num = scenario.numerology;
    let ctx = Context::new(num)?;
    let period = scenario.latency.period_subframes(&num);
    let latency = scenario.latency.latency_subframes(&num);
    let abandoned = scenario.latency.abandoned_subframes(&num);
    let baseline_geometry = ArrayGeometry::single(scenario.geometry.pattern);
    let baseline_weight = [C64::new(1.0, 0.0)];

    let mut streams = Streams::new(scenario, seed)?;
    let mut ctrl = Controller::new(scenario, seed)?;
    let mut hybrid = ctx.receiver(scenario.geometry);
    let mut baseline = with_baseline.then(|| ctx.receiver(baseline_geometry));

    let mut rows = Vec::with_capacity(subframes);
    let mut base_rows = Vec::new();
    let mut applications = vec![WeightApplication {
        subframe: 0,
        weight_id: 0,
        last_observation: None,
        weight: ctrl.applied.clone(),
    }];
    let samples = num.samples_per_subframe();
    let bps = scenario.modulation.bits_per_symbol();

    for t in 0..subframes {
        if t > 0 && t % period == 0 {
            if let Some(last) = ctrl.boundary() {
                applications.push(WeightApplication {
                    subframe: t,
                    weight_id: ctrl.applied_id,
                    last_observation: Some(last),
                    weight: ctrl.applied.clone(),
                });
            }
        }
        let clusters = streams.source.at(t)?;
        streams.fading.advance_to(t, &clusters);
        streams.fading_sum.absorb(streams.fading.coefficients());
        let (r, lambda) = match &streams.static_oracle {
            Some((r, l)) => (r.clone(), *l),
            None => {
                let r = exact_correlation(&clusters, &scenario.geometry);
                let l = eigen_oracle(&r).value;
                (r, l)
            }
        };
        let layout = &ctx.layouts[t % num.subframes_per_frame()];
        let bits = random_bits(layout.data_capacity() * bps, &mut streams.bits_rng);
        let tx = build_grid(layout, scenario.modulation, &bits)?;
        let noise = streams.noise(samples);
        let in_period = t % period;
        let decode = in_period >= abandoned;

        let chan = SpatialChannel::from_parts(
            &clusters,
            &hybrid.geometry,
            streams.fading.coefficients(),
            ctx.subcarriers.clone(),
            num.subcarrier_spacing_hz,
            t,
        );
        let applied = ctrl.applied.clone();
        let rec = hybrid.receive(
            &ctx,
            layout,
            &tx,
            &bits,
            &chan,
            &applied,
            &noise,
            scenario.modulation,
            decode,
        );
        if let Some(p) = rec.rs_power {
            if in_period + latency < period {
                ctrl.observe(t, p);
            }
        }
        rows.push(TraceRow {
            subframe: t,
            weight_id: ctrl.applied_id,
            snr_db: rec.snr_db,
            oracle_db: oracle_db(lambda, streams.noise_power),
            gap_db: optimality_gap(&applied, &r, lambda),
            evm_db: rec.evm_db,
            bit_errors: rec.bit_errors,
            sync_ok: rec.sync_ok,
            abandoned: !decode,
            rs_power: rec.rs_power.unwrap_or(f64::NAN),
        });

        if let Some(b) = baseline.as_mut() {
            let chan = SpatialChannel::from_parts(
                &clusters,
                &b.geometry,
                streams.fading.coefficients(),
                ctx.subcarriers.clone(),
                num.subcarrier_spacing_hz,
                t,
            );
            let rb = exact_correlation(&clusters, &b.geometry).get(0, 0).re;
            let rec = b.receive(
                &ctx,
                layout,
                &tx,
                &bits,
                &chan,
                &baseline_weight,
                &noise,
                scenario.modulation,
                decode,
            );
            base_rows.push(TraceRow {
                subframe: t,
                weight_id: 0,
                snr_db: rec.snr_db,
                oracle_db: oracle_db(rb, streams.noise_power),
                gap_db: 0.0,
                evm_db: rec.evm_db,
                bit_errors: rec.bit_errors,
                sync_ok: rec.sync_ok,
                abandoned: !decode,
                rs_power: rec.rs_power.unwrap_or(f64::NAN),
            });
        }
    }

    let record = |rows, applications, final_weight, iterations| TrialRecord {
        scenario_id: scenario.id.clone(),
        seed,
        rows,
        applications,
        period_subframes: period,
        latency_subframes: latency,
        tracker_iterations: iterations,
        final_weight,
        fading_checksum: streams.fading_sum.0,
        noise_checksum: streams.noise_sum.0,
    };
    let base = baseline.map(|_| {
        record(
            base_rows,
            vec![WeightApplication {
                subframe: 0,
                weight_id: 0,
                last_observation: None,
                weight: baseline_weight.to_vec(),
            }],
            baseline_weight.to_vec(),
            0,
        )
    });
    let hyb = record(
        rows,
        applications,
        ctrl.tracker.weight().as_slice().to_vec(),
        ctrl.tracker.iteration(),
    );
    Ok((hyb, base))
}

/// Runs the hybrid receiver with the beam tracker for `subframes` subframes.
pub fn run_link_trial(scenario: &LinkScenario, subframes: usize, seed: u64) -> Result<TrialRecord> {
    Ok(simulate(scenario, subframes, seed, false)?.0)
}

/// Runs the hybrid receiver and the single directive element on the same
/// channel, noise and data streams.
pub fn run_ab_comparison(scenario: &LinkScenario, subframes: usize, seed: u64) -> Result<AbSummary> {
    let (hybrid, baseline) = simulate(scenario, subframes, seed, true)?;
    let baseline = baseline.expect("baseline requested");
    let clusters = scenario.cluster_source(seed)?.at(subframes - 1)?;
    let lambda = eigen_oracle(&exact_correlation(&clusters, &scenario.geometry)).value;
    let rb = exact_correlation(&clusters, &ArrayGeometry::single(scenario.geometry.pattern))
        .get(0, 0)
        .re;
    let f = scenario.averaging_fraction;
    let h = hybrid.mean_snr_db(f);
    let b = baseline.mean_snr_db(f);
    Ok(AbSummary {
        hybrid_mean_snr_db: h,
        baseline_mean_snr_db: b,
        gain_db: h - b,
        oracle_gain_db: 10.0 * (lambda / rb).log10(),
        streams_match: hybrid.fading_checksum == baseline.fading_checksum
            && hybrid.noise_checksum == baseline.noise_checksum,
        hybrid,
        baseline,
    })
}

/// Outcome of [`run_trajectory_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    /// Subframes in motion after the transient.
    pub evaluated: usize,
    /// Fraction of those with gap below the tracking threshold.
    pub tracked_fraction: f64,
    pub threshold_db: f64,
    pub record: TrialRecord,
}

/// Runs a trial over the scenario's trajectory and scores tracking during
/// motion.
pub fn run_trajectory_test(scenario: &LinkScenario, seed: u64) -> Result<TrajectorySummary> {
    let ChannelSpec::Trajectory(t) = &scenario.channel else {
        return Err(Error::Config("trajectory test needs a trajectory channel".into()));
    };
    let subframes = t.start_subframe + t.duration_subframes;
    let record = run_link_trial(scenario, subframes.max(1), seed)?;
    let moving: Vec<&TraceRow> = record
        .rows
        .iter()
        .filter(|r| t.in_motion(r.subframe) && r.subframe >= scenario.transient_subframes)
        .collect();
    let ok = moving
        .iter()
        .filter(|r| r.gap_db < scenario.tracking_threshold_db)
        .count();
    Ok(TrajectorySummary {
        evaluated: moving.len(),
        tracked_fraction: if moving.is_empty() {
            1.0
        } else {
            ok as f64 / moving.len() as f64
        },
        threshold_db: scenario.tracking_threshold_db,
        record,
    })
}

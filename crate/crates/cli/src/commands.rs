//! The `link`, `system` and `selftest` commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hbf_core::array_rf::{quantize_weight, RfHardwareModel};
use hbf_core::beamtrack::eigen_oracle;
use hbf_core::linalg::{self, HermitianMatrix};
use hbf_core::linksim::{run_ab_comparison, run_link_trial, run_trajectory_test, TrialRecord};
use hbf_core::phy::{
    self, bit_errors, build_subframe, circular_autocorrelation, design_lpf, equalize_zf, estimate_channel,
    zadoff_chu, FilterSpec, Modulation, OfdmModem, PssReplica, SubframeLayout, Synchronizer, DEFAULT_PEAK_RATIO,
    PSS_LENGTH, PSS_ROOT,
};
use hbf_core::rng::{self, complex_normal};
use hbf_core::syssim::{run_system_eval, SystemTag};
use hbf_core::C64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LinkMode, Resolved};
use crate::output::{write_csv, write_json, Meta};
use crate::CliError;

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start {n} workers: {e}")))
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(p).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))
}

/// Per-trial figures of the link summary.
#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub mean_snr_db: f64,
    pub median_gap_db: f64,
    pub audit: String,
    pub tracker_iterations: usize,
    pub sync_failures: usize,
    pub decoded_subframes: usize,
    pub bit_errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_mean_snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub streams_match: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracked_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkSummary {
    pub mode: LinkMode,
    pub subframes: usize,
    pub averaging_fraction: f64,
    pub period_subframes: usize,
    pub latency_subframes: usize,
    pub trials: Vec<TrialSummary>,
    pub mean_snr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_oracle_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_gain_fraction: Option<f64>,
}

#[derive(Serialize)]
struct WeightRow {
    subframe: usize,
    weight_id: u64,
    last_observation: Option<usize>,
    weight: String,
}

fn format_weight(w: &[C64]) -> String {
    w.iter()
        .map(|c| format!("{:.9e}{:+.9e}j", c.re, c.im))
        .collect::<Vec<_>>()
        .join(" ")
}

struct TrialOutput {
    summary: TrialSummary,
    hybrid: TrialRecord,
    baseline: Option<TrialRecord>,
}

fn summarize(trial: usize, seed: u64, r: &TrialRecord, fraction: f64) -> TrialSummary {
    let decoded: Vec<usize> = r.rows.iter().filter_map(|x| x.bit_errors).collect();
    TrialSummary {
        trial,
        seed,
        mean_snr_db: r.mean_snr_db(fraction),
        median_gap_db: r.median_gap_db(fraction),
        audit: r.audit().err().unwrap_or_else(|| "ok".into()),
        tracker_iterations: r.tracker_iterations,
        sync_failures: r.rows.iter().filter(|x| !x.sync_ok).count(),
        decoded_subframes: decoded.len(),
        bit_errors: decoded.iter().sum(),
        baseline_mean_snr_db: None,
        gain_db: None,
        oracle_gain_db: None,
        streams_match: None,
        tracked_fraction: None,
    }
}

fn run_trial(r: &Resolved, trial: usize) -> hbf_core::Result<TrialOutput> {
    let c = &r.config;
    let seed = rng::derive_seed(r.seed, "trial", trial as u64);
    let f = c.link.averaging_fraction;
    Ok(match c.run.mode {
        LinkMode::Trial => {
            let rec = run_link_trial(&c.link, c.run.subframes, seed)?;
            TrialOutput {
                summary: summarize(trial, seed, &rec, f),
                hybrid: rec,
                baseline: None,
            }
        }
        LinkMode::Ab => {
            let ab = run_ab_comparison(&c.link, c.run.subframes, seed)?;
            let mut s = summarize(trial, seed, &ab.hybrid, f);
            s.baseline_mean_snr_db = Some(ab.baseline_mean_snr_db);
            s.gain_db = Some(ab.gain_db);
            s.oracle_gain_db = Some(ab.oracle_gain_db);
            s.streams_match = Some(ab.streams_match);
            TrialOutput {
                summary: s,
                hybrid: ab.hybrid,
                baseline: Some(ab.baseline),
            }
        }
        LinkMode::Trajectory => {
            let t = run_trajectory_test(&c.link, seed)?;
            let mut s = summarize(trial, seed, &t.record, f);
            s.tracked_fraction = Some(t.tracked_fraction);
            TrialOutput {
                summary: s,
                hybrid: t.record,
                baseline: None,
            }
        }
    })
}

fn map_core(e: hbf_core::Error) -> CliError {
    match e {
        hbf_core::Error::Config(m) => CliError::Config(m),
        other => CliError::Runtime(other.to_string()),
    }
}

fn write_iq_frame(r: &Resolved, dir: &Path) -> Result<PathBuf, CliError> {
    let num = r.config.link.numerology;
    let modem = OfdmModem::new(num);
    let modulation = r.config.link.modulation;
    let mut g = rng::stream(r.seed, "iq", 0);
    let mut samples = Vec::new();
    for sf in 0..num.subframes_per_frame() {
        let layout = SubframeLayout::new(num, sf);
        let bits: Vec<u8> = (0..layout.data_capacity() * modulation.bits_per_symbol())
            .map(|_| g.random_range(0..2u8))
            .collect();
        samples.extend(build_subframe(&modem, &layout, modulation, &bits).map_err(map_core)?.1);
    }
    let path = dir.join("tx_frame.cf32");
    phy::iq::write_iq(&path, &samples, num.sample_rate_hz, "noiseless transmitted frame")
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Runs the configured link experiment and writes traces and a summary.
pub fn cmd_link(r: &Resolved) -> Result<LinkSummary, CliError> {
    let c = &r.config;
    c.link.validate().map_err(map_core)?;
    if c.run.subframes == 0 && c.run.mode != LinkMode::Trajectory {
        return Err(CliError::Config("run.subframes must be at least 1".into()));
    }
    let out = &c.run.out;
    create_dir(out)?;
    let meta = Meta::new(r);
    let results: Vec<TrialOutput> = pool(c.run.workers)?
        .install(|| {
            (0..c.run.trials)
                .into_par_iter()
                .map(|t| run_trial(r, t))
                .collect::<hbf_core::Result<_>>()
        })
        .map_err(map_core)?;

    for t in &results {
        let i = t.summary.trial;
        write_csv(&out.join(format!("trace_{i}.csv")), &meta, &t.hybrid.rows)?;
        write_csv(
            &out.join(format!("weights_{i}.csv")),
            &meta,
            t.hybrid.applications.iter().map(|a| WeightRow {
                subframe: a.subframe,
                weight_id: a.weight_id,
                last_observation: a.last_observation,
                weight: format_weight(&a.weight),
            }),
        )?;
        if let Some(b) = &t.baseline {
            write_csv(&out.join(format!("baseline_{i}.csv")), &meta, &b.rows)?;
        }
    }
    if c.run.iq_dump {
        write_iq_frame(r, out)?;
    }

    let n = results.len() as f64;
    let gains: Vec<f64> = results.iter().filter_map(|t| t.summary.gain_db).collect();
    let oracles: Vec<f64> = results.iter().filter_map(|t| t.summary.oracle_gain_db).collect();
    let first = &results[0].hybrid;
    let summary = LinkSummary {
        mode: c.run.mode,
        subframes: first.rows.len(),
        averaging_fraction: c.link.averaging_fraction,
        period_subframes: first.period_subframes,
        latency_subframes: first.latency_subframes,
        mean_snr_db: results.iter().map(|t| t.summary.mean_snr_db).sum::<f64>() / n,
        mean_gain_db: (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64),
        mean_oracle_gain_db: (!oracles.is_empty()).then(|| oracles.iter().sum::<f64>() / oracles.len() as f64),
        positive_gain_fraction: (!gains.is_empty())
            .then(|| gains.iter().filter(|g| **g > 0.0).count() as f64 / gains.len() as f64),
        trials: results.into_iter().map(|t| t.summary).collect(),
    };
    write_json(&out.join("summary.json"), &meta, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantSummary {
    pub system: &'static str,
    pub samples: usize,
    pub mean_bps: f64,
    pub p5_bps: f64,
    pub p50_bps: f64,
    pub p95_bps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub drops: usize,
    pub base_stations: usize,
    pub idle_cells: usize,
    pub regularized: usize,
    pub propagation: hbf_core::syssim::PropagationModel,
    pub variants: Vec<VariantSummary>,
    /// Hybrid over conventional mean rate, with interference.
    pub hybrid_gain: f64,
}

#[derive(Serialize)]
struct CdfRow {
    rate_bps: f64,
    cdf: f64,
}

#[derive(Serialize)]
struct RateRow {
    drop: usize,
    ms_id: usize,
    serving_cell: usize,
    system: &'static str,
    sinr0_db: f64,
    sinr1_db: f64,
    rate_bps: f64,
    regularized: bool,
}

/// Runs the system evaluation and writes per-variant CDFs and a summary.
pub fn cmd_system(r: &Resolved) -> Result<SystemSummary, CliError> {
    let c = &r.config;
    c.system.validate().map_err(map_core)?;
    if c.run.drops == 0 {
        return Err(CliError::Config("run.drops must be at least 1".into()));
    }
    let out = &c.run.out;
    create_dir(out)?;
    let meta = Meta::new(r);
    let eval = pool(c.run.workers)?
        .install(|| run_system_eval(&c.system, c.run.drops, r.seed))
        .map_err(map_core)?;
    for v in &eval.variants {
        write_csv(
            &out.join(format!("cdf_{}.csv", v.system.name())),
            &meta,
            v.cdf.iter().map(|&(rate_bps, cdf)| CdfRow { rate_bps, cdf }),
        )?;
    }
    if c.run.rate_samples {
        write_csv(
            &out.join("rates.csv"),
            &meta,
            eval.samples.iter().map(|s| RateRow {
                drop: s.drop,
                ms_id: s.ms_id,
                serving_cell: s.serving_cell,
                system: s.system.name(),
                sinr0_db: s.sinr_db[0],
                sinr1_db: s.sinr_db[1],
                rate_bps: s.rate_bps,
                regularized: s.regularized,
            }),
        )?;
    }
    let summary = SystemSummary {
        drops: eval.drops,
        base_stations: c.system.deployment.base_stations.len(),
        idle_cells: eval.idle_cells,
        regularized: eval.regularized,
        propagation: c.system.propagation,
        variants: eval
            .variants
            .iter()
            .map(|v| VariantSummary {
                system: v.system.name(),
                samples: v.samples,
                mean_bps: v.mean_bps,
                p5_bps: v.p5_bps,
                p50_bps: v.p50_bps,
                p95_bps: v.p95_bps,
            })
            .collect(),
        hybrid_gain: eval.variant(SystemTag::Hybrid).mean_bps / eval.variant(SystemTag::Conventional).mean_bps,
    };
    write_json(&out.join("summary.json"), &meta, &summary)?;
    Ok(summary)
}

/// Faults the self-test can be told to plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Negate one element of the Zadoff-Chu sequence.
    ZcSign,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub millis: f64,
}

fn check_zc(fault: Option<Fault>) -> (bool, String) {
    let mut zc = match zadoff_chu(PSS_ROOT, PSS_LENGTH) {
        Ok(z) => z,
        Err(e) => return (false, e.to_string()),
    };
    if fault == Some(Fault::ZcSign) {
        zc[5] = -zc[5];
    }
    let r = circular_autocorrelation(&zc);
    let side = r[1..].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let peak = r[0].norm();
    (
        (peak - PSS_LENGTH as f64).abs() < 1e-9 && side < 1e-9,
        format!("|R(0)|={peak:.6} max|R(t)|={side:.3e}"),
    )
}

fn check_lpf() -> (bool, String) {
    match design_lpf(&FilterSpec::default()) {
        Ok(d) => (
            d.ripple_db <= 0.1 && d.attenuation_db >= 50.0,
            format!("{} taps, ripple {:.4} dB, stopband {:.2} dB", d.taps.len(), d.ripple_db, d.attenuation_db),
        ),
        Err(e) => (false, e.to_string()),
    }
}

fn check_eigen() -> (bool, String) {
    let mut g = rng::stream(0, "selftest-eigen", 0);
    let mut worst: f64 = 0.0;
    for n in [6usize, 12] {
        for _ in 0..100 {
            let b: Vec<C64> = (0..n * n).map(|_| complex_normal(&mut g)).collect();
            let r = HermitianMatrix::gram(n, &b);
            let o = eigen_oracle(&r);
            let rv = r.mul_vec(&o.vector);
            let res: f64 = rv
                .iter()
                .zip(&o.vector)
                .map(|(a, v)| (a - v * o.value).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let dominance = (0..n).all(|i| o.value >= r.get(i, i).re * (1.0 - 1e-12));
            let rel = res / o.value + (linalg::norm(&o.vector) - 1.0).abs();
            worst = worst.max(if dominance { rel } else { f64::INFINITY });
        }
    }
    (worst < 1e-8, format!("worst relative residual {worst:.2e}"))
}

fn check_quantizer() -> (bool, String) {
    let hw = RfHardwareModel::default();
    let mut g = rng::stream(0, "selftest-quant", 0);
    let mut phase_err: f64 = 0.0;
    let mut amp_err: f64 = 0.0;
    for _ in 0..500 {
        let w: Vec<C64> = (0..12).map(|_| complex_normal(&mut g)).collect();
        let q = quantize_weight(&w, &hw);
        let max = w.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in w.iter().zip(&q.coefficients) {
            let d = (b / a).arg().abs();
            phase_err = phase_err.max(d);
            let att = 20.0 * (max / a.norm()).log10();
            if att < hw.amplitude_range_db() {
                amp_err = amp_err.max((20.0 * (b.norm() / a.norm()).log10()).abs());
            }
        }
    }
    (
        phase_err <= hw.max_phase_error_rad() + 1e-12 && amp_err <= hw.max_amplitude_error_db() + 1e-9,
        format!("max phase error {phase_err:.4} rad, max amplitude error {amp_err:.4} dB"),
    )
}

fn check_ofdm() -> (bool, String) {
    let num = phy::Numerology::default();
    let modem = OfdmModem::new(num);
    let layout = SubframeLayout::new(num, 1);
    let m = Modulation::Qam64;
    let mut g = rng::stream(0, "selftest-ofdm", 0);
    let bits: Vec<u8> = (0..layout.data_capacity() * m.bits_per_symbol())
        .map(|_| g.random_range(0..2u8))
        .collect();
    let Ok((_, samples)) = build_subframe(&modem, &layout, m, &bits) else {
        return (false, "framing failed".into());
    };
    let rx = modem.demodulate(&samples, layout.symbols());
    let est = estimate_channel(&rx, &layout);
    let eq = equalize_zf(&rx, &est, &layout, m);
    let errors = bit_errors(&eq.bits, &bits);
    (
        errors == 0 && eq.evm_db < -40.0,
        format!("{errors} bit errors, EVM {:.1} dB", eq.evm_db),
    )
}

fn check_sync() -> (bool, String) {
    let num = phy::Numerology::default();
    let run = || -> hbf_core::Result<i64> {
        let modem = OfdmModem::new(num);
        let layout = SubframeLayout::new(num, 0);
        let bits = vec![0u8; layout.data_capacity() * 2];
        let (_, samples) = build_subframe(&modem, &layout, Modulation::Qpsk, &bits)?;
        let offset = 777;
        let mut rx = vec![C64::new(0.0, 0.0); offset];
        rx.extend(samples);
        let taps = design_lpf(&FilterSpec::default())?.taps;
        let mut sync = Synchronizer::new(PssReplica::new(num)?, taps, DEFAULT_PEAK_RATIO);
        Ok(sync.synchronize(&rx)?.offset - offset as i64)
    };
    match run() {
        Ok(err) => (err == 0, format!("timing error {err} samples")),
        Err(e) => (false, e.to_string()),
    }
}

/// Runs the fast invariant checks.
pub fn cmd_selftest(fault: Option<Fault>) -> Vec<CheckResult> {
    let checks: [(&'static str, Box<dyn Fn() -> (bool, String)>); 6] = [
        ("zc_autocorrelation", Box::new(move || check_zc(fault))),
        ("lpf_mask", Box::new(check_lpf)),
        ("eigen_oracle", Box::new(check_eigen)),
        ("quantizer_bounds", Box::new(check_quantizer)),
        ("ofdm_loopback", Box::new(check_ofdm)),
        ("pss_sync", Box::new(check_sync)),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let (pass, detail) = f();
            CheckResult {
                name,
                pass,
                detail,
                millis: t.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect()
}

/// Fixed-width table of check results.
pub fn format_checks(results: &[CheckResult]) -> String {
    let mut s = format!("{:<20} {:<6} {:>9}  {}\n", "check", "result", "ms", "detail");
    for r in results {
        s.push_str(&format!(
            "{:<20} {:<6} {:>9.1}  {}\n",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.millis,
            r.detail
        ));
    }
    s
}

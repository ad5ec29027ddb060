//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! status 1 if any criterion fails.
//!
//! Run alone with `cargo test -p hbfsim --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hbf_core::array_rf::ArrayGeometry;
use hbf_core::beamtrack::{eigen_oracle, optimality_gap, TrackerConfig, TrackerState};
use hbf_core::channel::{add_awgn, exact_correlation, PathCluster};
use hbf_core::linalg::{self, HermitianMatrix};
use hbf_core::linksim::{run_ab_comparison, run_link_trial, ChannelSpec, LatencyModel, LinkScenario};
use hbf_core::phy::{
    bit_errors, build_grid, circular_autocorrelation, design_lpf, equalize_zf, estimate_channel, magnitude_db,
    zadoff_chu, FilterSpec, Modulation, Numerology, OfdmModem, PssReplica, SubframeLayout, Synchronizer,
    DEFAULT_PEAK_RATIO,
};
use hbf_core::rng::{self, complex_normal, SimRng};
use hbf_core::syssim::{percentile, run_system_eval, SystemScenario, SystemTag};
use hbf_core::C64;
use hbfsim::output::csv_body;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// AC1: Zadoff-Chu autocorrelation.
fn ac1() -> Outcome {
    let t = Instant::now();
    let zc = zadoff_chu(25, 63).expect("root 25 is coprime to 63");
    let r = circular_autocorrelation(&zc);
    let peak = r[0].norm();
    let side = r[1..].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        zc.len() == 63 && (peak - 63.0).abs() < 1e-9 && side < 1e-9 && r.len() == 63 && secs < 1.0,
        format!("len {}, |R(0)| = {peak:.12}, max |R(t!=0)| = {side:.2e} (< 1e-9), {secs:.3} s (< 1 s)", zc.len()),
    )
}

// AC2: low-pass mask on a 4096-point grid.
fn ac2() -> Outcome {
    let spec = FilterSpec::default();
    let d = match design_lpf(&spec) {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let grid = 4096;
    let (mut pmax, mut pmin, mut smax) = (f64::MIN, f64::MAX, f64::MIN);
    for i in 0..=grid / 2 {
        let f = i as f64 * spec.sample_rate_hz / grid as f64;
        let db = magnitude_db(&d.taps, f, spec.sample_rate_hz);
        if f <= 1.4e6 {
            pmax = pmax.max(db);
            pmin = pmin.min(db);
        } else if f >= spec.stopband_edge_hz {
            smax = smax.max(db);
        }
    }
    let ripple = pmax - pmin;
    outcome(
        ripple <= 0.1 && -smax >= 50.0,
        format!(
            "{} taps, ripple {ripple:.4} dB (<= 0.1) below 1.4 MHz, attenuation {:.2} dB (>= 50) beyond {:.1} MHz",
            d.taps.len(),
            -smax,
            spec.stopband_edge_hz / 1e6
        ),
    )
}

fn random_bits(n: usize, g: &mut SimRng) -> Vec<u8> {
    (0..n).map(|_| g.random_range(0..2u8)).collect()
}

// AC3: PSS timing acquisition.
fn ac3() -> Outcome {
    let t = Instant::now();
    let num = Numerology::default();
    let modem = OfdmModem::new(num);
    let taps = design_lpf(&FilterSpec::default()).expect("default filter").taps;
    let mut sync = Synchronizer::new(PssReplica::new(num).expect("replica"), taps, DEFAULT_PEAK_RATIO);
    let layouts = [SubframeLayout::new(num, 0), SubframeLayout::new(num, 5)];
    let subframe = |g: &mut SimRng, layout: &SubframeLayout| {
        let bits = random_bits(layout.data_capacity() * 4, g);
        modem.modulate(&build_grid(layout, Modulation::Qam16, &bits).expect("capacity matches"))
    };

    let mut g = rng::stream(101, "ac3-noiseless", 0);
    let mut noiseless_ok = true;
    for offset in [0usize, 1, 17, 513, 2047, 9000] {
        let mut rx = vec![C64::new(0.0, 0.0); offset];
        rx.extend(subframe(&mut g, &layouts[offset % 2]));
        noiseless_ok &= sync.synchronize(&rx).map(|r| r.offset) == Ok(offset as i64);
    }

    let trials = 1000;
    let mut exact = 0;
    for trial in 0..trials {
        let mut g = rng::stream(102, "ac3-awgn", trial);
        let tx = subframe(&mut g, &layouts[trial as usize % 2]);
        let power = tx.iter().map(|x| x.norm_sqr()).sum::<f64>() / tx.len() as f64;
        let offset = g.random_range(0..2000usize);
        let mut rx = vec![C64::new(0.0, 0.0); offset];
        rx.extend(tx);
        add_awgn(&mut rx, power, &mut g);
        if sync.synchronize(&rx).map(|r| r.offset) == Ok(offset as i64) {
            exact += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let rate = exact as f64 / trials as f64;
    outcome(
        noiseless_ok && rate >= 0.99 && secs < 60.0,
        format!(
            "noiseless {}, {exact}/{trials} exact at 0 dB ({:.1}% >= 99%), {secs:.1} s (< 60 s)",
            if noiseless_ok { "exact" } else { "WRONG" },
            rate * 100.0
        ),
    )
}

// AC4: ideal-channel 64-QAM loopback.
fn ac4() -> Outcome {
    let num = Numerology::default();
    let modem = OfdmModem::new(num);
    let mut g = rng::stream(103, "ac4", 0);
    let (mut errors, mut worst_evm) = (0, f64::MIN);
    for sf in 0..100 {
        let layout = SubframeLayout::new(num, sf % 10);
        let bits = random_bits(layout.data_capacity() * 6, &mut g);
        let grid = build_grid(&layout, Modulation::Qam64, &bits).expect("capacity matches");
        let rx = modem.demodulate(&modem.modulate(&grid), layout.symbols());
        let est = estimate_channel(&rx, &layout);
        let eq = equalize_zf(&rx, &est, &layout, Modulation::Qam64);
        errors += bit_errors(&eq.bits, &bits);
        worst_evm = worst_evm.max(eq.evm_db);
    }
    outcome(
        errors == 0 && worst_evm < -40.0,
        format!("100 subframes: {errors} bit errors, worst EVM {worst_evm:.1} dB (< -40)"),
    )
}

// AC5: eigen oracle against a dense eigensolver.
fn ac5() -> Outcome {
    let mut g = rng::stream(104, "ac5", 0);
    let (mut val_err, mut vec_err) = (0.0f64, 0.0f64);
    let mut count = 0;
    for n in [6usize, 12] {
        for _ in 0..1000 {
            let b: Vec<C64> = (0..n * n).map(|_| complex_normal(&mut g)).collect();
            let r = HermitianMatrix::gram(n, &b);
            let o = eigen_oracle(&r);
            let e = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| r.get(i, j)));
            let (idx, val) = e
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty spectrum");
            let u: Vec<C64> = e.eigenvectors.column(idx).iter().copied().collect();
            val_err = val_err.max((o.value - val).abs() / val);
            vec_err = vec_err.max(1.0 - linalg::inner(&u, &o.vector).norm());
            count += 1;
        }
    }
    outcome(
        val_err <= 1e-8 && vec_err <= 1e-8,
        format!("{count} matrices: max relative eigenvalue error {val_err:.2e}, max 1-|<u,v>| {vec_err:.2e} (<= 1e-8)"),
    )
}

fn three_cluster_r(g: &mut SimRng, geometry: &ArrayGeometry) -> HermitianMatrix {
    let clusters: Vec<PathCluster> = [0.6, 0.3, 0.1]
        .iter()
        .map(|&p| PathCluster::new(g.random_range(-1.0..1.0), g.random_range(-0.4..0.4), p))
        .collect();
    exact_correlation(&clusters, geometry)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// AC6: tracker convergence on static channels.
fn ac6() -> Outcome {
    let t = Instant::now();
    let geometry = ArrayGeometry::new(3, 2, 0.6).expect("valid geometry");
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for seed in 0..100u64 {
        let r = three_cluster_r(&mut rng::stream(seed, "ac6-channel", 0), &geometry);
        let lambda = eigen_oracle(&r).value;
        let sigma2 = r.trace() / 6.0 * 10f64.powf(-20.0 / 10.0);

        let mut g = rng::stream(seed, "ac6-tracker", 0);
        let mut tr = TrackerState::new(TrackerConfig::default(), 6, &mut g).expect("valid config");
        for _ in 0..300 {
            tr.step(&mut g, |w| r.quadratic_form(w.as_slice()));
        }
        clean.push(optimality_gap(tr.weight().as_slice(), &r, lambda));

        let mut g = rng::stream(seed, "ac6-tracker", 0);
        let mut noise = rng::stream(seed, "ac6-noise", 0);
        let mut tr = TrackerState::new(TrackerConfig::default(), 6, &mut g).expect("valid config");
        for _ in 0..500 {
            tr.step(&mut g, |w| {
                let amp = r.quadratic_form(w.as_slice()).sqrt();
                (0..800)
                    .map(|_| (complex_normal(&mut noise) * sigma2.sqrt() + amp).norm_sqr())
                    .sum::<f64>()
                    / 800.0
            });
        }
        noisy.push(optimality_gap(tr.weight().as_slice(), &r, lambda));
    }
    let (mc, mn) = (median(clean), median(noisy));
    let secs = t.elapsed().as_secs_f64();
    outcome(
        mc < 0.5 && mn < 1.0 && secs < 300.0,
        format!(
            "100 seeds: noise-free median gap {mc:.4} dB at 300 (< 0.5), 20 dB median gap {mn:.4} dB at 500 (< 1.0), {secs:.1} s (< 300 s)"
        ),
    )
}

// AC7: array gain on a single path at the element boresight.
fn ac7() -> Outcome {
    let scenario = LinkScenario {
        id: "single-path".into(),
        channel: ChannelSpec::Static {
            clusters: vec![PathCluster::new(0.0, 0.0, 1.0)],
        },
        latency: LatencyModel::ideal(),
        ..LinkScenario::default()
    };
    match run_ab_comparison(&scenario, 600, 107) {
        Ok(ab) => {
            let target = 10.0 * 6f64.log10();
            outcome(
                (ab.gain_db - target).abs() <= 0.5 && ab.streams_match,
                format!(
                    "gain {:.3} dB vs {target:.2} dB (+/- 0.5), final gap {:.3} dB, common streams {}",
                    ab.gain_db,
                    ab.hybrid.rows.last().map_or(f64::NAN, |r| r.gap_db),
                    ab.streams_match
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

// AC8: A/B gain over the rich-scattering ensemble.
fn ac8() -> Outcome {
    let t = Instant::now();
    let scenario = LinkScenario {
        latency: LatencyModel::ideal(),
        ..LinkScenario::default()
    };
    let seeds = 100;
    let (mut gain, mut oracle, mut positive, mut matched) = (0.0, 0.0, 0, true);
    for seed in 0..seeds {
        match run_ab_comparison(&scenario, 600, seed) {
            Ok(ab) => {
                gain += ab.gain_db;
                oracle += ab.oracle_gain_db;
                positive += usize::from(ab.gain_db > 0.0);
                matched &= ab.streams_match;
            }
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        }
    }
    let (gain, oracle) = (gain / seeds as f64, oracle / seeds as f64);
    let frac = positive as f64 / seeds as f64;
    outcome(
        frac >= 0.95 && (gain - oracle).abs() <= 0.5 && matched,
        format!(
            "{seeds} seeds: gain > 0 in {:.0}% (>= 95%), mean gain {gain:.3} dB vs oracle {oracle:.3} dB (|diff| {:.3} <= 0.5), {:.0} s",
            frac * 100.0,
            (gain - oracle).abs(),
            t.elapsed().as_secs_f64()
        ),
    )
}

// AC9: update cadence and causality under the testbed latency.
fn ac9() -> Outcome {
    let scenario = LinkScenario::default();
    let num = scenario.numerology;
    let rec = match run_link_trial(&scenario, 300, 109) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let sf_ms = num.subframe_duration_s() * 1e3;
    let period_ms = rec.period_subframes as f64 * sf_ms;
    let mut ok = (period_ms - 15.0).abs() < 1e-9 && rec.applications.len() > 10;
    let mut min_age_ms = f64::INFINITY;
    for a in &rec.applications {
        ok &= (a.subframe as f64 * sf_ms / 15.0).fract().abs() < 1e-9;
        if let Some(obs) = a.last_observation {
            // The observation of subframe `obs` is complete at its end.
            let age = (a.subframe as f64 - (obs + 1) as f64) * sf_ms;
            min_age_ms = min_age_ms.min(age);
        }
    }
    let changes_on_boundaries = rec
        .rows
        .windows(2)
        .filter(|w| w[0].weight_id != w[1].weight_id)
        .all(|w| (w[1].subframe as f64 * sf_ms / 15.0).fract().abs() < 1e-9);
    let audit = rec.audit();
    ok &= min_age_ms >= 7.0 - 1e-9 && changes_on_boundaries && audit.is_ok();
    outcome(
        ok,
        format!(
            "{} updates every {period_ms:.0} ms, weight changes on boundaries {changes_on_boundaries}, newest observation at least {min_age_ms:.1} ms old (>= 7), audit {}",
            rec.applications.len(),
            audit.err().unwrap_or_else(|| "ok".into())
        ),
    )
}

// AC10: system-level properties.
fn ac10() -> Outcome {
    let t = Instant::now();
    let s = SystemScenario::default();
    let e = match run_system_eval(&s, 10_000, 110) {
        Ok(e) => e,
        Err(err) => return outcome(false, err.to_string()),
    };
    let secs = t.elapsed().as_secs_f64();
    let h = e.variant(SystemTag::Hybrid).mean_bps;
    let c = e.variant(SystemTag::Conventional).mean_bps;
    let gain = h / c - 1.0;
    let dominated = |with: SystemTag, without: SystemTag| {
        e.variant(with)
            .cdf
            .iter()
            .zip(&e.variant(without).cdf)
            .all(|(a, b)| b.1 <= a.1)
    };
    let dom = dominated(SystemTag::Hybrid, SystemTag::HybridNoIci)
        && dominated(SystemTag::Conventional, SystemTag::ConventionalNoIci);
    let in_range = e.samples.iter().all(|x| (0.0..=200e6).contains(&x.rate_bps));
    let mut top = e.rates(SystemTag::HybridNoIci);
    top.sort_by(f64::total_cmp);
    let p99 = percentile(&top, 99.0);
    outcome(
        gain >= 0.2 && dom && in_range && p99 == 200e6 && secs < 600.0,
        format!(
            "10^4 drops: hybrid {:.2} vs conventional {:.2} Mbps (+{:.1}% >= 20%), no-ICI dominance {dom}, rates in [0, 200 Mbps] {in_range}, no-ICI hybrid p99 {:.2} Mbps (cap 200), {secs:.0} s (< 600 s)",
            h / 1e6,
            c / 1e6,
            gain * 100.0,
            p99 / 1e6
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hbfsim"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .expect("output directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).expect("readable csv");
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                csv_body(&text).to_string(),
            )
        })
        .collect()
}

// AC11: byte-identical CSV bodies on rerun.
fn ac11() -> Outcome {
    let tmp = tempfile::tempdir().expect("temp dir");
    let cfg = tmp.path().join("scenario.toml");
    std::fs::write(&cfg, "seed = 11\n\n[run]\nmode = \"ab\"\ntrials = 2\n").expect("write scenario");
    let cfg = cfg.to_str().unwrap();
    let mut compared = 0;
    for (cmd, extra, workers) in [
        ("link", ["--subframes", "40"], ["1", "2"]),
        ("system", ["--drops", "40"], ["1", "2"]),
    ] {
        let dirs: Vec<_> = workers
            .iter()
            .map(|w| {
                let d = tmp.path().join(format!("{cmd}-{w}"));
                run_cli(&[cmd, "--scenario", cfg, "--out", d.to_str().unwrap(), "--workers", w, extra[0], extra[1]])
                    .map(|_| d)
            })
            .collect::<Result<_, _>>()
            .unwrap_or_default();
        if dirs.len() != 2 {
            return outcome(false, format!("{cmd} run failed"));
        }
        let (a, b) = (csv_bodies(&dirs[0]), csv_bodies(&dirs[1]));
        if a.is_empty() || a != b {
            return outcome(false, format!("{cmd}: CSV bodies differ between reruns"));
        }
        compared += a.len();
    }
    outcome(true, format!("{compared} CSV files byte-identical across reruns (1 and 2 workers)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
        ("AC11", ac11),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = Vec::new();
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let o = f();
        println!("{name:<5} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}

//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use fastlight::amplifier::{amplify_moments, PhotonMoments};
use fastlight::analysis::{
    compare, region_mean, visibility, visibility_corrected, DetectionParams, Rect, TracePoint, VisibilityTrace,
};
use fastlight::detector::{uniform_delays, ImageFrame};
use fastlight::experiment::{run_ensemble, ExperimentConfig, MediumConfig};
use fastlight::medium::{dispersion_report, group_delay, propagate, transfer_function, MediumSpec};
use fastlight::pulse::{make_gaussian_pulse, peak_position, peak_time, TimeGrid};
use fastlight::scene::expected_frame;

const NS: f64 = 1e-9;

type Outcome = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn relative_peak_advancement() -> Outcome {
    let cfg = ExperimentConfig::load(&configs().join("paper_fig2.cfg")).map_err(|e| e.to_string())?;
    let input = cfg.input_pulse().map_err(|e| e.to_string())?;
    let output = propagate(&input, &cfg.medium.to_spec()).map_err(|e| e.to_string())?;
    let scene = cfg.scene.to_spec();
    let gate = cfg.detector.gate_width_ns * NS;
    let delays = uniform_delays(0.0, 1200.0 * NS, gate);
    let arrival = |p| -> Result<Vec<f64>, String> {
        delays.iter().map(|&d| expected_frame(&scene, p, d, gate).map(|f| f.total()).map_err(|e| e.to_string())).collect()
    };
    let r = peak_position(&arrival(&input)?).ok_or("no reference peak")?;
    let f = peak_position(&arrival(&output)?).ok_or("no fast peak")?;
    let rel = (r - f) * gate / (cfg.pulse.fwhm_ns * NS);
    check((rel - 0.474).abs() <= 0.01, format!("peak advancement / FWHM = {:.2}% (target 47.4% +/- 1%)", 100.0 * rel))
}

fn medium_calibration() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_fastlight"))
        .args(["--quiet", "calibrate-medium", "--group-index", "-2400", "--carrier-gain", "1.005"])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("calibrate-medium exited with {}", out.status));
    }
    #[derive(serde::Deserialize)]
    struct Wrapper {
        medium: MediumConfig,
    }
    let w: Wrapper = toml::from_str(&String::from_utf8_lossy(&out.stdout)).map_err(|e| e.to_string())?;
    let medium = w.medium.to_spec();
    let MediumSpec::Physical(p) = &medium else { return Err("calibration did not return a physical medium".into()) };
    let rep = dispersion_report(&medium).map_err(|e| e.to_string())?;

    // narrowband probe: ten periods of the line spacing
    let fwhm = 10.0 / (2.0 * p.lines[1].center_detuning);
    let grid = TimeGrid::new(0.0, fwhm / 200.0, 4096).map_err(|e| e.to_string())?;
    let pulse = make_gaussian_pulse(grid, 0.5 * grid.t_end(), fwhm, 1e6).map_err(|e| e.to_string())?;
    let spectral_half = 0.5 * fastlight::pulse::gaussian_spectral_fwhm(fwhm);
    let probe: Vec<f64> = (-50..=50).map(|k| k as f64 / 50.0 * spectral_half).collect();
    let band_gain = transfer_function(&medium, &probe).map_err(|e| e.to_string())?;
    let (gmin, gmax) = band_gain.iter().map(|h| h.norm_sqr()).fold((f64::MAX, f64::MIN), |(a, b), g| (a.min(g), b.max(g)));

    let out = propagate(&pulse, &medium).map_err(|e| e.to_string())?;
    let shift = peak_time(&out).map_err(|e| e.to_string())? - peak_time(&pulse).map_err(|e| e.to_string())?;
    let predicted = group_delay(rep.group_index, p.length);
    let ng_ok = ((rep.group_index + 2400.0) / 2400.0).abs() <= 0.05;
    let gain_ok = (gmin - 1.0).abs() <= 0.01 && (gmax - 1.0).abs() <= 0.01;
    let shift_ok = ((shift - predicted) / predicted).abs() <= 0.05;
    check(
        ng_ok && gain_ok && shift_ok,
        format!(
            "n_g = {:.1}, gain over pulse band {:.4}..{:.4}, peak shift {:.1} ns vs group delay {:.1} ns",
            rep.group_index,
            gmin,
            gmax,
            shift / NS,
            predicted / NS
        ),
    )
}

fn paper_ensemble() -> Result<fastlight::experiment::EnsembleResult, String> {
    let cfg = ExperimentConfig::load(&configs().join("paper_fig2.cfg")).map_err(|e| e.to_string())?;
    if cfg.ensemble.n_seeds < 100 {
        return Err("paper config must run at least 100 seeds".into());
    }
    run_ensemble(&cfg).map_err(|e| e.to_string())
}

fn advancement_window(e: &fastlight::experiment::EnsembleResult) -> Outcome {
    let Some((lo, hi)) = e.window_after_onset() else { return Err("fast integrated SNR never exceeds the reference".into()) };
    check(
        lo <= 200.0 * NS && hi >= 100.0 * NS,
        format!("fast > reference from {:.1} to {:.1} ns after onset (must overlap 100..200 ns)", lo / NS, hi / NS),
    )
}

fn positive_advancement(e: &fastlight::experiment::EnsembleResult) -> Outcome {
    let a = e.advancement.ok_or("no seed detected both channels")?;
    let lower = a.mean - 1.96 * a.se;
    check(
        lower > 0.0 && a.mean < 90.0 * NS,
        format!(
            "advancement {:.1} +/- {:.1} ns (se {:.2} ns, {} seeds, {:.1}% of FWHM); measured in the lab: 21 +/- 3 ns, 11%",
            a.mean / NS,
            a.std / NS,
            a.se / NS,
            a.n,
            100.0 * a.mean / e.pulse_fwhm
        ),
    )
}

fn perfect_detector() -> Outcome {
    let cfg = ExperimentConfig::load(&configs().join("perfect_detector.cfg")).map_err(|e| e.to_string())?;
    let ok_cfg = cfg.detector.efficiency == 1.0 && cfg.detector.dark_mean == 0.0 && cfg.detector.dark_std == 0.0;
    if !ok_cfg || cfg.detector.threshold_d != 0.0 || cfg.ensemble.n_seeds < 100 {
        return Err("perfect_detector.cfg is not an ideal detector with 100 seeds".into());
    }
    let e = run_ensemble(&cfg).map_err(|e| e.to_string())?;
    let a = e.advancement.ok_or("no seed detected both channels")?;
    check(
        a.mean <= 2.0 * a.se,
        format!("advancement {:.1} ns, 2 se = {:.2} ns, {} seeds", a.mean / NS, 2.0 * a.se / NS, a.n),
    )
}

/// Count after a phase-insensitive amplifier: Poisson with rate
/// `|sqrt(G n) + xi|^2`, `xi` complex Gaussian with `E|xi|^2 = G - 1`.
fn amplified_count(n: f64, g: f64, rng: &mut ChaCha8Rng) -> f64 {
    let s = (0.5 * (g - 1.0)).sqrt();
    let re = (g * n).sqrt() + s * rng.sample::<f64, _>(StandardNormal);
    let im = s * rng.sample::<f64, _>(StandardNormal);
    let rate = re * re + im * im;
    if rate <= 0.0 {
        0.0
    } else {
        Poisson::new(rate).unwrap().sample(rng)
    }
}

fn amplifier_moments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mean = 10f64.powf(rng.random_range(2.0..6.0));
        let g = rng.random_range(1.0..10.0);
        let want = amplify_moments(PhotonMoments::coherent(mean), g).map_err(|e| e.to_string())?;
        let v: Vec<f64> = (0..draws).map(|_| amplified_count(mean, g, &mut rng)).collect();
        let n = draws as f64;
        let m = v.iter().sum::<f64>() / n;
        let c2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let c4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let se_mean = (c2 / n).sqrt();
        let se_var = ((c4 - c2 * c2) / n).sqrt();
        let z = ((m - want.mean) / se_mean).abs().max(((c2 - want.variance) / se_var).abs());
        worst = worst.max(z);
    }
    let mut fano_ok = true;
    for mean in [0.0, 1.0, 1e2, 1e4, 1e6] {
        let mut last = 0.0;
        for k in 0..=90 {
            let g = 1.0 + 0.1 * k as f64;
            let f = amplify_moments(PhotonMoments::coherent(mean), g).map_err(|e| e.to_string())?.fano();
            fano_ok &= f.is_nan() && mean == 0.0 || f >= last;
            last = if f.is_nan() { last } else { f };
        }
    }
    check(worst < 4.0 && fano_ok, format!("worst deviation {worst:.2} standard errors over 20 pairs; Fano factor non-decreasing: {fano_ok}"))
}

fn analysis_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exact = true;
    for _ in 0..10_000 {
        let a: i64 = rng.random_range(0..100_000);
        let b: i64 = rng.random_range(0..100_000);
        let d: i64 = rng.random_range(0..1_000);
        let plain = (a + b != 0).then(|| (a - b) as f64 / (a + b) as f64);
        let eq1 = (a + b - d != 0).then(|| (a - b - d) as f64 / (a + b - d) as f64);
        exact &= visibility(a as f64, b as f64) == plain;
        exact &= visibility_corrected(a as f64, b as f64, d as f64) == eq1;
    }
    let mut sums = true;
    for _ in 0..200 {
        let (w, h) = (rng.random_range(8..64), rng.random_range(8..64));
        let counts: Vec<u32> = (0..w * h).map(|_| rng.random_range(0..65_536)).collect();
        let f = ImageFrame::new(w, h, 0.0, counts.clone());
        let r = Rect::new(rng.random_range(0..w / 2), rng.random_range(0..h / 2), rng.random_range(1..w / 2), rng.random_range(1..h / 2));
        let mut total: u64 = 0;
        for y in r.y..r.y + r.height {
            for x in r.x..r.x + r.width {
                total += counts[y * w + x] as u64;
            }
        }
        sums &= region_mean(&f, &r).map_err(|e| e.to_string())? == total as f64 / (r.width * r.height) as f64;
    }
    // SNR rising through 1 at 400 ns, the fast copy 20 ns earlier
    let step = 2.44 * NS;
    let delays = uniform_delays(0.0, 800.0 * NS, step);
    let trace = |shift: f64| VisibilityTrace {
        window: 10,
        points: delays
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let s = 0.3 + 0.7 * (((t + shift) - 400.0 * NS) / (30.0 * NS)).exp().min(20.0);
                TracePoint { delay: t, m: Some(s.sqrt()), dm: Some(1.0), snr: Some(s), warm_up: k < 10 }
            })
            .collect(),
    };
    let report = compare(&trace(0.0), &trace(20.0 * NS), &DetectionParams::default(), 190.0 * NS).map_err(|e| e.to_string())?;
    let adv = report.advancement.ok_or("shifted traces not detected")?;
    let shift_ok = (adv - 20.0 * NS).abs() <= step;
    check(
        exact && sums && shift_ok,
        format!("visibility exact: {exact}, region means exact: {sums}, 20 ns shift recovered as {:.2} ns", adv / NS),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<PathBuf, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_fastlight"))
            .args(["--quiet", "ensemble", "--seeds", "4", "--seed", "77", "--config"])
            .arg(configs().join("paper_fig2.cfg"))
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("ensemble exited with {status}"));
        }
        Ok(out)
    };
    let (a, b) = (run("a")?, run("b")?);
    let mut names: Vec<_> = std::fs::read_dir(&a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut same = !names.is_empty();
    for n in &names {
        same &= std::fs::read(a.join(n)).ok() == std::fs::read(b.join(n)).ok();
    }
    let count_b = std::fs::read_dir(&b).map_err(|e| e.to_string())?.count();
    check(same && count_b == names.len(), format!("{} output files byte-identical across two runs: {same}", names.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: &str, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {id} PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {id} FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    };
    let t = Instant::now();
    report("1", "relative peak advancement", t, relative_peak_advancement());
    let t = Instant::now();
    report("2", "physical-medium calibration", t, medium_calibration());
    let t = Instant::now();
    match paper_ensemble() {
        Ok(e) => {
            report("3", "unity-gain advancement window", t, advancement_window(&e));
            report("4", "positive detection advancement", t, positive_advancement(&e));
        }
        Err(err) => {
            report("3", "unity-gain advancement window", t, Err(err.clone()));
            report("4", "positive detection advancement", t, Err(err));
        }
    }
    let t = Instant::now();
    report("5", "perfect-detector null result", t, perfect_detector());
    let t = Instant::now();
    report("6", "amplifier-moment oracle", t, amplifier_moments());
    let t = Instant::now();
    report("7", "analysis-chain oracles", t, analysis_oracles());
    let t = Instant::now();
    report("8", "determinism", t, determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}

use num_complex::Complex64;
use proptest::prelude::*;

use fastlight::analysis::{visibility, visibility_corrected};
use fastlight::experiment::{run_ensemble, write_ensemble, ExperimentConfig};
use fastlight::medium::{calibrate_doublet, propagate, DoubletTarget, MediumSpec};
use fastlight::pulse::{from_spectrum, integrated_signal, make_gaussian_pulse, to_spectrum, SampledPulse, TimeGrid};
use fastlight::scene::{expected_frame, SceneSpec};

const NS: f64 = 1e-9;

fn max_rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let peak = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / peak
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spectrum_round_trip_conserves_energy(fwhm_ns in 20.0f64..400.0, offset in -0.2f64..0.2, photons in 1.0f64..1e8) {
        let grid = TimeGrid::new(0.0, 0.5 * NS, 8192).unwrap();
        let p = make_gaussian_pulse(grid, (0.5 + offset) * grid.t_end(), fwhm_ns * NS, photons).unwrap();
        let s = to_spectrum(&p);
        prop_assert!((s.energy() / p.sum_energy() - 1.0).abs() < 1e-9);
        let back = from_spectrum(&s, grid).unwrap();
        prop_assert!((back.sum_energy() / p.sum_energy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn integrated_signal_never_decreases(re in prop::collection::vec(-3.0f64..3.0, 16..64), im in prop::collection::vec(-3.0f64..3.0, 64)) {
        let n = re.len() & !1;
        let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
        let env: Vec<Complex64> = (0..n).map(|i| Complex64::new(re[i], im[i])).collect();
        let p = SampledPulse::from_envelope(grid, env).unwrap();
        let mut last = 0.0;
        for k in 0..=4 * (n - 1) {
            let v = integrated_signal(&p, k as f64 / 4.0).unwrap();
            prop_assert!(v >= last, "{} < {}", v, last);
            last = v;
        }
    }

    #[test]
    fn measured_fwhm_within_one_step(ratio in 8.0f64..4096.0) {
        let dt = 1.0 * NS;
        let fwhm = ratio * dt;
        let n = 2 * (4.0 * ratio).ceil() as usize + 16;
        let grid = TimeGrid::new(0.0, dt, n).unwrap();
        let p = make_gaussian_pulse(grid, 0.5 * grid.t_end(), fwhm, 1e6).unwrap();
        prop_assert!((p.fwhm().unwrap() - fwhm).abs() <= dt);
    }

    #[test]
    fn plain_visibility_is_bounded(a in 0.0f64..1e9, b in 0.0f64..1e9) {
        if let Some(m) = visibility(a, b) {
            prop_assert!(m.abs() <= 1.0);
        }
        prop_assert_eq!(visibility_corrected(a, b, 0.0), visibility(a, b));
    }
}

fn narrowband() -> (TimeGrid, f64, MediumSpec) {
    let m = calibrate_doublet(&DoubletTarget::default()).unwrap();
    let MediumSpec::Physical(p) = &m else { unreachable!() };
    let fwhm = 10.0 / (2.0 * p.lines[1].center_detuning);
    (TimeGrid::new(0.0, fwhm / 200.0, 4096).unwrap(), fwhm, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn physical_propagation_is_linear(
        ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0,
        shift in -0.1f64..0.1, width in 0.9f64..1.5,
    ) {
        let (grid, fwhm, m) = narrowband();
        let p1 = make_gaussian_pulse(grid, 0.5 * grid.t_end(), fwhm, 1e6).unwrap();
        let p2 = make_gaussian_pulse(grid, (0.5 + shift) * grid.t_end(), width * fwhm, 3e5).unwrap();
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        prop_assume!(a.norm() > 0.1 && b.norm() > 0.1);
        let mixed = propagate(&p1.scaled(a).superpose(&p2.scaled(b)).unwrap(), &m).unwrap();
        let parts = propagate(&p1, &m).unwrap().scaled(a).superpose(&propagate(&p2, &m).unwrap().scaled(b)).unwrap();
        prop_assert!(max_rel_diff(mixed.envelope(), parts.envelope()) < 1e-9);
    }
}

#[test]
fn stripe_to_flank_ratio_is_delay_independent() {
    let mut scene = SceneSpec::default();
    scene.stripe.contrast = 0.9;
    let grid = TimeGrid::spanning(0.0, 1600.0 * NS, 0.5 * NS).unwrap();
    let pulse = make_gaussian_pulse(grid, 500.0 * NS, 190.0 * NS, 3.8e6).unwrap();
    let band = |f: &fastlight::scene::ExpectedFrame, y0: usize| -> f64 {
        (y0..y0 + 3).flat_map(|y| (19..109).map(move |x| (x, y))).map(|(x, y)| f.counts[y * f.width + x]).sum()
    };
    let mut ratios = Vec::new();
    for k in 0..60 {
        let f = expected_frame(&scene, &pulse, k as f64 * 13.0 * NS, 2.44 * NS).unwrap();
        let flank = band(&f, 51);
        if flank > 1e-3 {
            ratios.push(band(&f, 63) / flank);
        }
    }
    assert!(ratios.len() > 40);
    let r0 = ratios[0];
    assert!(ratios.iter().all(|r| (r / r0 - 1.0).abs() < 1e-9), "{ratios:?}");
}

#[test]
fn every_artifact_carries_the_producing_config_hash() {
    let text = r#"
[pulse]
fwhm_ns = 190.0
photons_total = 3.8e6
t_peak_ns = 500.0
[grid]
t_start_ns = 0.0
t_end_ns = 1600.0
dt_ns = 0.5
[medium]
mode = "empirical"
advancement_ns = 90.0
compression = 0.8
[scene]
width = 48
height = 48
beam_waist = 16.0
beam_center_x = 24.0
beam_center_y = 24.0
stripe_row = 24.0
stripe_width = 6.0
stripe_contrast = 0.9
[detector]
efficiency = 0.3
dark_mean = 2.0
dark_std = 1.0
gate_width_ns = 2.44
[sweep]
start_ns = 0.0
stop_ns = 800.0
step_ns = 2.44
[analysis]
regions = { max = [[2, 16, 44, 2], [2, 30, 44, 2]], min = [2, 23, 44, 2] }
[ensemble]
n_seeds = 2
base_seed = 3
"#;
    let cfg = ExperimentConfig::parse(text).unwrap();
    let e = run_ensemble(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_ensemble(dir.path(), &cfg, &e).unwrap();
    let reloaded = ExperimentConfig::load(&dir.path().join("config.cfg")).unwrap();
    assert_eq!(reloaded, cfg);
    let want = format!("# config_hash {}", cfg.hash());
    for name in ["summary.txt", "per_seed.csv", "mean_reference.csv", "mean_fast.csv"] {
        let body = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(body.lines().next(), Some(want.as_str()), "{name}");
    }
}

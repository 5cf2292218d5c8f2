//! Browser bindings: pulse reshaping, amplifier noise and a single
//! reference-vs-fast detection run.

use wasm_bindgen::prelude::*;

use fastlight::amplifier::DetectionChannel;
use fastlight::experiment::{run_pair, ExperimentConfig, Prepared};
use fastlight::medium::{gain_profile, propagate, EmpiricalMedium, MediumSpec};
use fastlight::pulse::{make_gaussian_pulse, TimeGrid};

const NS: f64 = 1e-9;

fn js_err(e: fastlight::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Shared x axis with up to three y series. Missing values are NaN.
#[wasm_bindgen]
pub struct Curves {
    x: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

#[wasm_bindgen]
impl Curves {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn a(&self) -> Vec<f64> {
        self.a.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn b(&self) -> Vec<f64> {
        self.b.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn c(&self) -> Vec<f64> {
        self.c.clone()
    }
}

/// Input and advanced output intensity (photons/ns) and the power gain
/// `G(t)` between them, on a 0..1600 ns axis.
#[wasm_bindgen]
pub fn reshape_pulse(fwhm_ns: f64, advancement_ns: f64, compression: f64) -> Result<Curves, JsValue> {
    let grid = TimeGrid::spanning(0.0, 1600.0 * NS, 0.5 * NS).map_err(js_err)?;
    let input = make_gaussian_pulse(grid, 800.0 * NS, fwhm_ns * NS, 3.8e6).map_err(js_err)?;
    let medium = MediumSpec::Empirical(EmpiricalMedium { advancement: advancement_ns * NS, compression, gain_total: 1.0 });
    medium.validate().map_err(js_err)?;
    let output = propagate(&input, &medium).map_err(js_err)?;
    let gain = gain_profile(&input, &output, 1e-6 * input.peak_intensity()).map_err(js_err)?;
    let every = 8;
    let pick = |v: Vec<f64>| v.into_iter().step_by(every).map(|i| i * NS).collect::<Vec<_>>();
    Ok(Curves {
        x: grid.times().step_by(every).map(|t| t / NS).collect(),
        a: pick(input.intensity()),
        b: pick(output.intensity()),
        c: gain.values.iter().step_by(every).map(|g| g.unwrap_or(f64::NAN)).collect(),
    })
}

/// Detected mean, Fano factor and SNR relative to the unamplified case,
/// for power gains 1..`max_gain`.
#[wasm_bindgen]
pub fn amplifier_noise(mean_in: f64, max_gain: f64, efficiency: f64) -> Curves {
    let n = 200;
    let base = DetectionChannel::new(1.0, efficiency).moments(mean_in);
    let base_snr = base.mean * base.mean / base.variance;
    let mut out = Curves { x: Vec::new(), a: Vec::new(), b: Vec::new(), c: Vec::new() };
    for k in 0..=n {
        let g = 1.0 + (max_gain - 1.0).max(0.0) * k as f64 / n as f64;
        let m = DetectionChannel::new(g, efficiency).moments(mean_in);
        out.x.push(g);
        out.a.push(m.mean);
        out.b.push(m.fano());
        out.c.push(m.mean * m.mean / m.variance / base_snr);
    }
    out
}

/// One seed of both channels on a 64×64 camera.
#[wasm_bindgen]
pub struct Comparison {
    curves: Curves,
    t_reference: f64,
    t_fast: f64,
}

#[wasm_bindgen]
impl Comparison {
    /// Gate delay (ns), reference SNR, fast SNR.
    #[wasm_bindgen(getter)]
    pub fn curves(&self) -> Curves {
        Curves { x: self.curves.x.clone(), a: self.curves.a.clone(), b: self.curves.b.clone(), c: Vec::new() }
    }
    /// ns, NaN when never detected.
    #[wasm_bindgen(getter)]
    pub fn t_reference(&self) -> f64 {
        self.t_reference
    }
    #[wasm_bindgen(getter)]
    pub fn t_fast(&self) -> f64 {
        self.t_fast
    }
}

#[wasm_bindgen]
pub fn compare_run(efficiency: f64, advancement_ns: f64, dark_mean: f64, seed: u64) -> Result<Comparison, JsValue> {
    let text = format!(
        r#"
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
advancement_ns = {advancement_ns:?}
compression = 0.8
[scene]
width = 64
height = 64
beam_waist = 20.0
beam_center_x = 32.0
beam_center_y = 32.0
stripe_row = 32.0
stripe_width = 6.0
stripe_contrast = 0.9
[detector]
efficiency = {efficiency:?}
dark_mean = {dark_mean:?}
dark_std = {dark_std:?}
gate_width_ns = 2.44
[sweep]
start_ns = 0.0
stop_ns = 800.0
step_ns = 2.44
[analysis]
persistence = 10
regions = {{ max = [[2, 24, 60, 2], [2, 38, 60, 2]], min = [2, 31, 60, 2] }}
[ensemble]
n_seeds = 1
base_seed = {seed}
"#,
        dark_std = if dark_mean > 0.0 { 1.0 } else { 0.0 },
    );
    let cfg = ExperimentConfig::parse(&text).map_err(js_err)?;
    let prep = Prepared::new(&cfg).map_err(js_err)?;
    let run = run_pair(&prep, seed).map_err(js_err)?;
    let snr = |t: &fastlight::analysis::VisibilityTrace| t.snr().iter().map(|s| s.unwrap_or(f64::NAN)).collect();
    Ok(Comparison {
        curves: Curves { x: prep.delays.iter().map(|d| d / NS).collect(), a: snr(&run.reference), b: snr(&run.fast), c: Vec::new() },
        t_reference: run.report.t_detect_reference.map_or(f64::NAN, |t| t / NS),
        t_fast: run.report.t_detect_fast.map_or(f64::NAN, |t| t / NS),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reshaped_peak_moves_by_advancement() {
        let c = reshape_pulse(190.0, 90.0, 0.8).unwrap();
        let argmax = |v: &[f64]| v.iter().enumerate().fold((0, f64::MIN), |m, (i, &x)| if x > m.1 { (i, x) } else { m }).0;
        let shift = c.x[argmax(&c.a)] - c.x[argmax(&c.b)];
        assert!((shift - 90.0).abs() <= 4.0, "{shift}");
    }

    #[test]
    fn unity_gain_keeps_snr() {
        let c = amplifier_noise(100.0, 10.0, 1.0);
        assert_eq!(c.x[0], 1.0);
        assert!((c.c[0] - 1.0).abs() < 1e-12);
        assert!(c.c.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn gain_recovers_snr_lost_to_efficiency() {
        // high gain tends to (n + 1)^2 / (2n + 1) against eta * n without it
        let c = amplifier_noise(100.0, 1000.0, 0.3);
        let limit = 101.0 * 101.0 / 201.0 / 30.0;
        let last = *c.c.last().unwrap();
        assert!(last > 1.0 && last < limit && limit - last < 1e-2, "{last} vs {limit}");
    }

    #[test]
    fn comparison_runs() {
        let r = compare_run(0.3, 90.0, 2.0, 3).unwrap();
        assert_eq!(r.curves().x.len(), 328);
        assert!(r.t_reference.is_finite());
    }
}

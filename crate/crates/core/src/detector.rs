//! Gated intensified camera.
//!
//! Each exposure takes the expected input photons per pixel, passes them
//! through the gain stage and the quantum efficiency, samples a count, adds
//! Gaussian dark noise, applies the ADU gain and clamps/rounds to an integer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::amplifier::{DetectionChannel, NoiseTermReading};
use crate::error::{Error, Result};
use crate::pulse::{cumulative_trapezoid, window_integral, SampledPulse};
use crate::scene::{beam_pattern, frame_from_weights, ExpectedFrame, GateIntegrator, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Counts per pixel per gate.
    pub dark_mean: f64,
    pub dark_std: f64,
    /// Seconds.
    pub gate_width: f64,
    /// Detector threshold `D` used by the corrected visibility.
    pub threshold_d: f64,
    pub adu_gain: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            efficiency: 0.3,
            dark_mean: 2.0,
            dark_std: 1.0,
            gate_width: 2.44e-9,
            threshold_d: 0.0,
            adu_gain: 1.0,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidDetector(what.to_string()));
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad("efficiency must lie in (0, 1]");
        }
        if !(self.gate_width.is_finite() && self.gate_width > 0.0) {
            return bad("gate width must be positive");
        }
        if !(self.dark_std.is_finite() && self.dark_std >= 0.0) || !self.dark_mean.is_finite() {
            return bad("dark noise must be finite with non-negative spread");
        }
        if !(self.threshold_d.is_finite() && self.threshold_d >= 0.0) {
            return bad("threshold D must be non-negative");
        }
        if !(self.adu_gain.is_finite() && self.adu_gain > 0.0) {
            return bad("ADU gain must be positive");
        }
        Ok(())
    }
}

/// One gated exposure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    pub width: usize,
    pub height: usize,
    /// Gate opening time as raw f64 bits so frames stay `Eq`; read it with
    /// [`ImageFrame::gate_delay`].
    gate_delay_bits: u64,
    pub counts: Vec<u32>,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, gate_delay: f64, counts: Vec<u32>) -> Self {
        Self { width, height, gate_delay_bits: gate_delay.to_bits(), counts }
    }

    pub fn gate_delay(&self) -> f64 {
        f64::from_bits(self.gate_delay_bits)
    }

    pub fn at(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum()
    }
}

/// Frames ordered by gate delay on a uniform step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub width: usize,
    pub height: usize,
    pub gate_width: f64,
    pub seed: u64,
    pub frames: Vec<ImageFrame>,
}

impl FrameStack {
    pub fn new(width: usize, height: usize, gate_width: f64, seed: u64, frames: Vec<ImageFrame>) -> Result<Self> {
        let delays: Vec<f64> = frames.iter().map(ImageFrame::gate_delay).collect();
        check_uniform(&delays)?;
        if frames.iter().any(|f| f.width != width || f.height != height || f.counts.len() != width * height) {
            return Err(Error::Container("frame dimensions differ from stack".into()));
        }
        Ok(Self { width, height, gate_width, seed, frames })
    }

    pub fn delays(&self) -> Vec<f64> {
        self.frames.iter().map(ImageFrame::gate_delay).collect()
    }

    pub fn gate_step(&self) -> Option<f64> {
        (self.frames.len() > 1).then(|| self.frames[1].gate_delay() - self.frames[0].gate_delay())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Spatially integrated counts per frame.
    pub fn totals(&self) -> Vec<f64> {
        self.frames.iter().map(ImageFrame::total).collect()
    }
}

pub(crate) fn check_uniform(delays: &[f64]) -> Result<()> {
    if delays.len() < 2 {
        return Ok(());
    }
    let step = delays[1] - delays[0];
    if !(step > 0.0) {
        return Err(Error::NonUniformDelays);
    }
    for (k, d) in delays.iter().enumerate() {
        if (d - delays[0] - k as f64 * step).abs() > 1e-6 * step {
            return Err(Error::NonUniformDelays);
        }
    }
    Ok(())
}

/// `start, start + step, …` strictly below `stop`.
pub fn uniform_delays(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || !(stop > start) {
        return Vec::new();
    }
    let n = ((stop - start) / step - 1e-9).ceil() as usize;
    (0..n).map(|k| start + k as f64 * step).collect()
}

/// Independent, order-free RNG stream for one frame.
pub fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index);
    rng
}

/// Samples one frame from the input expectation `expected` and the power
/// gain the pulse saw during the gate.
pub fn expose<R: rand::Rng + ?Sized>(
    expected: &ExpectedFrame,
    gain: f64,
    det: &DetectorSpec,
    rng: &mut R,
) -> ImageFrame {
    expose_with(expected, gain, det, NoiseTermReading::MeanPhotonNumber, rng)
}

pub fn expose_with<R: rand::Rng + ?Sized>(
    expected: &ExpectedFrame,
    gain: f64,
    det: &DetectorSpec,
    reading: NoiseTermReading,
    rng: &mut R,
) -> ImageFrame {
    let channel = DetectionChannel { gain, efficiency: det.efficiency, reading };
    let counts = expected
        .counts
        .iter()
        .map(|&mean_in| {
            let signal = channel.sample(mean_in, rng);
            let dark = if det.dark_std > 0.0 {
                det.dark_mean + det.dark_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                det.dark_mean
            };
            (det.adu_gain * (signal + dark)).max(0.0).round() as u32
        })
        .collect();
    ImageFrame::new(expected.width, expected.height, expected.gate_delay, counts)
}

/// Intensity-weighted mean of `G(t)` over each gate, i.e. output photons over
/// input photons in the window. Gates without input light get unity gain.
pub fn gate_gains(pulse: &SampledPulse, gains: &[f64], delays: &[f64], gate_width: f64) -> Result<Vec<f64>> {
    let grid = pulse.grid();
    if gains.len() != grid.len() {
        return Err(Error::SizeMismatch { expected: grid.len(), got: gains.len() });
    }
    let intensity = pulse.intensity();
    let weighted: Vec<f64> = intensity.iter().zip(gains).map(|(i, g)| i * g).collect();
    let cum_i = cumulative_trapezoid(&intensity, grid.dt());
    let cum_w = cumulative_trapezoid(&weighted, grid.dt());
    let peak = pulse.peak_intensity();
    delays
        .iter()
        .map(|&d| {
            if !grid.contains(d) || !grid.contains(d + gate_width) {
                return Err(Error::GateOutsideGrid { start: d, end: d + gate_width });
            }
            let n_in = window_integral(&intensity, &cum_i, grid, d, d + gate_width);
            let n_out = window_integral(&weighted, &cum_w, grid, d, d + gate_width);
            Ok(if n_in > 1e-300 && n_in > 1e-15 * peak * gate_width { (n_out / n_in).max(0.0) } else { 1.0 })
        })
        .collect()
}

/// Sweeps the gate across the pulse: one exposure per delay, each with its
/// own RNG stream derived from `(seed, frame index)`.
pub fn gate_sweep(
    scene: &SceneSpec,
    pulse: &SampledPulse,
    gains: &[f64],
    det: &DetectorSpec,
    delays: &[f64],
    seed: u64,
) -> Result<FrameStack> {
    gate_sweep_with(scene, pulse, gains, det, delays, seed, NoiseTermReading::MeanPhotonNumber)
}

pub fn gate_sweep_with(
    scene: &SceneSpec,
    pulse: &SampledPulse,
    gains: &[f64],
    det: &DetectorSpec,
    delays: &[f64],
    seed: u64,
    reading: NoiseTermReading,
) -> Result<FrameStack> {
    scene.validate()?;
    det.validate()?;
    check_uniform(delays)?;
    let weights = beam_pattern(scene);
    let integrator = GateIntegrator::new(pulse);
    let photons: Vec<f64> =
        delays.iter().map(|&d| integrator.photons(d, det.gate_width)).collect::<Result<_>>()?;
    let gate_g = gate_gains(pulse, gains, delays, det.gate_width)?;

    let make = |k: usize| {
        let expected = frame_from_weights(&weights, photons[k], delays[k], det.gate_width);
        let mut rng = frame_rng(seed, k as u64);
        expose_with(&expected, gate_g[k], det, reading, &mut rng)
    };
    #[cfg(feature = "parallel")]
    let frames: Vec<ImageFrame> = {
        use rayon::prelude::*;
        (0..delays.len()).into_par_iter().map(make).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let frames: Vec<ImageFrame> = (0..delays.len()).map(make).collect();

    FrameStack::new(scene.grid.width, scene.grid.height, det.gate_width, seed, frames)
}

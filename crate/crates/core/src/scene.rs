//! Spatial pattern on the camera: Gaussian beam with one dark horizontal
//! stripe, and the expected photon count per pixel for a gate window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{window_integral, SampledPulse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_pitch")]
    pub pixel_pitch: f64,
}

fn default_pitch() -> f64 {
    1.0
}

impl PixelGrid {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stripe {
    pub center_row: f64,
    pub width: f64,
    /// 1 is fully dark.
    pub contrast: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub grid: PixelGrid,
    /// 1/e² intensity radius in pixels.
    pub beam_waist: f64,
    pub beam_center: (f64, f64),
    pub stripe: Stripe,
    /// Linear one-pixel ramp at the stripe edges.
    #[serde(default = "default_true")]
    pub edge_smoothing: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            grid: PixelGrid { width: 128, height: 128, pixel_pitch: 1.0 },
            beam_waist: 40.0,
            beam_center: (64.0, 64.0),
            stripe: Stripe { center_row: 64.0, width: 12.0, contrast: 1.0 },
            edge_smoothing: true,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.width < 16 || g.height < 16 {
            return Err(Error::InvalidScene(format!("grid {}x{} below 16x16", g.width, g.height)));
        }
        if !(self.beam_waist.is_finite() && self.beam_waist > 0.0) {
            return Err(Error::InvalidScene(format!("beam waist {}", self.beam_waist)));
        }
        let s = &self.stripe;
        if !(0.0..=1.0).contains(&s.contrast) {
            return Err(Error::InvalidScene(format!("stripe contrast {}", s.contrast)));
        }
        let top = s.center_row - 0.5 * s.width;
        let bottom = s.center_row + 0.5 * s.width;
        if !(s.width > 0.0) || top < 0.0 || bottom > (g.height - 1) as f64 {
            return Err(Error::InvalidScene("stripe not inside the grid".into()));
        }
        Ok(())
    }

    /// Intensity transmission of the mask for pixel row `y`.
    pub fn stripe_transmission(&self, y: f64) -> f64 {
        let s = &self.stripe;
        let d = (y - s.center_row).abs() - 0.5 * s.width;
        if self.edge_smoothing {
            if d <= -0.5 {
                1.0 - s.contrast
            } else if d >= 0.5 {
                1.0
            } else {
                1.0 - s.contrast * (0.5 - d)
            }
        } else if d < 0.0 {
            1.0 - s.contrast
        } else {
            1.0
        }
    }
}

/// Per-pixel fraction of the beam power, row-major, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub width: usize,
    pub height: usize,
    pub weights: Vec<f64>,
}

impl WeightMap {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.width + x]
    }
}

pub fn beam_pattern(scene: &SceneSpec) -> WeightMap {
    let g = scene.grid;
    let (cx, cy) = scene.beam_center;
    let w2 = scene.beam_waist * scene.beam_waist;
    let mut weights = Vec::with_capacity(g.len());
    for y in 0..g.height {
        let yf = y as f64;
        let t = scene.stripe_transmission(yf);
        for x in 0..g.width {
            let r2 = (x as f64 - cx).powi(2) + (yf - cy).powi(2);
            weights.push((-2.0 * r2 / w2).exp() * t);
        }
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    WeightMap { width: g.width, height: g.height, weights }
}

/// Expected photons per pixel inside one gate window.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedFrame {
    pub width: usize,
    pub height: usize,
    pub gate_delay: f64,
    pub gate_width: f64,
    pub counts: Vec<f64>,
}

impl ExpectedFrame {
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Precomputed intensity integrals of one pulse for fast gate integration.
#[derive(Debug, Clone)]
pub struct GateIntegrator<'a> {
    pulse: &'a SampledPulse,
    intensity: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<'a> GateIntegrator<'a> {
    pub fn new(pulse: &'a SampledPulse) -> Self {
        let intensity = pulse.intensity();
        let cumulative = crate::pulse::cumulative_trapezoid(&intensity, pulse.grid().dt());
        Self { pulse, intensity, cumulative }
    }

    /// Photons arriving in `[start, start + width]`.
    pub fn photons(&self, start: f64, width: f64) -> Result<f64> {
        let grid = self.pulse.grid();
        let end = start + width;
        if !(width > 0.0) || !grid.contains(start) || !grid.contains(end) {
            return Err(Error::GateOutsideGrid { start, end });
        }
        Ok(window_integral(&self.intensity, &self.cumulative, grid, start, end).max(0.0))
    }
}

pub fn expected_frame(
    scene: &SceneSpec,
    pulse: &SampledPulse,
    gate_start: f64,
    gate_width: f64,
) -> Result<ExpectedFrame> {
    let photons = GateIntegrator::new(pulse).photons(gate_start, gate_width)?;
    Ok(frame_from_weights(&beam_pattern(scene), photons, gate_start, gate_width))
}

pub(crate) fn frame_from_weights(
    weights: &WeightMap,
    photons: f64,
    gate_delay: f64,
    gate_width: f64,
) -> ExpectedFrame {
    ExpectedFrame {
        width: weights.width,
        height: weights.height,
        gate_delay,
        gate_width,
        counts: weights.weights.iter().map(|w| w * photons).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{make_gaussian_pulse, tau_from_fwhm, TimeGrid};
    use proptest::prelude::*;

    const NS: f64 = 1e-9;

    fn pulse() -> SampledPulse {
        let grid = TimeGrid::spanning(0.0, 2000.0 * NS, 0.5 * NS).unwrap();
        make_gaussian_pulse(grid, 1000.0 * NS, 190.0 * NS, 3.8e6).unwrap()
    }

    /// erf via the Abramowitz-Stegun 7.1.26 rational fit, |err| < 1.5e-7.
    fn erf_as(x: f64) -> f64 {
        let s = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp();
        s * y
    }

    #[test]
    fn no_mask_peaks_at_center() {
        let mut scene = SceneSpec::default();
        scene.stripe.contrast = 0.0;
        let w = beam_pattern(&scene);
        let (imax, _) = w
            .weights
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_eq!((imax % 128, imax / 128), (64, 64));
    }

    #[test]
    fn dark_stripe_gives_two_lobes() {
        let w = beam_pattern(&SceneSpec::default());
        for y in 59..=69 {
            assert!(w.at(64, y) < 1e-15, "row {y}");
        }
        let column: Vec<f64> = (0..128).map(|y| w.at(64, y)).collect();
        let upper = column[..64].iter().cloned().fold(0.0, f64::max);
        let lower = column[64..].iter().cloned().fold(0.0, f64::max);
        assert!(upper > 0.0 && lower > 0.0);
        assert!(column[64] < 1e-3 * upper);
    }

    #[test]
    fn validation() {
        let mut s = SceneSpec::default();
        s.stripe.center_row = 2.0;
        assert!(s.validate().is_err());
        let mut s = SceneSpec::default();
        s.grid.width = 8;
        assert!(s.validate().is_err());
        let mut s = SceneSpec::default();
        s.stripe.contrast = 1.5;
        assert!(s.validate().is_err());
        assert!(SceneSpec::default().validate().is_ok());
    }

    #[test]
    fn full_gate_collects_everything() {
        let mut scene = SceneSpec::default();
        scene.stripe.contrast = 0.0;
        let p = pulse();
        let f = expected_frame(&scene, &p, 0.0, p.grid().t_end()).unwrap();
        assert!((f.total() / 3.8e6 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn peak_gate_matches_erf_difference() {
        let p = pulse();
        let gate = 2.44 * NS;
        let f = expected_frame(&SceneSpec::default(), &p, 1000.0 * NS - 0.5 * gate, gate).unwrap();
        let tau = tau_from_fwhm(190.0 * NS);
        let want = 3.8e6 * erf_as(0.5 * gate / tau);
        assert!((want - 4.58e4).abs() < 0.01e4);
        assert!((f.total() / want - 1.0).abs() < 1e-5, "{} vs {want}", f.total());
    }

    #[test]
    fn gate_before_pulse_is_dark() {
        let f = expected_frame(&SceneSpec::default(), &pulse(), 10.0 * NS, 2.44 * NS).unwrap();
        assert!(f.total() < 1e-20);
    }

    #[test]
    fn gate_outside_grid() {
        assert!(matches!(
            expected_frame(&SceneSpec::default(), &pulse(), 1999.0 * NS, 2.44 * NS),
            Err(Error::GateOutsideGrid { .. })
        ));
    }

    #[test]
    fn contiguous_sweep_conserves_photons() {
        let p = pulse();
        let scene = SceneSpec::default();
        let gate = 2.44 * NS;
        let n = (p.grid().t_end() / gate).floor() as usize;
        let integ = GateIntegrator::new(&p);
        let total: f64 = (0..n).map(|k| integ.photons(k as f64 * gate, gate).unwrap()).sum();
        assert!((total / 3.8e6 - 1.0).abs() < 1e-6);
        // spatial ratio independent of gate position
        let w = beam_pattern(&scene);
        let ratio = |k: usize| {
            let f = frame_from_weights(&w, integ.photons(k as f64 * gate, gate).unwrap(), 0.0, gate);
            f.counts[57 * 128 + 64] / f.counts[40 * 128 + 70]
        };
        let r0 = ratio(300);
        for k in [320, 400, 450] {
            assert!((ratio(k) / r0 - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(waist in 5.0f64..80.0, cx in 10.0f64..100.0, cy in 10.0f64..100.0,
                              row in 20.0f64..100.0, width in 1.0f64..20.0, contrast in 0.0f64..1.0,
                              smooth in any::<bool>()) {
            let scene = SceneSpec {
                grid: PixelGrid { width: 120, height: 120, pixel_pitch: 1.0 },
                beam_waist: waist,
                beam_center: (cx, cy),
                stripe: Stripe { center_row: row, width, contrast },
                edge_smoothing: smooth,
            };
            let total: f64 = beam_pattern(&scene).weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

//! Pulse envelopes on a uniform time grid.
//!
//! The envelope is a complex field amplitude normalised so that
//! `|envelope|²` is a photon flux (photons per second). All time integrals
//! use the trapezoid rule.
//!
//! Spectra use the optics sign convention
//! `E(t) = ∫ X(f) exp(-2πi f (t - t_start)) df`, which makes a positive
//! phase slope `dφ/df` a delay.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Endpoint intensity must stay below this fraction of the peak.
pub const ENDPOINT_FRACTION: f64 = 1e-6;
/// Minimum grid span in units of the pulse FWHM.
pub const MIN_SPAN_FWHM: f64 = 6.0;

/// Uniform sampling of the time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_samples: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || !t_start.is_finite() {
            return Err(Error::InvalidGrid(format!("dt = {dt:e}, t_start = {t_start:e}")));
        }
        if n_samples < 16 || !n_samples.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_samples = {n_samples}, need an even count >= 16"
            )));
        }
        Ok(Self { t_start, dt, n_samples })
    }

    /// Grid covering `[t_start, t_end]` with step `dt`, rounded up to an even
    /// sample count.
    pub fn spanning(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end > t_start) || !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("[{t_start:e}, {t_end:e}] step {dt:e}")));
        }
        let mut n = ((t_end - t_start) / dt).round() as usize + 1;
        if n % 2 == 1 {
            n += 1;
        }
        Self::new(t_start, dt, n.max(16))
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }

    /// Time of the last sample.
    pub fn t_end(&self) -> f64 {
        self.time(self.n_samples - 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(move |i| self.time(i))
    }

    pub fn contains(&self, t: f64) -> bool {
        let eps = 1e-9 * self.dt;
        t >= self.t_start - eps && t <= self.t_end() + eps
    }

    /// Frequency spacing of the matching DFT.
    pub fn df(&self) -> f64 {
        1.0 / (self.n_samples as f64 * self.dt)
    }

    /// Frequency of DFT bin `k` (negative frequencies in the upper half).
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.n_samples as isize;
        let k = k as isize;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * self.df()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.frequency(k)).collect()
    }
}

/// Complex field envelope sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPulse {
    grid: TimeGrid,
    envelope: Vec<Complex64>,
    photons_total: f64,
}

impl SampledPulse {
    /// Wraps an envelope; the photon total is the trapezoid integral of its
    /// intensity.
    pub fn from_envelope(grid: TimeGrid, envelope: Vec<Complex64>) -> Result<Self> {
        if envelope.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), got: envelope.len() });
        }
        let photons_total = trapezoid(envelope.iter().map(|e| e.norm_sqr()), grid.dt());
        Ok(Self { grid, envelope, photons_total })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self { grid, envelope: vec![Complex64::new(0.0, 0.0); grid.len()], photons_total: 0.0 }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn envelope(&self) -> &[Complex64] {
        &self.envelope
    }

    pub fn photons_total(&self) -> f64 {
        self.photons_total
    }

    /// Photon flux `|E(t)|²` per sample.
    pub fn intensity(&self) -> Vec<f64> {
        self.envelope.iter().map(|e| e.norm_sqr()).collect()
    }

    pub fn peak_intensity(&self) -> f64 {
        self.envelope.iter().map(|e| e.norm_sqr()).fold(0.0, f64::max)
    }

    /// Rectangle-rule energy `dt Σ|E|²`, the quantity preserved exactly by
    /// the DFT pair.
    pub fn sum_energy(&self) -> f64 {
        self.grid.dt() * self.envelope.iter().map(|e| e.norm_sqr()).sum::<f64>()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let envelope = self.envelope.iter().map(|e| e * factor).collect();
        Self {
            grid: self.grid,
            envelope,
            photons_total: self.photons_total * factor.norm_sqr(),
        }
    }

    /// Coherent sum of two envelopes on the same grid.
    pub fn superpose(&self, other: &SampledPulse) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let envelope = self.envelope.iter().zip(&other.envelope).map(|(a, b)| a + b).collect();
        Self::from_envelope(self.grid, envelope)
    }

    /// Cumulative trapezoid integral of the intensity, one value per sample.
    pub fn cumulative(&self) -> Vec<f64> {
        cumulative_trapezoid(&self.intensity(), self.grid.dt())
    }

    /// Intensity full width at half maximum, by linear interpolation of the
    /// half-maximum crossings around the highest sample.
    pub fn fwhm(&self) -> Result<f64> {
        fwhm_of(&self.intensity(), self.grid.dt())
    }
}

/// Spectrum of a pulse, DFT ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    df: f64,
    components: Vec<Complex64>,
    photons_total: f64,
}

impl Spectrum {
    pub fn new(df: f64, components: Vec<Complex64>, photons_total: f64) -> Self {
        Self { df, components, photons_total }
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Complex64] {
        &mut self.components
    }

    pub fn photons_total(&self) -> f64 {
        self.photons_total
    }

    /// `df Σ|X|²`; equals [`SampledPulse::sum_energy`] of the source pulse.
    pub fn energy(&self) -> f64 {
        self.df * self.components.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    }
}

/// Gaussian intensity pulse `I(t) = I₀ exp(-(t - t_peak)²/τ²)` with
/// `fwhm = 2τ√ln2`, normalised to `photons_total` by the trapezoid rule.
pub fn make_gaussian_pulse(
    grid: TimeGrid,
    t_peak: f64,
    fwhm: f64,
    photons_total: f64,
) -> Result<SampledPulse> {
    if !(fwhm.is_finite() && fwhm > 0.0) || !(photons_total >= 0.0) || !t_peak.is_finite() {
        return Err(Error::PulseExceedsGrid(format!(
            "fwhm {fwhm:e}, photons {photons_total:e}, t_peak {t_peak:e}"
        )));
    }
    if fwhm <= 4.0 * grid.dt() {
        return Err(Error::GridTooCoarse { fwhm, limit: fwhm / 4.0 });
    }
    let tau = fwhm / (2.0 * LN_2.sqrt());
    let span = grid.t_end() - grid.t_start();
    if span < MIN_SPAN_FWHM * fwhm {
        return Err(Error::PulseExceedsGrid(format!(
            "grid span {span:e} s shorter than {MIN_SPAN_FWHM} x fwhm"
        )));
    }
    // intensity at the nearer endpoint relative to the peak
    let edge = (t_peak - grid.t_start()).min(grid.t_end() - t_peak);
    if edge <= 0.0 || (-(edge / tau).powi(2)).exp() >= ENDPOINT_FRACTION {
        return Err(Error::PulseExceedsGrid(format!(
            "peak at {t_peak:e} s too close to grid edge"
        )));
    }
    if photons_total == 0.0 {
        return Ok(SampledPulse::zero(grid));
    }
    let shape: Vec<Complex64> = grid
        .times()
        .map(|t| {
            let x = (t - t_peak) / tau;
            Complex64::new((-0.5 * x * x).exp(), 0.0)
        })
        .collect();
    let raw = trapezoid(shape.iter().map(|e| e.norm_sqr()), grid.dt());
    let amp = (photons_total / raw).sqrt();
    let envelope = shape.into_iter().map(|e| e * amp).collect();
    Ok(SampledPulse { grid, envelope, photons_total })
}

/// Continuous-FT approximation `X_k = dt Σ_n E_n exp(+2πi kn/N)`.
pub fn to_spectrum(pulse: &SampledPulse) -> Spectrum {
    let grid = pulse.grid();
    let mut buf = pulse.envelope().to_vec();
    plan(buf.len(), false).process(&mut buf);
    let dt = grid.dt();
    for c in &mut buf {
        *c *= dt;
    }
    Spectrum { df: grid.df(), components: buf, photons_total: pulse.photons_total() }
}

/// Inverse of [`to_spectrum`]: `E_n = df Σ_k X_k exp(-2πi kn/N)`.
pub fn from_spectrum(spec: &Spectrum, grid: TimeGrid) -> Result<SampledPulse> {
    if spec.len() != grid.len() {
        return Err(Error::SizeMismatch { expected: grid.len(), got: spec.len() });
    }
    let mut buf = spec.components().to_vec();
    plan(buf.len(), true).process(&mut buf);
    let df = grid.df();
    for c in &mut buf {
        *c *= df;
    }
    SampledPulse::from_envelope(grid, buf)
}

/// Location of the intensity maximum refined by a three-point parabola.
/// Ties go to the earliest sample.
pub fn peak_time(pulse: &SampledPulse) -> Result<f64> {
    let intensity = pulse.intensity();
    let t = peak_position(&intensity).ok_or(Error::ZeroPulse)?;
    Ok(pulse.grid().t_start() + t * pulse.grid().dt())
}

/// Fractional sample index of the maximum of `values`, parabolic refinement,
/// earliest on ties. `None` when every value is zero or non-finite.
pub fn peak_position(values: &[f64]) -> Option<f64> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some(b) if v <= values[b] => {}
            _ => best = Some(i),
        }
    }
    let i = best?;
    if values[i] <= 0.0 {
        return None;
    }
    if i == 0 || i + 1 == values.len() {
        return Some(i as f64);
    }
    let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
    if !(a.is_finite() && c.is_finite()) {
        return Some(i as f64);
    }
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return Some(i as f64);
    }
    Some(i as f64 + 0.5 * (a - c) / denom)
}

/// Photons collected from the start of the grid up to `t`.
pub fn integrated_signal(pulse: &SampledPulse, t: f64) -> Result<f64> {
    let grid = pulse.grid();
    if !grid.contains(t) {
        return Err(Error::TimeOutsideGrid { t, start: grid.t_start(), end: grid.t_end() });
    }
    let intensity = pulse.intensity();
    Ok(integral_to(&intensity, grid, t))
}

/// Trapezoid integral of `samples` (on `grid`) from the grid start to `t`,
/// with linear interpolation inside the last partial interval. `t` is
/// clamped to the grid.
pub(crate) fn integral_to(samples: &[f64], grid: &TimeGrid, t: f64) -> f64 {
    let dt = grid.dt();
    let x = ((t - grid.t_start()) / dt).clamp(0.0, (grid.len() - 1) as f64);
    let i = x.floor() as usize;
    let frac = x - i as f64;
    let mut acc = 0.0;
    for k in 0..i {
        acc += 0.5 * (samples[k] + samples[k + 1]) * dt;
    }
    if frac > 0.0 && i + 1 < samples.len() {
        let mid = samples[i] + frac * (samples[i + 1] - samples[i]);
        acc += 0.5 * (samples[i] + mid) * frac * dt;
    }
    acc
}

/// Integral over `[t0, t1]` using a precomputed cumulative trapezoid array.
pub(crate) fn window_integral(
    samples: &[f64],
    cumulative: &[f64],
    grid: &TimeGrid,
    t0: f64,
    t1: f64,
) -> f64 {
    integral_from_cumulative(samples, cumulative, grid, t1)
        - integral_from_cumulative(samples, cumulative, grid, t0)
}

fn integral_from_cumulative(samples: &[f64], cumulative: &[f64], grid: &TimeGrid, t: f64) -> f64 {
    let dt = grid.dt();
    let x = ((t - grid.t_start()) / dt).clamp(0.0, (grid.len() - 1) as f64);
    let i = x.floor() as usize;
    let frac = x - i as f64;
    let mut acc = cumulative[i];
    if frac > 0.0 && i + 1 < samples.len() {
        let mid = samples[i] + frac * (samples[i + 1] - samples[i]);
        acc += 0.5 * (samples[i] + mid) * frac * dt;
    }
    acc
}

pub(crate) fn trapezoid(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    for v in values {
        if let Some(p) = prev {
            acc += 0.5 * (p + v) * dt;
        }
        prev = Some(v);
    }
    acc
}

pub(crate) fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * (values[i - 1] + v) * dt;
        }
        out.push(acc);
    }
    out
}

/// Full width at half maximum of a sampled non-negative curve, in units of
/// `dx`.
pub fn fwhm_of(values: &[f64], dx: f64) -> Result<f64> {
    let peak_idx = values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if v <= b => best,
            _ => Some((i, v)),
        })
        .ok_or(Error::ZeroPulse)?
        .0;
    let half = 0.5 * values[peak_idx];
    if half <= 0.0 {
        return Err(Error::ZeroPulse);
    }
    let mut left = None;
    for i in (0..peak_idx).rev() {
        if values[i] < half {
            let f = (half - values[i]) / (values[i + 1] - values[i]);
            left = Some(i as f64 + f);
            break;
        }
    }
    let mut right = None;
    for i in peak_idx + 1..values.len() {
        if values[i] < half {
            let f = (values[i - 1] - half) / (values[i - 1] - values[i]);
            right = Some((i - 1) as f64 + f);
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok((r - l) * dx),
        _ => Err(Error::PulseExceedsGrid("half maximum not reached inside grid".into())),
    }
}

/// Gaussian 1/e intensity half width for a given FWHM.
pub fn tau_from_fwhm(fwhm: f64) -> f64 {
    fwhm / (2.0 * LN_2.sqrt())
}

/// Intensity FWHM in frequency of a transform-limited Gaussian.
pub fn gaussian_spectral_fwhm(fwhm_t: f64) -> f64 {
    2.0 * LN_2 / (PI * fwhm_t)
}

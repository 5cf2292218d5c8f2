//! Dispersive gain medium.
//!
//! A physical medium is a set of Lorentzian gain lines whose complex
//! response gives `H(f) = exp[Σ s·iγ/(f − δ + iγ)]`, with `f` the offset from
//! the pulse carrier. Real part of the exponent is the amplitude gain, the
//! imaginary part the phase; both come from the same analytic function so
//! they are Kramers-Kronig consistent. Between two lines the phase slope is
//! negative, which advances the pulse peak.
//!
//! An empirical medium skips the spectral model and maps a Gaussian onto an
//! advanced, compressed Gaussian.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{from_spectrum, make_gaussian_pulse, peak_time, to_spectrum, SampledPulse};
use crate::SPEED_OF_LIGHT;

/// One Lorentzian gain line, detuned from the pulse carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainLine {
    /// Hz, relative to the carrier.
    pub center_detuning: f64,
    /// Hz.
    pub half_width: f64,
    /// Amplitude-gain exponent at line centre: `|H| = exp(strength)`.
    pub strength: f64,
}

impl GainLine {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::InvalidMedium(format!("half width {}", self.half_width)));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::InvalidMedium(format!("strength {}", self.strength)));
        }
        if !self.center_detuning.is_finite() {
            return Err(Error::InvalidMedium("non-finite detuning".into()));
        }
        Ok(())
    }

    /// Complex exponent contributed at offset `f`.
    fn log_response(&self, f: f64) -> Complex64 {
        let i_gamma = Complex64::new(0.0, self.half_width);
        self.strength * i_gamma / (Complex64::new(f - self.center_detuning, 0.0) + i_gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalMedium {
    pub lines: Vec<GainLine>,
    /// Cell length in metres.
    pub length: f64,
}

impl PhysicalMedium {
    /// `ln H(f)`; its imaginary part is the unwrapped phase.
    pub fn log_response(&self, f: f64) -> Complex64 {
        self.lines.iter().map(|l| l.log_response(f)).sum()
    }

    pub fn response(&self, f: f64) -> Complex64 {
        self.log_response(f).exp()
    }

    pub fn phase(&self, f: f64) -> f64 {
        self.log_response(f).im
    }

    /// Half width of the band over which the response is sampled for
    /// derivatives and in-band gain: every line centre ±20 half widths.
    pub fn band(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| l.center_detuning.abs() + 20.0 * l.half_width)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMedium {
    /// Peak advancement in seconds (positive = earlier).
    pub advancement: f64,
    /// Output FWHM over input FWHM.
    pub compression: f64,
    /// Output photon total over input photon total.
    pub gain_total: f64,
}

impl Default for EmpiricalMedium {
    fn default() -> Self {
        Self { advancement: 90e-9, compression: 0.8, gain_total: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MediumSpec {
    Vacuum,
    Physical(PhysicalMedium),
    Empirical(EmpiricalMedium),
}

impl MediumSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MediumSpec::Vacuum => Ok(()),
            MediumSpec::Physical(p) => {
                if !(p.length.is_finite() && p.length > 0.0) {
                    return Err(Error::InvalidMedium(format!("length {}", p.length)));
                }
                if p.lines.is_empty() {
                    return Err(Error::InvalidMedium("physical medium needs a gain line".into()));
                }
                p.lines.iter().try_for_each(GainLine::validate)
            }
            MediumSpec::Empirical(e) => {
                if !e.advancement.is_finite() {
                    return Err(Error::InvalidMedium("non-finite advancement".into()));
                }
                if !(e.compression > 0.0 && e.compression <= 1.0) {
                    return Err(Error::InvalidMedium(format!("compression {}", e.compression)));
                }
                if !(e.gain_total.is_finite() && e.gain_total > 0.0) {
                    return Err(Error::InvalidMedium(format!("gain_total {}", e.gain_total)));
                }
                Ok(())
            }
        }
    }

    fn physical(&self) -> Result<PhysicalMedium> {
        match self {
            MediumSpec::Vacuum => Ok(PhysicalMedium { lines: Vec::new(), length: 1.0 }),
            MediumSpec::Physical(p) => Ok(p.clone()),
            MediumSpec::Empirical(_) => Err(Error::EmpiricalMode),
        }
    }
}

/// Summary of the dispersion at the carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionReport {
    pub group_index: f64,
    /// m/s; infinite when the group index is zero.
    pub group_velocity: f64,
    /// Arrival delay relative to vacuum, seconds (negative = advanced).
    pub delay: f64,
    /// Power gain `|H(0)|²`.
    pub gain_at_carrier: f64,
    /// Largest power gain over the sampled band.
    pub max_gain_in_band: f64,
}

pub fn transfer_function(medium: &MediumSpec, freq_offsets: &[f64]) -> Result<Vec<Complex64>> {
    let p = medium.physical()?;
    Ok(freq_offsets.iter().map(|&f| p.response(f)).collect())
}

/// Group index at `probe_offset` from a Richardson-extrapolated central
/// difference of the phase: `n_g = 1 + (c/L)·dφ/dω`.
pub fn group_index(medium: &MediumSpec, probe_offset: f64) -> Result<f64> {
    let p = match medium {
        MediumSpec::Vacuum => return Ok(1.0),
        MediumSpec::Empirical(_) => return Err(Error::EmpiricalMode),
        MediumSpec::Physical(p) => p,
    };
    if p.lines.is_empty() {
        return Ok(1.0);
    }
    let band = p.band();
    if !probe_offset.is_finite() || probe_offset.abs() > band {
        return Err(Error::ProbeOutsideBand { offset: probe_offset, band });
    }
    let h = 2.0 * band / 1e4;
    let d = |h: f64| (p.phase(probe_offset + h) - p.phase(probe_offset - h)) / (2.0 * h);
    let slope = (4.0 * d(0.5 * h) - d(h)) / 3.0;
    Ok(1.0 + SPEED_OF_LIGHT / p.length * slope / (2.0 * PI))
}

/// Delay relative to vacuum after `length` metres: `L/v_g − L/c`.
pub fn group_delay(group_index: f64, length: f64) -> f64 {
    length * (group_index - 1.0) / SPEED_OF_LIGHT
}

pub fn dispersion_report(medium: &MediumSpec) -> Result<DispersionReport> {
    let p = medium.physical()?;
    let n_g = group_index(medium, 0.0)?;
    let length = p.length;
    let v_g = if n_g != 0.0 { SPEED_OF_LIGHT / n_g } else { f64::INFINITY };
    let delay = length / v_g - length / SPEED_OF_LIGHT;
    let gain_at_carrier = p.response(0.0).norm_sqr();
    let band = p.band();
    let steps = 20_000;
    let max_gain_in_band = (0..=steps)
        .map(|k| -band + 2.0 * band * k as f64 / steps as f64)
        .chain(p.lines.iter().map(|l| l.center_detuning))
        .map(|f| p.response(f).norm_sqr())
        .fold(gain_at_carrier, f64::max);
    Ok(DispersionReport {
        group_index: n_g,
        group_velocity: v_g,
        delay,
        gain_at_carrier,
        max_gain_in_band,
    })
}

/// Spectral-energy fraction tolerated where the transfer function is not
/// resolved.
const BAND_LEAKAGE: f64 = 1e-9;

/// Sends a pulse through the medium.
pub fn propagate(pulse: &SampledPulse, medium: &MediumSpec) -> Result<SampledPulse> {
    medium.validate().or_else(|e| match (medium, &e) {
        // an empty line list is the identity medium
        (MediumSpec::Physical(p), Error::InvalidMedium(_)) if p.lines.is_empty() => Ok(()),
        _ => Err(e),
    })?;
    match medium {
        MediumSpec::Vacuum => Ok(pulse.clone()),
        MediumSpec::Physical(p) => propagate_physical(pulse, p),
        MediumSpec::Empirical(e) => propagate_empirical(pulse, e),
    }
}

fn propagate_physical(pulse: &SampledPulse, medium: &PhysicalMedium) -> Result<SampledPulse> {
    let grid = *pulse.grid();
    let mut spec = to_spectrum(pulse);
    check_band(&spec.components().iter().map(|c| c.norm_sqr()).collect::<Vec<_>>(), &grid, medium)?;
    for (k, c) in spec.components_mut().iter_mut().enumerate() {
        *c *= medium.response(grid.frequency(k));
    }
    from_spectrum(&spec, grid)
}

fn check_band(power: &[f64], grid: &crate::pulse::TimeGrid, medium: &PhysicalMedium) -> Result<()> {
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return Ok(());
    }
    let n = power.len();
    // energy near Nyquist aliases
    let edge: f64 = (0..n)
        .filter(|&k| grid.frequency(k).abs() > 0.45 * n as f64 * grid.df())
        .map(|k| power[k])
        .sum();
    if edge / total > BAND_LEAKAGE {
        return Err(Error::BandViolation(format!(
            "{:.2e} of spectral energy near the Nyquist frequency",
            edge / total
        )));
    }
    for line in &medium.lines {
        if grid.df() <= 0.25 * line.half_width {
            continue;
        }
        // spectral density interpolated at the line, spread over ±10γ
        let near = interpolate_power(power, grid, line.center_detuning) * 20.0 * line.half_width / grid.df();
        if near / total > BAND_LEAKAGE {
            return Err(Error::BandViolation(format!(
                "line at {:.3e} Hz unresolved by df = {:.3e} Hz but carries {:.2e} of the spectrum",
                line.center_detuning,
                grid.df(),
                near / total
            )));
        }
    }
    Ok(())
}

fn interpolate_power(power: &[f64], grid: &crate::pulse::TimeGrid, f: f64) -> f64 {
    let n = power.len() as isize;
    let x = f / grid.df();
    let k0 = x.floor() as isize;
    let frac = x - k0 as f64;
    let at = |k: isize| power[k.rem_euclid(n) as usize];
    (1.0 - frac) * at(k0) + frac * at(k0 + 1)
}

fn propagate_empirical(pulse: &SampledPulse, medium: &EmpiricalMedium) -> Result<SampledPulse> {
    if pulse.photons_total() == 0.0 {
        return Ok(SampledPulse::zero(*pulse.grid()));
    }
    let t_peak = peak_time(pulse)?;
    let fwhm = pulse.fwhm()?;
    make_gaussian_pulse(
        *pulse.grid(),
        t_peak - medium.advancement,
        fwhm * medium.compression,
        pulse.photons_total() * medium.gain_total,
    )
}

/// Pointwise power gain `I_out/I_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainProfile {
    /// `None` where the input intensity is below the floor.
    pub values: Vec<Option<f64>>,
}

impl GainProfile {
    pub fn unity(len: usize) -> Self {
        Self { values: vec![Some(1.0); len] }
    }

    /// Gains with invalid samples replaced by `fill`.
    pub fn filled(&self, fill: f64) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(fill)).collect()
    }

    pub fn is_all_invalid(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }
}

/// Default input floor for [`gain_profile`], relative to the input peak.
pub const GAIN_FLOOR_FRACTION: f64 = 1e-12;

/// `G(t) = I_out(t)/I_in(t)` wherever `I_in` exceeds `floor`.
pub fn gain_profile(input: &SampledPulse, output: &SampledPulse, floor: f64) -> Result<GainProfile> {
    if input.grid() != output.grid() {
        return Err(Error::GridMismatch);
    }
    let values = input
        .intensity()
        .into_iter()
        .zip(output.intensity())
        .map(|(i_in, i_out)| if i_in > floor && i_in > 0.0 { Some(i_out / i_in) } else { None })
        .collect();
    Ok(GainProfile { values })
}

/// Targets for fitting a symmetric gain doublet around the carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubletTarget {
    pub group_index: f64,
    /// Power gain at the carrier; must exceed 1 for a pure-gain medium.
    pub carrier_gain: f64,
    /// Power gain at each line centre.
    pub peak_gain: f64,
    pub length: f64,
}

impl Default for DoubletTarget {
    fn default() -> Self {
        Self { group_index: -2400.0, carrier_gain: 1.005, peak_gain: 9.5, length: 0.017 }
    }
}

fn doublet(detuning: f64, half_width: f64, strength: f64, length: f64) -> MediumSpec {
    let line = |d: f64| GainLine { center_detuning: d, half_width, strength };
    MediumSpec::Physical(PhysicalMedium { lines: vec![line(-detuning), line(detuning)], length })
}

fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Calibration(format!("target not bracketed in [{lo:e}, {hi:e}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-14 * mid.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finds a symmetric doublet `±δ` meeting the target group index and carrier
/// gain, with line strength fixed by the peak gain.
///
/// The carrier gain depends only on the width-to-detuning ratio, so that
/// ratio is bisected first; at fixed ratio `n_g − 1` scales as `1/δ` and the
/// detuning is bisected on a log scale against the numerical group index.
pub fn calibrate_doublet(target: &DoubletTarget) -> Result<MediumSpec> {
    if !(target.carrier_gain > 1.0) {
        return Err(Error::Calibration("carrier gain must exceed 1 for a gain doublet".into()));
    }
    if !(target.peak_gain > target.carrier_gain) {
        return Err(Error::Calibration("peak gain must exceed carrier gain".into()));
    }
    if !(target.group_index < 1.0) {
        return Err(Error::Calibration("a gain doublet only produces n_g < 1 at the carrier".into()));
    }
    if !(target.length > 0.0) {
        return Err(Error::Calibration("length must be positive".into()));
    }
    let strength = 0.5 * target.peak_gain.ln();
    let gain_for_ratio = |r: f64| -> f64 {
        let m = doublet(1.0, r, strength, target.length);
        let MediumSpec::Physical(p) = m else { unreachable!() };
        p.response(0.0).norm_sqr().ln() - target.carrier_gain.ln()
    };
    // the doublet only advances when the lines are further apart than wide
    let ratio = bisect(1e-9, 0.999, gain_for_ratio)?;
    let log_detuning = bisect(-3.0, 12.0, |x| {
        let d = 10f64.powf(x);
        let m = doublet(d, ratio * d, strength, target.length);
        group_index(&m, 0.0).unwrap_or(f64::NAN) - target.group_index
    })?;
    let detuning = 10f64.powf(log_detuning);
    let medium = doublet(detuning, ratio * detuning, strength, target.length);
    medium.validate()?;
    Ok(medium)
}

//! Photon statistics of a phase-insensitive amplifier.
//!
//! Only first and second moments are tracked. For a power gain `G ≥ 1` and
//! vacuum excess noise,
//!
//! ```text
//! ⟨n_out⟩    = G⟨n_in⟩ + G − 1
//! ⟨Δn²_out⟩ = G²⟨Δn²_in⟩ + G(G − 1)(⟨n_in⟩ + 1)
//! ```
//!
//! Loss (`G < 1`, and detector efficiency) is a beam splitter:
//! `⟨n⟩ → T⟨n⟩`, `⟨Δn²⟩ → T²⟨Δn²⟩ + T(1 − T)⟨n⟩`.

use std::sync::Once;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean detected photons above which counts are drawn from a moment-matched
/// Gaussian instead of the exact compound-Poisson law.
pub const GAUSSIAN_REGIME: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonMoments {
    pub mean: f64,
    pub variance: f64,
}

impl PhotonMoments {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0 && variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidMoments { mean, variance });
        }
        Ok(Self { mean, variance })
    }

    /// Shot-noise limited field: variance equals mean.
    pub fn coherent(mean: f64) -> Self {
        Self { mean, variance: mean }
    }

    pub fn fano(&self) -> f64 {
        self.variance / self.mean
    }
}

/// How the `⟨Δn_in⟩` in the added-noise term is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTermReading {
    /// `⟨Δn_in⟩` is the mean photon number: `G(G−1)(⟨n_in⟩ + 1)`.
    #[default]
    MeanPhotonNumber,
    /// `⟨Δn_in⟩` is the first moment of the fluctuation (zero): `G(G−1)`.
    ZeroFluctuation,
}

pub fn amplify_moments(input: PhotonMoments, gain: f64) -> Result<PhotonMoments> {
    amplify_moments_with(input, gain, NoiseTermReading::MeanPhotonNumber)
}

pub fn amplify_moments_with(
    input: PhotonMoments,
    gain: f64,
    reading: NoiseTermReading,
) -> Result<PhotonMoments> {
    if !(gain.is_finite() && gain >= 1.0) {
        return Err(Error::GainBelowUnity(gain));
    }
    let noise_mean = match reading {
        NoiseTermReading::MeanPhotonNumber => input.mean,
        NoiseTermReading::ZeroFluctuation => 0.0,
    };
    Ok(PhotonMoments {
        mean: gain * input.mean + gain - 1.0,
        variance: gain * gain * input.variance + gain * (gain - 1.0) * (noise_mean + 1.0),
    })
}

/// Beam-splitter loss with transmission `t ∈ [0, 1]`.
pub fn attenuate_moments(input: PhotonMoments, t: f64) -> PhotonMoments {
    let t = t.clamp(0.0, 1.0);
    PhotonMoments {
        mean: t * input.mean,
        variance: t * t * input.variance + t * (1.0 - t) * input.mean,
    }
}

/// Amplifies for `gain ≥ 1`, attenuates otherwise.
pub fn transmit_moments(
    input: PhotonMoments,
    gain: f64,
    reading: NoiseTermReading,
) -> PhotonMoments {
    if gain >= 1.0 {
        amplify_moments_with(input, gain, reading).expect("gain checked")
    } else {
        attenuate_moments(input, gain)
    }
}

static LOW_COUNT_WARNING: Once = Once::new();

/// Gaussian draw with the given moments, clamped at zero and rounded.
pub fn sample_counts<R: Rng + ?Sized>(moments: PhotonMoments, rng: &mut R) -> u64 {
    if moments.mean < GAUSSIAN_REGIME {
        LOW_COUNT_WARNING.call_once(|| {
            log::warn!(
                "Gaussian photon sampling below {GAUSSIAN_REGIME} photons (mean {:.3}); \
                 counts are biased at low occupation",
                moments.mean
            )
        });
    }
    let sd = moments.variance.sqrt();
    let x = if sd > 0.0 {
        moments.mean + sd * rng.sample::<f64, _>(StandardNormal)
    } else {
        moments.mean
    };
    x.max(0.0).round() as u64
}

/// Per-bin moments of an amplified shot-noise-limited pulse. Bins with
/// `G < 1` are treated as loss.
pub fn amplify_pulse_moments(bin_means: &[f64], gains: &[f64]) -> Result<Vec<PhotonMoments>> {
    if bin_means.len() != gains.len() {
        return Err(Error::SizeMismatch { expected: bin_means.len(), got: gains.len() });
    }
    bin_means
        .iter()
        .zip(gains)
        .map(|(&m, &g)| {
            if !(m >= 0.0) || !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidMoments { mean: m, variance: m });
            }
            Ok(transmit_moments(PhotonMoments::coherent(m), g, NoiseTermReading::MeanPhotonNumber))
        })
        .collect()
}

/// Gain stage followed by detection with efficiency `efficiency`, acting on
/// a shot-noise-limited input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionChannel {
    pub gain: f64,
    pub efficiency: f64,
    pub reading: NoiseTermReading,
}

impl DetectionChannel {
    pub fn new(gain: f64, efficiency: f64) -> Self {
        Self { gain, efficiency, reading: NoiseTermReading::MeanPhotonNumber }
    }

    /// Moments of the detected photon number for an input mean.
    pub fn moments(&self, mean_in: f64) -> PhotonMoments {
        let amplified = transmit_moments(PhotonMoments::coherent(mean_in), self.gain, self.reading);
        attenuate_moments(amplified, self.efficiency)
    }

    /// Draws a detected photon number.
    ///
    /// At low occupation the count is Poisson with a random rate
    /// `η|√(G n) + ξ|²`, where `ξ` is a complex Gaussian holding `G − 1`
    /// thermal photons. This has exactly the moments of [`Self::moments`]
    /// and stays correct at sub-photon means where a clamped Gaussian does
    /// not. The `ZeroFluctuation` reading has no such representation and is
    /// always sampled as a Gaussian.
    pub fn sample<R: Rng + ?Sized>(&self, mean_in: f64, rng: &mut R) -> f64 {
        let m = self.moments(mean_in);
        if m.mean >= GAUSSIAN_REGIME || self.reading == NoiseTermReading::ZeroFluctuation {
            if m.variance <= 0.0 {
                return m.mean;
            }
            return Normal::new(m.mean, m.variance.sqrt())
                .map(|d| d.sample(rng))
                .unwrap_or(m.mean);
        }
        let rate = if self.gain > 1.0 {
            let thermal = (0.5 * (self.gain - 1.0)).sqrt();
            let re = (self.gain * mean_in).sqrt() + thermal * rng.sample::<f64, _>(StandardNormal);
            let im = thermal * rng.sample::<f64, _>(StandardNormal);
            re * re + im * im
        } else {
            self.gain * mean_in
        };
        poisson(self.efficiency * rate, rng)
    }
}

pub(crate) fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate).map(|d| d.sample(rng)).unwrap_or(rate)
}

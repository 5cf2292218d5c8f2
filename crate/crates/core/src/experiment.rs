//! Config-driven experiments: reference and fast channels over seeds,
//! ensemble statistics, parameter sweeps and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amplifier::NoiseTermReading;
use crate::analysis::{
    compare, exceeds_window, key_values, trace_csv, visibility_trace, DetectionParams, DetectionReport, Rect,
    RegionSpec, VisibilityTrace,
};
use crate::detector::{gate_sweep_with, uniform_delays, DetectorSpec, FrameStack};
use crate::error::{Error, Result};
use crate::medium::{gain_profile, propagate, EmpiricalMedium, GainLine, MediumSpec, PhysicalMedium, GAIN_FLOOR_FRACTION};
use crate::pulse::{make_gaussian_pulse, tau_from_fwhm, SampledPulse, TimeGrid};
use crate::scene::{PixelGrid, SceneSpec, Stripe};
use crate::stack_io::save_stack;

const NS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub fwhm_ns: f64,
    pub photons_total: f64,
    pub t_peak_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_start_ns: f64,
    pub t_end_ns: f64,
    pub dt_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub detuning_hz: f64,
    pub half_width_hz: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum MediumConfig {
    Vacuum,
    Empirical {
        advancement_ns: f64,
        #[serde(default = "one")]
        compression: f64,
        #[serde(default = "one")]
        gain_total: f64,
    },
    Physical {
        length_m: f64,
        lines: Vec<LineConfig>,
    },
}

fn one() -> f64 {
    1.0
}

impl MediumConfig {
    pub fn to_spec(&self) -> MediumSpec {
        match self {
            MediumConfig::Vacuum => MediumSpec::Vacuum,
            MediumConfig::Empirical { advancement_ns, compression, gain_total } => MediumSpec::Empirical(EmpiricalMedium {
                advancement: advancement_ns * NS,
                compression: *compression,
                gain_total: *gain_total,
            }),
            MediumConfig::Physical { length_m, lines } => MediumSpec::Physical(PhysicalMedium {
                length: *length_m,
                lines: lines
                    .iter()
                    .map(|l| GainLine { center_detuning: l.detuning_hz, half_width: l.half_width_hz, strength: l.strength })
                    .collect(),
            }),
        }
    }

    pub fn from_spec(spec: &MediumSpec) -> Self {
        match spec {
            MediumSpec::Vacuum => MediumConfig::Vacuum,
            MediumSpec::Empirical(e) => MediumConfig::Empirical {
                advancement_ns: e.advancement / NS,
                compression: e.compression,
                gain_total: e.gain_total,
            },
            MediumSpec::Physical(p) => MediumConfig::Physical {
                length_m: p.length,
                lines: p
                    .lines
                    .iter()
                    .map(|l| LineConfig { detuning_hz: l.center_detuning, half_width_hz: l.half_width, strength: l.strength })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub beam_waist: f64,
    pub beam_center_x: f64,
    pub beam_center_y: f64,
    pub stripe_row: f64,
    pub stripe_width: f64,
    pub stripe_contrast: f64,
    #[serde(default = "yes")]
    pub edge_smoothing: bool,
}

fn yes() -> bool {
    true
}

impl SceneConfig {
    pub fn to_spec(&self) -> SceneSpec {
        SceneSpec {
            grid: PixelGrid { width: self.width, height: self.height, pixel_pitch: 1.0 },
            beam_waist: self.beam_waist,
            beam_center: (self.beam_center_x, self.beam_center_y),
            stripe: Stripe { center_row: self.stripe_row, width: self.stripe_width, contrast: self.stripe_contrast },
            edge_smoothing: self.edge_smoothing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_mean: f64,
    pub dark_std: f64,
    pub gate_width_ns: f64,
    #[serde(default)]
    pub threshold_d: f64,
    #[serde(default = "one")]
    pub adu_gain: f64,
}

impl DetectorConfig {
    pub fn to_spec(&self) -> DetectorSpec {
        DetectorSpec {
            efficiency: self.efficiency,
            dark_mean: self.dark_mean,
            dark_std: self.dark_std,
            gate_width: self.gate_width_ns * NS,
            threshold_d: self.threshold_d,
            adu_gain: self.adu_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start_ns: f64,
    pub stop_ns: f64,
    pub step_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    /// `[x, y, width, height]` of the two flank rectangles.
    pub max: [[usize; 4]; 2],
    pub min: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_persistence")]
    pub persistence: usize,
    #[serde(default = "default_background")]
    pub background_fraction: f64,
    /// Start of the pulse on the delay axis; defaults to three `1/e`
    /// half-widths before the input peak.
    #[serde(default)]
    pub onset_ns: Option<f64>,
    #[serde(default)]
    pub regions: Option<RegionsConfig>,
}

fn default_window() -> usize {
    10
}
fn default_threshold() -> f64 {
    1.0
}
fn default_persistence() -> usize {
    3
}
fn default_background() -> f64 {
    0.25
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: default_window(),
            threshold: default_threshold(),
            persistence: default_persistence(),
            background_fraction: default_background(),
            onset_ns: None,
            regions: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifierConfig {
    #[serde(default)]
    pub noise_term: NoiseTermReading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_seeds: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pulse: PulseConfig,
    pub grid: GridConfig,
    pub medium: MediumConfig,
    pub scene: SceneConfig,
    pub detector: DetectorConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub amplifier: AmplifierConfig,
    pub ensemble: EnsembleConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML form; parsing it back gives an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let p = &self.pulse;
        if !(p.fwhm_ns > 0.0 && p.photons_total > 0.0 && p.t_peak_ns.is_finite()) {
            return bad("pulse needs positive fwhm and photon number".into());
        }
        let g = &self.grid;
        if !(g.dt_ns > 0.0 && g.t_end_ns > g.t_start_ns) {
            return bad("grid needs dt > 0 and t_end > t_start".into());
        }
        self.medium.to_spec().validate()?;
        self.scene.to_spec().validate()?;
        let det = self.detector.to_spec();
        det.validate()?;
        let s = &self.sweep;
        if !(s.step_ns > 0.0 && s.stop_ns > s.start_ns) {
            return bad("sweep needs step > 0 and stop > start".into());
        }
        if s.step_ns < self.detector.gate_width_ns * (1.0 - 1e-9) {
            return bad(format!("sweep step {} ns shorter than gate width {} ns", s.step_ns, self.detector.gate_width_ns));
        }
        if s.start_ns < g.t_start_ns || s.stop_ns + self.detector.gate_width_ns > g.t_end_ns {
            return bad("sweep gates must lie inside the time grid".into());
        }
        let a = &self.analysis;
        if a.window < 2 || a.persistence == 0 || !(a.background_fraction > 0.0 && a.background_fraction < 1.0) {
            return bad("analysis needs window >= 2, persistence >= 1, background fraction in (0, 1)".into());
        }
        if self.delays().len() <= a.window {
            return bad(format!("sweep has {} gates, needs more than window {}", self.delays().len(), a.window));
        }
        if self.ensemble.n_seeds == 0 {
            return bad("ensemble needs at least one seed".into());
        }
        self.regions()?;
        Ok(())
    }

    pub fn delays(&self) -> Vec<f64> {
        uniform_delays(self.sweep.start_ns, self.sweep.stop_ns, self.sweep.step_ns).into_iter().map(|d| d * NS).collect()
    }

    pub fn regions(&self) -> Result<RegionSpec> {
        let spec = match &self.analysis.regions {
            Some(r) => {
                let rect = |v: [usize; 4]| Rect::new(v[0], v[1], v[2], v[3]);
                RegionSpec { max_regions: [rect(r.max[0]), rect(r.max[1])], min_region: rect(r.min) }
            }
            None => return RegionSpec::for_scene(&self.scene.to_spec()),
        };
        spec.validate(self.scene.width, self.scene.height)?;
        Ok(spec)
    }

    pub fn detection_params(&self) -> DetectionParams {
        DetectionParams {
            threshold: self.analysis.threshold,
            persistence: self.analysis.persistence,
            background_fraction: self.analysis.background_fraction,
        }
    }

    /// Pulse onset on the delay axis, seconds.
    pub fn onset(&self) -> f64 {
        self.analysis
            .onset_ns
            .map_or_else(|| (self.pulse.t_peak_ns - 3.0 * tau_from_fwhm(self.pulse.fwhm_ns)) * NS, |t| t * NS)
    }

    pub fn input_pulse(&self) -> Result<SampledPulse> {
        let grid = TimeGrid::spanning(self.grid.t_start_ns * NS, self.grid.t_end_ns * NS, self.grid.dt_ns * NS)?;
        make_gaussian_pulse(grid, self.pulse.t_peak_ns * NS, self.pulse.fwhm_ns * NS, self.pulse.photons_total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Reference,
    Fast,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Reference => "reference",
            Channel::Fast => "fast",
        }
    }
}

/// Everything a run needs that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub hash: String,
    pub input: SampledPulse,
    pub output: SampledPulse,
    /// Power gain seen by the fast channel at each grid sample.
    pub fast_gain: Vec<f64>,
    pub scene: SceneSpec,
    pub detector: DetectorSpec,
    pub regions: RegionSpec,
    pub delays: Vec<f64>,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let input = config.input_pulse()?;
        let output = propagate(&input, &config.medium.to_spec())?;
        let profile = gain_profile(&input, &output, GAIN_FLOOR_FRACTION * input.peak_intensity())?;
        if profile.is_all_invalid() {
            return Err(Error::ZeroPulse);
        }
        Ok(Self {
            hash: config.hash(),
            fast_gain: profile.filled(1.0),
            scene: config.scene.to_spec(),
            detector: config.detector.to_spec(),
            regions: config.regions()?,
            delays: config.delays(),
            config: config.clone(),
            input,
            output,
        })
    }

    pub fn gains(&self, channel: Channel) -> Vec<f64> {
        match channel {
            Channel::Reference => vec![1.0; self.input.grid().len()],
            Channel::Fast => self.fast_gain.clone(),
        }
    }

    pub fn stack(&self, channel: Channel, seed: u64) -> Result<FrameStack> {
        gate_sweep_with(
            &self.scene,
            &self.input,
            &self.gains(channel),
            &self.detector,
            &self.delays,
            seed,
            self.config.amplifier.noise_term,
        )
    }

    pub fn trace(&self, stack: &FrameStack) -> Result<VisibilityTrace> {
        visibility_trace(stack, &self.regions, self.detector.threshold_d, self.config.analysis.window)
    }
}

pub fn run_channel(cfg: &ExperimentConfig, channel: Channel, seed: u64) -> Result<(FrameStack, VisibilityTrace)> {
    let prep = Prepared::new(cfg)?;
    let stack = prep.stack(channel, seed)?;
    let trace = prep.trace(&stack)?;
    Ok((stack, trace))
}

/// Both channels from one seed plus their comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub reference: VisibilityTrace,
    pub fast: VisibilityTrace,
    pub arrival_reference: Vec<f64>,
    pub arrival_fast: Vec<f64>,
    pub report: DetectionReport,
}

/// Runs both channels with the same seed so that differences come from the
/// medium, not from independent noise draws.
pub fn run_pair(prep: &Prepared, seed: u64) -> Result<SeedRun> {
    run_pair_saving(prep, seed, None)
}

fn run_pair_saving(prep: &Prepared, seed: u64, frames_dir: Option<&Path>) -> Result<SeedRun> {
    let ref_stack = prep.stack(Channel::Reference, seed)?;
    let fast_stack = prep.stack(Channel::Fast, seed)?;
    if let Some(dir) = frames_dir {
        save_stack(&dir.join(format!("seed{seed}_reference.flstack")), &ref_stack, &prep.hash)?;
        save_stack(&dir.join(format!("seed{seed}_fast.flstack")), &fast_stack, &prep.hash)?;
    }
    let reference = prep.trace(&ref_stack)?;
    let fast = prep.trace(&fast_stack)?;
    let report = compare(&reference, &fast, &prep.config.detection_params(), prep.config.pulse.fwhm_ns * NS)?;
    Ok(SeedRun {
        seed,
        arrival_reference: ref_stack.totals(),
        arrival_fast: fast_stack.totals(),
        reference,
        fast,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Standard error of the mean.
    pub se: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { n, mean, std, se: std / (n as f64).sqrt() })
    }
}

/// Per-channel ensemble means on the delay axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanCurves {
    pub arrival: Vec<f64>,
    /// Mean over seeds with a valid value; `None` where no seed had one.
    pub visibility: Vec<Option<f64>>,
    pub snr: Vec<Option<f64>>,
    pub integrated_snr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    pub delays: Vec<f64>,
    pub onset: f64,
    pub pulse_fwhm: f64,
    /// Over seeds where both channels detected.
    pub advancement: Option<Stats>,
    pub t_detect_reference: Option<Stats>,
    pub t_detect_fast: Option<Stats>,
    pub reference: MeanCurves,
    pub fast: MeanCurves,
    /// Where the ensemble-mean integrated SNR of the fast channel exceeds
    /// the reference, on the delay axis.
    pub window: Option<(f64, f64)>,
}

impl EnsembleResult {
    pub fn window_after_onset(&self) -> Option<(f64, f64)> {
        self.window.map(|(lo, hi)| (lo - self.onset, hi - self.onset))
    }
}

fn mean_curve(curves: &[&[f64]]) -> Vec<f64> {
    let n = curves.len() as f64;
    (0..curves[0].len()).map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / n).collect()
}

fn mean_valid(curves: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    (0..curves[0].len())
        .map(|k| {
            let v: Vec<f64> = curves.iter().filter_map(|c| c[k]).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn curves_for(runs: &[SeedRun], channel: Channel) -> MeanCurves {
    fn pick(r: &SeedRun, channel: Channel) -> (&Vec<f64>, &VisibilityTrace, &Vec<f64>) {
        match channel {
            Channel::Reference => (&r.arrival_reference, &r.reference, &r.report.integrated_reference),
            Channel::Fast => (&r.arrival_fast, &r.fast, &r.report.integrated_fast),
        }
    }
    let arrival: Vec<&[f64]> = runs.iter().map(|r| pick(r, channel).0.as_slice()).collect();
    let integ: Vec<&[f64]> = runs.iter().map(|r| pick(r, channel).2.as_slice()).collect();
    let vis: Vec<Vec<Option<f64>>> = runs.iter().map(|r| pick(r, channel).1.points.iter().map(|p| p.m).collect()).collect();
    let snr: Vec<Vec<Option<f64>>> = runs.iter().map(|r| pick(r, channel).1.snr()).collect();
    MeanCurves {
        arrival: mean_curve(&arrival),
        visibility: mean_valid(&vis),
        snr: mean_valid(&snr),
        integrated_snr: mean_curve(&integ),
    }
}

pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleResult> {
    run_ensemble_saving(cfg, None)
}

/// As [`run_ensemble`], optionally writing every frame stack into
/// `frames_dir`.
pub fn run_ensemble_saving(cfg: &ExperimentConfig, frames_dir: Option<&Path>) -> Result<EnsembleResult> {
    let prep = Prepared::new(cfg)?;
    let seeds: Vec<u64> = (0..cfg.ensemble.n_seeds as u64).map(|i| cfg.ensemble.base_seed.wrapping_add(i)).collect();
    let one = |&seed: &u64| run_pair_saving(&prep, seed, frames_dir);
    #[cfg(feature = "parallel")]
    let runs: Vec<SeedRun> = {
        use rayon::prelude::*;
        seeds.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<SeedRun> = seeds.iter().map(one).collect::<Result<_>>()?;
    Ok(aggregate(&prep, seeds, runs))
}

fn aggregate(prep: &Prepared, seeds: Vec<u64>, runs: Vec<SeedRun>) -> EnsembleResult {
    let adv: Vec<f64> = runs.iter().filter_map(|r| r.report.advancement).collect();
    let t_ref: Vec<f64> = runs.iter().filter_map(|r| r.report.t_detect_reference).collect();
    let t_fast: Vec<f64> = runs.iter().filter_map(|r| r.report.t_detect_fast).collect();
    let reference = curves_for(&runs, Channel::Reference);
    let fast = curves_for(&runs, Channel::Fast);
    let window = exceeds_window(&prep.delays, &fast.integrated_snr, &reference.integrated_snr);
    EnsembleResult {
        config_hash: prep.hash.clone(),
        seeds,
        delays: prep.delays.clone(),
        onset: prep.config.onset(),
        pulse_fwhm: prep.config.pulse.fwhm_ns * NS,
        advancement: Stats::of(&adv),
        t_detect_reference: Stats::of(&t_ref),
        t_detect_fast: Stats::of(&t_fast),
        reference,
        fast,
        window,
        runs,
    }
}

/// Parameters [`sweep_parameter`] can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Efficiency,
    /// Scales the total photon gain of an empirical medium.
    Gain,
    /// Peak advancement of an empirical medium, in ns.
    Advancement,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "efficiency" => Ok(Self::Efficiency),
            "gain" => Ok(Self::Gain),
            "advancement" => Ok(Self::Advancement),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Efficiency => "efficiency",
            Self::Gain => "gain",
            Self::Advancement => "advancement",
        }
    }

    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        match self {
            Self::Efficiency => c.detector.efficiency = value,
            Self::Gain | Self::Advancement => match &mut c.medium {
                MediumConfig::Empirical { advancement_ns, gain_total, .. } => {
                    if self == Self::Gain {
                        *gain_total = value;
                    } else {
                        *advancement_ns = value;
                    }
                }
                _ => return Err(Error::Config(format!("sweeping {} needs an empirical medium", self.name()))),
            },
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub advancement: Option<Stats>,
    pub window: Option<(f64, f64)>,
}

pub fn sweep_parameter(cfg: &ExperimentConfig, parameter: SweepParameter, values: &[f64]) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&v| {
            let e = run_ensemble(&parameter.apply(cfg, v)?)?;
            Ok(SweepRow { value: v, advancement: e.advancement, window: e.window_after_onset() })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn stats_entries(prefix: &str, s: Option<Stats>) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}_n"), s.map_or(0, |s| s.n).to_string()),
        (format!("{prefix}_mean_s"), opt(s.map(|s| s.mean))),
        (format!("{prefix}_std_s"), opt(s.map(|s| s.std))),
        (format!("{prefix}_se_s"), opt(s.map(|s| s.se))),
    ]
}

pub fn sweep_csv(parameter: SweepParameter, rows: &[SweepRow]) -> String {
    let mut s = format!("{},n,advancement_mean_s,advancement_std_s,advancement_se_s,window_lo_s,window_hi_s\n", parameter.name());
    for r in rows {
        let (lo, hi) = r.window.unzip();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.value,
            r.advancement.map_or(0, |a| a.n),
            opt(r.advancement.map(|a| a.mean)),
            opt(r.advancement.map(|a| a.std)),
            opt(r.advancement.map(|a| a.se)),
            opt(lo),
            opt(hi)
        );
    }
    s
}

/// Summary of an ensemble as `key = value` lines.
pub fn ensemble_summary(e: &EnsembleResult) -> String {
    let (lo, hi) = e.window.unzip();
    let (rlo, rhi) = e.window_after_onset().unzip();
    let mut entries: Vec<(String, String)> = vec![
        ("config_hash".into(), e.config_hash.clone()),
        ("n_seeds".into(), e.seeds.len().to_string()),
        ("base_seed".into(), e.seeds.first().map_or(String::new(), |s| s.to_string())),
        ("pulse_fwhm_s".into(), e.pulse_fwhm.to_string()),
        ("onset_s".into(), e.onset.to_string()),
    ];
    entries.extend(stats_entries("advancement", e.advancement));
    entries.push(("relative_advancement".into(), opt(e.advancement.map(|a| a.mean / e.pulse_fwhm))));
    entries.extend(stats_entries("t_detect_reference", e.t_detect_reference));
    entries.extend(stats_entries("t_detect_fast", e.t_detect_fast));
    entries.extend([
        ("window_lo_s".into(), opt(lo)),
        ("window_hi_s".into(), opt(hi)),
        ("window_lo_after_onset_s".into(), opt(rlo)),
        ("window_hi_after_onset_s".into(), opt(rhi)),
    ]);
    let refs: Vec<(&str, String)> = entries.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    key_values(&refs)
}

fn per_seed_csv(e: &EnsembleResult) -> String {
    let mut s = String::from("seed,t_detect_reference_s,t_detect_fast_s,advancement_s\n");
    for r in &e.runs {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.seed,
            opt(r.report.t_detect_reference),
            opt(r.report.t_detect_fast),
            opt(r.report.advancement)
        );
    }
    s
}

fn mean_curves_csv(delays: &[f64], c: &MeanCurves) -> String {
    let mut s = String::from("delay_s,arrival,visibility,snr,integrated_snr\n");
    for k in 0..delays.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            delays[k],
            c.arrival[k],
            opt(c.visibility[k]),
            opt(c.snr[k]),
            c.integrated_snr[k]
        );
    }
    s
}

fn write(dir: &Path, name: &str, header: &str, body: &str) -> Result<()> {
    fs::write(dir.join(name), format!("{header}{body}"))?;
    Ok(())
}

fn file_header(hash: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# config_hash {hash} seed {s}\n"),
        None => format!("# config_hash {hash}\n"),
    }
}

/// Writes the canonical config, `summary.txt`, `per_seed.csv` and the
/// ensemble-mean curves of both channels. Outputs depend only on the config
/// and seeds.
pub fn write_ensemble(dir: &Path, cfg: &ExperimentConfig, e: &EnsembleResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.cfg"), cfg.to_toml())?;
    let head = file_header(&e.config_hash, None);
    write(dir, "summary.txt", &head, &ensemble_summary(e))?;
    write(dir, "per_seed.csv", &head, &per_seed_csv(e))?;
    write(dir, "mean_reference.csv", &head, &mean_curves_csv(&e.delays, &e.reference))?;
    write(dir, "mean_fast.csv", &head, &mean_curves_csv(&e.delays, &e.fast))?;
    Ok(())
}

/// Writes the traces and report of a single seed.
pub fn write_pair(dir: &Path, cfg: &ExperimentConfig, hash: &str, run: &SeedRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.cfg"), cfg.to_toml())?;
    let head = file_header(hash, Some(run.seed));
    write(dir, "trace_reference.csv", &head, &trace_csv(&run.reference, &run.report.integrated_reference))?;
    write(dir, "trace_fast.csv", &head, &trace_csv(&run.fast, &run.report.integrated_fast))?;
    write(dir, "arrival.csv", &head, &arrival_csv(&run.report.delays, &run.arrival_reference, &run.arrival_fast))?;
    write(dir, "report.txt", &head, &key_values(&run.report.summary_entries()))?;
    Ok(())
}

fn arrival_csv(delays: &[f64], reference: &[f64], fast: &[f64]) -> String {
    let mut s = String::from("delay_s,reference,fast\n");
    for k in 0..delays.len() {
        let _ = writeln!(s, "{},{},{}", delays[k], reference[k], fast[k]);
    }
    s
}

/// Runs one seed for both channels and writes its outputs.
pub fn compare_to_dir(cfg: &ExperimentConfig, seed: u64, dir: &Path, save_frames: bool) -> Result<SeedRun> {
    let prep = Prepared::new(cfg)?;
    fs::create_dir_all(dir)?;
    let run = run_pair_saving(&prep, seed, save_frames.then_some(dir))?;
    write_pair(dir, cfg, &prep.hash, &run)?;
    Ok(run)
}

/// Runs one channel for one seed and writes its trace (and optionally the
/// frame stack).
pub fn simulate_to_dir(cfg: &ExperimentConfig, channel: Channel, seed: u64, dir: &Path, save_frames: bool) -> Result<VisibilityTrace> {
    let prep = Prepared::new(cfg)?;
    let stack = prep.stack(channel, seed)?;
    let trace = prep.trace(&stack)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.cfg"), cfg.to_toml())?;
    let floor = crate::analysis::estimate_snr_floor(&trace, cfg.analysis.background_fraction).unwrap_or(0.0);
    let cum = crate::analysis::integrated_snr(&trace, floor);
    let head = file_header(&prep.hash, Some(seed));
    write(dir, &format!("trace_{}.csv", channel.name()), &head, &trace_csv(&trace, &cum))?;
    let det = crate::analysis::detection_time(&trace, cfg.analysis.threshold, cfg.analysis.persistence);
    let totals = stack.totals();
    let mut arrival = String::from("delay_s,counts\n");
    for (d, t) in prep.delays.iter().zip(&totals) {
        let _ = writeln!(arrival, "{d},{t}");
    }
    write(dir, &format!("arrival_{}.csv", channel.name()), &head, &arrival)?;
    write(
        dir,
        &format!("report_{}.txt", channel.name()),
        &head,
        &key_values(&[("channel", channel.name().to_string()), ("t_detect_s", opt(det)), ("snr_floor", floor.to_string())]),
    )?;
    if save_frames {
        save_stack(&dir.join(format!("seed{seed}_{}.flstack", channel.name())), &stack, &prep.hash)?;
    }
    Ok(trace)
}

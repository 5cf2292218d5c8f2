//! Stripe visibility, its running noise, SNR and detection times.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detector::{check_uniform, FrameStack, ImageFrame};
use crate::error::{Error, Result};
use crate::scene::SceneSpec;

/// Half-open pixel rectangle `[x, x + width) × [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.width && o.x < self.x + self.width && self.y < o.y + o.height && o.y < self.y + self.height
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.width > 0 && self.height > 0 && self.x + self.width <= width && self.y + self.height <= height
    }
}

/// Two flank rectangles pooled into `I_max` and one rectangle on the stripe
/// centre giving `I_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub max_regions: [Rect; 2],
    pub min_region: Rect,
}

/// Rows either side of the stripe edge to the flank regions.
const FLANK_GAP: f64 = 6.0;
const REGION_ROWS: usize = 3;
const REGION_COLUMNS: usize = 90;

impl RegionSpec {
    /// 3×90 rectangles centred on the beam: one on the stripe axis, one on
    /// each side `FLANK_GAP` rows beyond the stripe edge.
    pub fn for_scene(scene: &SceneSpec) -> Result<Self> {
        let g = scene.grid;
        let cols = REGION_COLUMNS.min(g.width);
        let x0 = (scene.beam_center.0.round() - (cols / 2) as f64).clamp(0.0, (g.width - cols) as f64) as usize;
        let row = scene.stripe.center_row;
        let offset = 0.5 * scene.stripe.width + FLANK_GAP;
        let rect_at = |centre: f64| -> Result<Rect> {
            let top = centre.round() - (REGION_ROWS / 2) as f64;
            if top < 0.0 {
                return Err(Error::RegionOutOfBounds(format!("row {top}")));
            }
            Ok(Rect::new(x0, top as usize, cols, REGION_ROWS))
        };
        let spec = Self { max_regions: [rect_at(row - offset)?, rect_at(row + offset)?], min_region: rect_at(row)? };
        spec.validate(g.width, g.height)?;
        Ok(spec)
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let all = [self.max_regions[0], self.max_regions[1], self.min_region];
        for r in &all {
            if !r.fits(width, height) {
                return Err(Error::RegionOutOfBounds(format!("{r:?} in {width}x{height}")));
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if all[i].overlaps(&all[j]) {
                    return Err(Error::RegionOutOfBounds(format!("{:?} overlaps {:?}", all[i], all[j])));
                }
            }
        }
        Ok(())
    }
}

pub fn region_mean(frame: &ImageFrame, region: &Rect) -> Result<f64> {
    if !region.fits(frame.width, frame.height) {
        return Err(Error::RegionOutOfBounds(format!("{region:?} in {}x{}", frame.width, frame.height)));
    }
    let mut sum = 0u64;
    for y in region.y..region.y + region.height {
        let row = &frame.counts[y * frame.width + region.x..y * frame.width + region.x + region.width];
        sum += row.iter().map(|&c| c as u64).sum::<u64>();
    }
    Ok(sum as f64 / (region.width * region.height) as f64)
}

/// `(I_max − I_min) / (I_max + I_min)`; `None` on a zero denominator.
pub fn visibility(i_max: f64, i_min: f64) -> Option<f64> {
    visibility_corrected(i_max, i_min, 0.0)
}

/// `(n_max − n_min − D) / (n_max + n_min − D)`.
pub fn visibility_corrected(n_max: f64, n_min: f64, d: f64) -> Option<f64> {
    let den = n_max + n_min - d;
    (den != 0.0 && den.is_finite()).then(|| (n_max - n_min - d) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub delay: f64,
    pub m: Option<f64>,
    /// Sample standard deviation of the previous `window` M values.
    pub dm: Option<f64>,
    pub snr: Option<f64>,
    /// Fewer than `window` previous frames available.
    pub warm_up: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityTrace {
    pub window: usize,
    pub points: Vec<TracePoint>,
}

impl VisibilityTrace {
    pub fn delays(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delay).collect()
    }

    pub fn snr(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.snr).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the running-noise trace from a visibility series on a uniform
/// delay axis.
pub fn trace_from_visibility(delays: &[f64], m: &[Option<f64>], window: usize) -> Result<VisibilityTrace> {
    if delays.len() != m.len() {
        return Err(Error::SizeMismatch { expected: delays.len(), got: m.len() });
    }
    if window < 2 || delays.len() <= window {
        return Err(Error::StackTooShort { len: delays.len(), window });
    }
    check_uniform(delays)?;
    let points = (0..delays.len())
        .map(|k| {
            let prev: Vec<f64> = m[k.saturating_sub(window)..k].iter().flatten().copied().collect();
            let dm = (prev.len() >= 2).then(|| sample_std(&prev));
            let snr = match (m[k], dm) {
                (Some(v), Some(s)) if s > 0.0 => Some(v * v / (s * s)),
                _ => None,
            };
            TracePoint { delay: delays[k], m: m[k], dm, snr, warm_up: k < window }
        })
        .collect();
    Ok(VisibilityTrace { window, points })
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn visibility_trace(stack: &FrameStack, regions: &RegionSpec, d: f64, window: usize) -> Result<VisibilityTrace> {
    if stack.len() <= window {
        return Err(Error::StackTooShort { len: stack.len(), window });
    }
    regions.validate(stack.width, stack.height)?;
    let m = stack
        .frames
        .iter()
        .map(|f| {
            let i_max = 0.5 * (region_mean(f, &regions.max_regions[0])? + region_mean(f, &regions.max_regions[1])?);
            let i_min = region_mean(f, &regions.min_region)?;
            Ok(visibility_corrected(i_max, i_min, d))
        })
        .collect::<Result<Vec<_>>>()?;
    trace_from_visibility(&stack.delays(), &m, window)
}

/// Mean valid SNR over the leading `fraction` of the trace, warm-up frames
/// excluded.
pub fn estimate_snr_floor(trace: &VisibilityTrace, fraction: f64) -> Result<f64> {
    let n = ((trace.len() as f64 * fraction).floor() as usize).min(trace.len());
    let vals: Vec<f64> = trace.points[..n].iter().filter(|p| !p.warm_up).filter_map(|p| p.snr).collect();
    if vals.is_empty() {
        return Err(Error::NoBackgroundRegion);
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Running trapezoid integral of `SNR − floor` over gate delay (seconds),
/// starting at zero on the first frame. Warm-up and invalid frames
/// contribute nothing.
pub fn integrated_snr(trace: &VisibilityTrace, floor: f64) -> Vec<f64> {
    let f: Vec<f64> = trace
        .points
        .iter()
        .map(|p| if p.warm_up { 0.0 } else { p.snr.map_or(0.0, |s| s - floor) })
        .collect();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for k in 0..f.len() {
        if k > 0 {
            acc += 0.5 * (f[k] + f[k - 1]) * (trace.points[k].delay - trace.points[k - 1].delay);
        }
        out.push(acc);
    }
    out
}

/// First delay where SNR stays at or above `threshold` for `persistence`
/// consecutive frames, interpolated against the preceding frame. Warm-up
/// frames cannot start a detection.
pub fn detection_time(trace: &VisibilityTrace, threshold: f64, persistence: usize) -> Option<f64> {
    let p = &trace.points;
    let persistence = persistence.max(1);
    let above = |k: usize| p[k].snr.is_some_and(|s| s >= threshold);
    let mut k = 0;
    while k + persistence <= p.len() {
        if p[k].warm_up || !above(k) {
            k += 1;
            continue;
        }
        match (k..k + persistence).find(|&j| !above(j)) {
            Some(j) => k = j + 1,
            None => {
                let s1 = p[k].snr.unwrap();
                return Some(match k.checked_sub(1).and_then(|i| p[i].snr.map(|s0| (i, s0))) {
                    Some((i, s0)) if s1 > s0 => {
                        p[i].delay + (threshold - s0) / (s1 - s0) * (p[k].delay - p[i].delay)
                    }
                    _ => p[k].delay,
                });
            }
        }
    }
    None
}

/// Longest-by-area contiguous run where `a > b`, as `(first, last)` delay.
pub fn exceeds_window(delays: &[f64], a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    let mut start = None;
    let mut area = 0.0;
    for k in 0..=delays.len() {
        let inside = k < delays.len() && a[k] > b[k];
        if inside {
            start.get_or_insert(k);
            area += a[k] - b[k];
        } else if let Some(s) = start.take() {
            if best.is_none_or(|(_, _, best_area)| area > best_area) {
                best = Some((s, k - 1, area));
            }
            area = 0.0;
        }
    }
    best.map(|(s, e, _)| (delays[s], delays[e]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionParams {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_persistence")]
    pub persistence: usize,
    #[serde(default = "default_background")]
    pub background_fraction: f64,
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

impl Default for DetectionParams {
    fn default() -> Self {
        Self { threshold: default_threshold(), persistence: default_persistence(), background_fraction: default_background() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub t_detect_reference: Option<f64>,
    pub t_detect_fast: Option<f64>,
    /// Reference minus fast detection time; positive means the fast channel
    /// was seen first.
    pub advancement: Option<f64>,
    /// Advancement over the input pulse FWHM.
    pub relative_advancement: Option<f64>,
    pub delays: Vec<f64>,
    pub integrated_reference: Vec<f64>,
    pub integrated_fast: Vec<f64>,
    pub floor_reference: f64,
    pub floor_fast: f64,
    pub window_fast_exceeds_reference: Option<(f64, f64)>,
}

pub fn compare(
    reference: &VisibilityTrace,
    fast: &VisibilityTrace,
    params: &DetectionParams,
    pulse_fwhm: f64,
) -> Result<DetectionReport> {
    let delays = reference.delays();
    if delays != fast.delays() {
        return Err(Error::AxisMismatch);
    }
    // a noiseless detector can leave the pre-pulse frames without any valid
    // SNR; there is then no background to subtract
    let floor = |t: &VisibilityTrace| match estimate_snr_floor(t, params.background_fraction) {
        Err(Error::NoBackgroundRegion) => Ok(0.0),
        other => other,
    };
    let floor_reference = floor(reference)?;
    let floor_fast = floor(fast)?;
    let integrated_reference = integrated_snr(reference, floor_reference);
    let integrated_fast = integrated_snr(fast, floor_fast);
    let t_ref = detection_time(reference, params.threshold, params.persistence);
    let t_fast = detection_time(fast, params.threshold, params.persistence);
    let advancement = t_ref.zip(t_fast).map(|(r, f)| r - f);
    Ok(DetectionReport {
        t_detect_reference: t_ref,
        t_detect_fast: t_fast,
        advancement,
        relative_advancement: advancement.map(|a| a / pulse_fwhm),
        window_fast_exceeds_reference: exceeds_window(&delays, &integrated_fast, &integrated_reference),
        delays,
        integrated_reference,
        integrated_fast,
        floor_reference,
        floor_fast,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `delay_s,m,dm,snr,cumulative_snr,warm_up`; invalid values are empty.
pub fn trace_csv(trace: &VisibilityTrace, cumulative: &[f64]) -> String {
    let mut s = String::from("delay_s,m,dm,snr,cumulative_snr,warm_up\n");
    for (k, p) in trace.points.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.delay,
            opt(p.m),
            opt(p.dm),
            opt(p.snr),
            cumulative.get(k).map_or_else(String::new, |c| c.to_string()),
            p.warm_up as u8
        );
    }
    s
}

/// Writes `key = value` lines, one per entry, in the given order.
pub fn key_values(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect()
}

impl DetectionReport {
    pub fn summary_entries(&self) -> Vec<(&'static str, String)> {
        let (lo, hi) = self.window_fast_exceeds_reference.unzip();
        vec![
            ("t_detect_reference_s", opt(self.t_detect_reference)),
            ("t_detect_fast_s", opt(self.t_detect_fast)),
            ("advancement_s", opt(self.advancement)),
            ("relative_advancement", opt(self.relative_advancement)),
            ("floor_reference", self.floor_reference.to_string()),
            ("floor_fast", self.floor_fast.to_string()),
            ("window_lo_s", opt(lo)),
            ("window_hi_s", opt(hi)),
        ]
    }
}

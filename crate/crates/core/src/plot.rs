//! Plot-ready CSV bundles: arrival, visibility, SNR and integrated SNR
//! against gate delay, one file per channel plus a manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{EnsembleResult, MeanCurves, SeedRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Arrival,
    Visibility,
    Snr,
    IntegratedSnr,
}

impl FigureId {
    pub const ALL: [FigureId; 4] = [FigureId::Arrival, FigureId::Visibility, FigureId::Snr, FigureId::IntegratedSnr];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Arrival => "arrival",
            FigureId::Visibility => "visibility",
            FigureId::Snr => "snr",
            FigureId::IntegratedSnr => "integrated_snr",
        }
    }

    fn y_axis(self) -> (&'static str, &'static str) {
        match self {
            FigureId::Arrival => ("spatially integrated counts", "counts"),
            FigureId::Visibility => ("stripe visibility M", "1"),
            FigureId::Snr => ("SNR = M^2/dM^2", "1"),
            FigureId::IntegratedSnr => ("integral of SNR minus background", "s"),
        }
    }
}

impl std::str::FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure `{s}` (arrival, visibility, snr, integrated_snr)")))
    }
}

/// Per-channel series on a shared delay axis. Missing entries mean the
/// source did not provide that quantity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelSeries {
    pub name: String,
    pub arrival: Option<Vec<f64>>,
    pub visibility: Option<Vec<Option<f64>>>,
    pub snr: Option<Vec<Option<f64>>>,
    pub integrated_snr: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotSource {
    pub delays: Vec<f64>,
    pub channels: Vec<ChannelSeries>,
    pub threshold: f64,
    pub config_hash: String,
}

fn from_curves(name: &str, c: &MeanCurves) -> ChannelSeries {
    ChannelSeries {
        name: name.into(),
        arrival: Some(c.arrival.clone()),
        visibility: Some(c.visibility.clone()),
        snr: Some(c.snr.clone()),
        integrated_snr: Some(c.integrated_snr.clone()),
    }
}

impl PlotSource {
    pub fn from_ensemble(e: &EnsembleResult, threshold: f64) -> Self {
        Self {
            delays: e.delays.clone(),
            channels: vec![from_curves("reference", &e.reference), from_curves("fast", &e.fast)],
            threshold,
            config_hash: e.config_hash.clone(),
        }
    }

    pub fn from_pair(run: &SeedRun, threshold: f64, config_hash: &str) -> Self {
        let ch = |name: &str, arrival: &[f64], t: &crate::analysis::VisibilityTrace, integ: &[f64]| ChannelSeries {
            name: name.into(),
            arrival: Some(arrival.to_vec()),
            visibility: Some(t.points.iter().map(|p| p.m).collect()),
            snr: Some(t.snr()),
            integrated_snr: Some(integ.to_vec()),
        };
        Self {
            delays: run.report.delays.clone(),
            channels: vec![
                ch("reference", &run.arrival_reference, &run.reference, &run.report.integrated_reference),
                ch("fast", &run.arrival_fast, &run.fast, &run.report.integrated_fast),
            ],
            threshold,
            config_hash: config_hash.into(),
        }
    }

    /// Reads the outputs of `ensemble`, `compare` or `simulate` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let threshold = fs::read_to_string(dir.join("config.cfg"))
            .ok()
            .and_then(|t| crate::experiment::ExperimentConfig::parse(&t).ok())
            .map_or(1.0, |c| c.analysis.threshold);
        let mut src = PlotSource { threshold, ..Default::default() };
        for name in ["reference", "fast"] {
            let ensemble = dir.join(format!("mean_{name}.csv"));
            let trace = dir.join(format!("trace_{name}.csv"));
            let series = if ensemble.exists() {
                let t = read_table(&ensemble)?;
                src.take_axis(&t)?;
                ChannelSeries {
                    name: name.into(),
                    arrival: Some(t.required("arrival")?),
                    visibility: Some(t.column("visibility")?),
                    snr: Some(t.column("snr")?),
                    integrated_snr: Some(t.required("integrated_snr")?),
                }
            } else if trace.exists() {
                let t = read_table(&trace)?;
                src.take_axis(&t)?;
                let arrival = if dir.join("arrival.csv").exists() {
                    Some(read_table(&dir.join("arrival.csv"))?.required(name)?)
                } else if dir.join(format!("arrival_{name}.csv")).exists() {
                    Some(read_table(&dir.join(format!("arrival_{name}.csv")))?.required("counts")?)
                } else {
                    None
                };
                ChannelSeries {
                    name: name.into(),
                    arrival,
                    visibility: Some(t.column("m")?),
                    snr: Some(t.column("snr")?),
                    integrated_snr: Some(t.required("cumulative_snr")?),
                }
            } else {
                continue;
            };
            src.config_hash = read_hash(if ensemble.exists() { &ensemble } else { &trace });
            src.channels.push(series);
        }
        Ok(src)
    }

    fn take_axis(&mut self, t: &Table) -> Result<()> {
        let d = t.required("delay_s")?;
        if self.delays.is_empty() {
            self.delays = d;
        } else if self.delays != d {
            return Err(Error::AxisMismatch);
        }
        Ok(())
    }
}

fn read_hash(path: &Path) -> String {
    fs::read_to_string(path)
        .ok()
        .and_then(|t| t.lines().next().and_then(|l| l.strip_prefix("# config_hash ")).map(|h| h.split(' ').next().unwrap_or("").to_string()))
        .unwrap_or_default()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    path: String,
}

impl Table {
    fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingSeries(format!("column `{name}` in {}", self.path)))?;
        self.rows
            .iter()
            .map(|r| {
                let v = r.get(i).map(String::as_str).unwrap_or("");
                if v.is_empty() {
                    Ok(None)
                } else {
                    v.parse::<f64>().map(Some).map_err(|_| Error::Container(format!("bad number `{v}` in {}", self.path)))
                }
            })
            .collect()
    }

    fn required(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .map(|v| v.ok_or_else(|| Error::MissingSeries(format!("empty `{name}` in {}", self.path))))
            .collect()
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::MissingSeries(format!("empty file {}", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok(Table { header, rows, path: path.display().to_string() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub y: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureBundle {
    pub id: FigureId,
    pub x_label: String,
    pub x_units: String,
    pub y_label: String,
    pub y_units: String,
    pub x: Vec<f64>,
    pub series: Vec<Series>,
    pub config_hash: String,
}

/// Projects the source onto one figure. Values are copied, not recomputed.
pub fn emit_figure(src: &PlotSource, id: FigureId) -> Result<FigureBundle> {
    let mut series = Vec::new();
    for ch in &src.channels {
        let y: Option<Vec<Option<f64>>> = match id {
            FigureId::Arrival => ch.arrival.as_ref().map(|v| v.iter().copied().map(Some).collect()),
            FigureId::Visibility => ch.visibility.clone(),
            FigureId::Snr => ch.snr.clone(),
            FigureId::IntegratedSnr => ch.integrated_snr.as_ref().map(|v| v.iter().copied().map(Some).collect()),
        };
        if let Some(y) = y {
            if y.len() != src.delays.len() {
                return Err(Error::SizeMismatch { expected: src.delays.len(), got: y.len() });
            }
            series.push(Series { name: ch.name.clone(), y });
        }
    }
    if series.is_empty() {
        return Err(Error::MissingSeries(format!("no channel provides `{}`", id.name())));
    }
    if id == FigureId::Snr {
        series.push(Series { name: "threshold".into(), y: vec![Some(src.threshold); src.delays.len()] });
    }
    if src.delays.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonUniformDelays);
    }
    let (y_label, y_units) = id.y_axis();
    Ok(FigureBundle {
        id,
        x_label: "gate delay".into(),
        x_units: "s".into(),
        y_label: y_label.into(),
        y_units: y_units.into(),
        x: src.delays.clone(),
        series,
        config_hash: src.config_hash.clone(),
    })
}

/// Writes `<figure>_<series>.csv` for each series and
/// `<figure>_manifest.txt`. Returns the file names in write order.
pub fn write_bundle(dir: &Path, b: &FigureBundle) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let mut manifest = String::new();
    let _ = writeln!(manifest, "figure = {}", b.id.name());
    let _ = writeln!(manifest, "config_hash = {}", b.config_hash);
    let _ = writeln!(manifest, "x_label = {}", b.x_label);
    let _ = writeln!(manifest, "x_units = {}", b.x_units);
    let _ = writeln!(manifest, "y_label = {}", b.y_label);
    let _ = writeln!(manifest, "y_units = {}", b.y_units);
    let _ = writeln!(manifest, "points = {}", b.x.len());
    for s in &b.series {
        let name = format!("{}_{}.csv", b.id.name(), s.name);
        let mut csv = String::from("x,y\n");
        for (x, y) in b.x.iter().zip(&s.y) {
            let _ = writeln!(csv, "{x},{}", y.map_or_else(String::new, |v| v.to_string()));
        }
        fs::write(dir.join(&name), csv)?;
        let _ = writeln!(manifest, "series = {name}");
        names.push(name);
    }
    let manifest_name = format!("{}_manifest.txt", b.id.name());
    fs::write(dir.join(&manifest_name), manifest)?;
    names.push(manifest_name);
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> PlotSource {
        PlotSource {
            delays: vec![0.0, 1.0, 2.0],
            channels: vec![
                ChannelSeries {
                    name: "reference".into(),
                    arrival: Some(vec![1.0, 5.0, 2.0]),
                    visibility: Some(vec![None, Some(0.25), Some(0.5)]),
                    snr: Some(vec![None, None, Some(2.0)]),
                    integrated_snr: Some(vec![0.0, 0.0, 1.0]),
                },
                ChannelSeries { name: "fast".into(), arrival: Some(vec![4.0, 3.0, 1.0]), ..Default::default() },
            ],
            threshold: 1.0,
            config_hash: "abc".into(),
        }
    }

    #[test]
    fn snr_has_threshold_line() {
        let b = emit_figure(&src(), FigureId::Snr).unwrap();
        let names: Vec<_> = b.series.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["reference", "threshold"]);
        assert_eq!(b.series[1].y, vec![Some(1.0); 3]);
    }

    #[test]
    fn values_are_projected_exactly() {
        let b = emit_figure(&src(), FigureId::Visibility).unwrap();
        assert_eq!(b.series[0].y, src().channels[0].visibility.clone().unwrap());
        let a = emit_figure(&src(), FigureId::Arrival).unwrap();
        assert_eq!(a.series.len(), 2);
    }

    #[test]
    fn empty_source_is_missing_series() {
        assert!(matches!(emit_figure(&PlotSource::default(), FigureId::Arrival), Err(Error::MissingSeries(_))));
    }

    #[test]
    fn written_files_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let b = emit_figure(&src(), FigureId::Snr).unwrap();
        let names = write_bundle(dir.path(), &b).unwrap();
        assert_eq!(names, ["snr_reference.csv", "snr_threshold.csv", "snr_manifest.txt"]);
        let text = fs::read_to_string(dir.path().join("snr_reference.csv")).unwrap();
        assert_eq!(text, "x,y\n0,\n1,\n2,2\n");
    }

    #[test]
    fn figure_names_parse() {
        for f in FigureId::ALL {
            assert_eq!(f.name().parse::<FigureId>().unwrap(), f);
        }
        assert!("bogus".parse::<FigureId>().is_err());
    }
}

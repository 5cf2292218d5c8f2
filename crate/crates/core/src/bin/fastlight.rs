use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use fastlight::experiment::{
    compare_to_dir, run_ensemble_saving, simulate_to_dir, sweep_csv, sweep_parameter, write_ensemble, Channel,
    ExperimentConfig, MediumConfig, SweepParameter,
};
use fastlight::medium::{calibrate_doublet, dispersion_report, DoubletTarget};
use fastlight::plot::{emit_figure, write_bundle, FigureId, PlotSource};
use fastlight::{Error, Result};

#[derive(Parser)]
#[command(name = "fastlight", version, about = "Fast-light pulse detection latency simulator")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write every frame stack to the output directory.
    #[arg(long)]
    save_frames: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Reference,
    Fast,
}

#[derive(Subcommand)]
enum Command {
    /// Run one channel for one seed and write its trace.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "fast")]
        channel: ChannelArg,
        /// Defaults to the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run both channels for one seed and compare detection times.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run both channels over many seeds and aggregate.
    Ensemble {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's seed count.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Repeat the ensemble over values of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// efficiency | gain | advancement
        #[arg(long)]
        parameter: String,
        /// Comma-separated values; advancement in ns.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Fit a symmetric gain doublet to a target group index and carrier gain.
    CalibrateMedium {
        #[arg(long, default_value_t = -2400.0, allow_hyphen_values = true)]
        group_index: f64,
        #[arg(long, default_value_t = 1.005)]
        carrier_gain: f64,
        #[arg(long, default_value_t = 9.5)]
        peak_gain: f64,
        /// Metres.
        #[arg(long, default_value_t = 0.017)]
        length: f64,
        /// Write the `[medium]` table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot-ready CSV files for one figure from a run directory.
    Emit {
        /// arrival | visibility | snr | integrated_snr
        #[arg(long)]
        figure: String,
        #[arg(long)]
        from: PathBuf,
        /// Defaults to `<from>/figures`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>, seeds: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.ensemble.base_seed = s;
    }
    if let Some(n) = seeds {
        cfg.ensemble.n_seeds = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ns(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{:.2} ns", x * 1e9))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run, channel, seed } => {
            let cfg = load(&run.config, None, None)?;
            let channel = match channel {
                ChannelArg::Reference => Channel::Reference,
                ChannelArg::Fast => Channel::Fast,
            };
            let seed = seed.unwrap_or(cfg.ensemble.base_seed);
            let trace = simulate_to_dir(&cfg, channel, seed, &run.out, run.save_frames)?;
            let t = fastlight::analysis::detection_time(&trace, cfg.analysis.threshold, cfg.analysis.persistence);
            info!("{} channel, seed {seed}: detection at {}", channel.name(), ns(t));
        }
        Command::Compare { run, seed } => {
            let cfg = load(&run.config, None, None)?;
            let seed = seed.unwrap_or(cfg.ensemble.base_seed);
            let r = compare_to_dir(&cfg, seed, &run.out, run.save_frames)?;
            info!(
                "seed {seed}: reference {}, fast {}, advancement {}",
                ns(r.report.t_detect_reference),
                ns(r.report.t_detect_fast),
                ns(r.report.advancement)
            );
        }
        Command::Ensemble { run, seed, seeds } => {
            let cfg = load(&run.config, seed, seeds)?;
            let frames = run.save_frames.then(|| run.out.join("frames"));
            if let Some(f) = &frames {
                std::fs::create_dir_all(f)?;
            }
            let e = run_ensemble_saving(&cfg, frames.as_deref())?;
            write_ensemble(&run.out, &cfg, &e)?;
            match e.advancement {
                Some(a) => info!(
                    "{} seeds, {} with both detections: advancement {:.2} ± {:.2} ns (se {:.2} ns), {:.1}% of the pulse width",
                    e.seeds.len(),
                    a.n,
                    a.mean * 1e9,
                    a.std * 1e9,
                    a.se * 1e9,
                    100.0 * a.mean / e.pulse_fwhm
                ),
                None => info!("{} seeds, no run detected both channels", e.seeds.len()),
            }
            if let Some((lo, hi)) = e.window_after_onset() {
                info!("fast integrated SNR above reference from {:.1} to {:.1} ns after onset", lo * 1e9, hi * 1e9);
            }
        }
        Command::Sweep { run, parameter, values, seed, seeds } => {
            let cfg = load(&run.config, seed, seeds)?;
            let p: SweepParameter = parameter.parse()?;
            let rows = sweep_parameter(&cfg, p, &values)?;
            std::fs::create_dir_all(&run.out)?;
            std::fs::write(run.out.join("config.cfg"), cfg.to_toml())?;
            std::fs::write(
                run.out.join(format!("sweep_{}.csv", p.name())),
                format!("# config_hash {}\n{}", cfg.hash(), sweep_csv(p, &rows)),
            )?;
            for r in &rows {
                info!("{} = {}: advancement {}", p.name(), r.value, ns(r.advancement.map(|a| a.mean)));
            }
        }
        Command::CalibrateMedium { group_index, carrier_gain, peak_gain, length, out } => {
            let target = DoubletTarget { group_index, carrier_gain, peak_gain, length };
            let medium = calibrate_doublet(&target)?;
            let rep = dispersion_report(&medium)?;
            info!(
                "group index {:.1}, carrier gain {:.4}, delay {:.2} ns over {} m",
                rep.group_index,
                rep.gain_at_carrier,
                rep.delay * 1e9,
                length
            );
            #[derive(serde::Serialize)]
            struct Wrapper {
                medium: MediumConfig,
            }
            let text = toml::to_string(&Wrapper { medium: MediumConfig::from_spec(&medium) })
                .map_err(|e| Error::Config(e.to_string()))?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Emit { figure, from, out } => {
            let id: FigureId = figure.parse()?;
            let src = PlotSource::load(&from)?;
            let bundle = emit_figure(&src, id)?;
            let dir = out.unwrap_or_else(|| from.join("figures"));
            for name in write_bundle(&dir, &bundle)? {
                info!("wrote {}", dir.join(name).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

//! `beamforge`: simulate, beamform, train and evaluate from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamforge_core::beamformers::BeamformerKind;
use beamforge_core::flops::flop_ledger;
use beamforge_core::imaging::MetricsReport;
use beamforge_core::io::{load_model, load_rfc, save_csv, save_model, save_pgm, save_rfc, write_csv};
use beamforge_core::neural::{beamform_neural, train, WeightNetwork};
use beamforge_core::pipeline::{self, Config};
use beamforge_core::{Error, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "beamforge", version, about = "Ultrasound channel-data simulation and beamforming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate RF channel data for a configured phantom.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Beamform an RF container into a B-mode image and a metrics table.
    Beamform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        bf: BeamformerKind,
        /// Overrides the configuration stored in the container.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the image path with a `.csv` extension.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Train the per-pixel weight network against adaptive beamformer targets.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the model path with a `.csv` extension.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Beamform an RF container with a trained network.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Per-pixel operation counts of every beamformer.
    Flops {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to the configured array size, or 128.
        #[arg(long)]
        channels: Option<usize>,
        /// MVDR subarray length; defaults to the channel count.
        #[arg(long)]
        subarray: Option<usize>,
        #[arg(long, default_value_t = 2)]
        temporal_halfwidth: usize,
        /// Prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<BeamformerKind, String> {
    BeamformerKind::ALL
        .into_iter()
        .find(|k| k.id() == s)
        .ok_or_else(|| {
            let ids: Vec<&str> = BeamformerKind::ALL.iter().map(|k| k.id()).collect();
            format!("unknown beamformer {s:?}, expected one of {}", ids.join(", "))
        })
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    beamformer: &'a str,
    fwhm_lateral_m: Option<f64>,
    fwhm_axial_m: Option<f64>,
    contrast_ratio_db: Option<f64>,
    cnr: Option<f64>,
    peak_sidelobe_db: Option<f64>,
    flops_per_pixel: Option<u64>,
}

impl<'a> MetricsRow<'a> {
    fn new(beamformer: &'a str, m: &MetricsReport) -> Self {
        Self {
            beamformer,
            fwhm_lateral_m: m.fwhm_lateral,
            fwhm_axial_m: m.fwhm_axial,
            contrast_ratio_db: m.contrast_ratio,
            cnr: m.cnr,
            peak_sidelobe_db: m.peak_sidelobe,
            flops_per_pixel: m.flops_per_pixel,
        }
    }
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

/// Prefixes I/O failures with the offending path.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn sibling_csv(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

/// Container plus the configuration to process it with.
fn load_input(input: &Path, config: Option<&Path>) -> Result<(beamforge_core::simulator::RfDataCube, Config)> {
    let (cube, echo) = at(input, load_rfc(input))?;
    let cfg = match config {
        Some(p) => at(p, Config::load(p))?,
        None if echo.is_null() => {
            return Err(Error::Config(format!(
                "{} carries no configuration; pass --config",
                input.display()
            )))
        }
        None => Config::from_value(echo)?,
    };
    Ok((cube, cfg))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = at(&config, Config::load(&config))?;
            let cube = pipeline::simulate(&cfg)?;
            at(&out, save_rfc(&out, &cube, &cfg.to_value()))
        }
        Command::Beamform {
            input,
            bf,
            config,
            out,
            metrics,
        } => {
            let (cube, cfg) = load_input(&input, config.as_deref())?;
            let z = pipeline::migrate_rf(&cfg, &cube)?;
            let img = pipeline::beamform_rf(&cfg, &z, bf)?;
            at(&out, save_pgm(&out, &pipeline::bmode(&cfg, &img)?))?;
            let flops = pipeline::flops_for(&cfg, Some(bf), cube.num_channels())?;
            let report = pipeline::metrics(&cfg, &img, Some(flops))?;
            let path = metrics.unwrap_or_else(|| sibling_csv(&out));
            at(&path, save_csv(&path, &[MetricsRow::new(bf.id(), &report)]))
        }
        Command::Train {
            input,
            config,
            out,
            losses,
        } => {
            let (cube, cfg) = load_input(&input, config.as_deref())?;
            let z = pipeline::migrate_rf(&cfg, &cube)?;
            let data = pipeline::training_set(&cfg, &z, cfg.training.target)?;
            let net = cfg.network(cube.num_channels())?;
            let run = train(&net, &data, &cfg.training.loss, &cfg.training.schedule())?;
            at(&out, save_model(&out, &run.net))?;
            let rows: Vec<LossRow> = std::iter::once(run.initial_loss)
                .chain(run.loss_history.iter().copied())
                .enumerate()
                .map(|(epoch, loss)| LossRow { epoch, loss })
                .collect();
            let path = losses.unwrap_or_else(|| sibling_csv(&out));
            at(&path, save_csv(&path, &rows))
        }
        Command::Eval {
            model,
            input,
            config,
            out,
            metrics,
        } => {
            let net = at(&model, load_model(&model))?;
            let (cube, cfg) = load_input(&input, config.as_deref())?;
            let z = pipeline::migrate_rf(&cfg, &cube)?;
            let img = beamform_neural(&z, &net)?;
            at(&out, save_pgm(&out, &pipeline::bmode(&cfg, &img)?))?;
            let cost = beamforge_core::flops::network_flops(net.layer_dims()).two_flop_convention();
            let report = pipeline::metrics(&cfg, &img, Some(cost))?;
            let path = metrics.unwrap_or_else(|| sibling_csv(&out));
            at(&path, save_csv(&path, &[MetricsRow::new("neural", &report)]))
        }
        Command::Flops {
            config,
            channels,
            subarray,
            temporal_halfwidth,
            out,
        } => {
            let cfg = config.as_deref().map(|p| at(p, Config::load(p))).transpose()?;
            let c = match (channels, &cfg) {
                (Some(c), _) => c,
                (None, Some(cfg)) => cfg.array.num_elements,
                (None, None) => 128,
            };
            if c == 0 {
                return Err(Error::InvalidArgument("channel count must be positive".into()));
            }
            let l = subarray.unwrap_or(c);
            if l == 0 || l > c {
                return Err(Error::InvalidArgument(format!("subarray length {l} outside [1, {c}]")));
            }
            let dims = match &cfg {
                Some(cfg) => cfg.network(c)?.layer_dims().to_vec(),
                None => WeightNetwork::reference_dims(c),
            };
            let rows = flop_ledger(c, l, temporal_halfwidth, &dims);
            match out {
                Some(path) => at(&path, save_csv(&path, &rows)),
                None => write_csv(std::io::stdout().lock(), &rows),
            }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("BEAMFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("BEAMFORGE_THREADS must be a non-negative integer, got {v:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error: {}", msg.lines().next().unwrap_or("invalid usage").trim_start_matches("error: "));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
    }
}

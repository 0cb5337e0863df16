//! `switof`: simulate, demodulate, reconstruct, and evaluate single-shot
//! synthetic-wavelength interferometric depth captures.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 pipeline
//! infeasibility (spectral overlap, impossible unwrap ladder).

mod commands;
mod config;
mod error;
mod grid;
mod manifest;
mod png;

use clap::{Args, Parser, Subcommand};
use commands::{
    parse_carrier, DemodSpec, EvalPrecisionSpec, NlosSimSpec, NlosSpec, ReconstructSpec, SimMode,
    UnwrapSpec, VideoSpec,
};
use config::SimConfig;
use error::{CliError, Result};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "switof",
    version,
    about = "Synthetic-wavelength interferometric ToF: simulation and reconstruction pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene into ground truth and interferograms (or a frame
    /// sequence when the config has a [motion] section).
    Simulate(SimulateArgs),
    /// Recover one complex field from one interferogram sideband.
    Demod(DemodArgs),
    /// Interferogram(s) -> synthetic field, phase, and depth map.
    Reconstruct(ReconstructArgs),
    /// Multi-frequency unwrapping over a ladder of synthetic-field grids.
    Unwrap(UnwrapArgs),
    /// Depth-precision table over a sweep of synthetic wavelengths and
    /// acquisition modes.
    EvalPrecision(EvalPrecisionArgs),
    /// Backpropagate a synthetic field to localize a hidden source.
    Nlos(NlosArgs),
    /// Per-frame single-shot reconstruction over a frame directory.
    Video(VideoArgs),
    /// Render a grid file to an 8-bit PNG with a recorded normalization.
    ExportPng(ExportPngArgs),
    /// Re-execute a recorded run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene/optics/camera description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Acquisition mode to render: single, double, or both.
    #[arg(long, default_value = "single")]
    mode: String,
    /// Render sequence frames in parallel with this many threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct DemodArgs {
    /// Interferogram grid file.
    #[arg(long)]
    input: PathBuf,
    /// Output field grid file.
    #[arg(long)]
    out: PathBuf,
    /// Carrier frequency "u,v" in cycles/pixel; located automatically when
    /// omitted.
    #[arg(long)]
    carrier: Option<String>,
    /// Search half-plane for automatic location: horizontal or vertical.
    #[arg(long, default_value = "horizontal")]
    hint: String,
    /// DC exclusion radius for carrier search, cycles/pixel.
    #[arg(long, default_value_t = 0.05)]
    dc_exclusion: f64,
    /// Sideband window: hann or gaussian.
    #[arg(long, default_value = "hann")]
    filter: String,
    /// Sideband window radius, cycles/pixel (default: 0.8x the free room).
    #[arg(long)]
    filter_radius: Option<f64>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// single-shot or double-shot.
    #[arg(long)]
    mode: String,
    /// Crossed-fringe image (single-shot) or first shot (double-shot).
    #[arg(long)]
    input: PathBuf,
    /// Second shot (double-shot only).
    #[arg(long)]
    input2: Option<PathBuf>,
    /// First optical wavelength in meters.
    #[arg(long, default_value_t = 850e-9)]
    lambda1: f64,
    /// Second optical wavelength in meters.
    #[arg(long)]
    lambda2: Option<f64>,
    /// Synthetic wavelength in millimeters (alternative to --lambda2).
    #[arg(long)]
    synthetic_mm: Option<f64>,
    /// Horizontal-axis carrier "u,v"; default bin-aligned near 1/3.
    #[arg(long)]
    carrier_h: Option<String>,
    /// Vertical-axis carrier "u,v".
    #[arg(long)]
    carrier_v: Option<String>,
    #[arg(long, default_value = "hann")]
    filter: String,
    #[arg(long)]
    filter_radius: Option<f64>,
    /// Complex-domain smoothing of the synthetic field, pixels.
    #[arg(long, default_value_t = 0.0)]
    smooth_sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UnwrapArgs {
    /// Synthetic-field grid; repeat once per ladder rung.
    #[arg(long = "field", required = true)]
    fields: Vec<PathBuf>,
    /// Synthetic wavelength in millimeters for each --field, in order.
    #[arg(long = "lambda-syn-mm", required = true)]
    lambda_syn_mm: Vec<f64>,
    /// Expected scene depth span in millimeters.
    #[arg(long)]
    depth_span_mm: f64,
    /// Guidance smoothing sigma, pixels.
    #[arg(long, default_value_t = 3.0)]
    smooth_sigma: f64,
    /// Relative amplitude floor below which phase is masked invalid.
    #[arg(long, default_value_t = 0.3)]
    amplitude_floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalPrecisionArgs {
    /// Planar-scene config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated synthetic wavelengths in millimeters, e.g.
    /// "40,10,5,3,1".
    #[arg(long)]
    synthetic_mm: String,
    /// Comma-separated modes: single, double.
    #[arg(long, default_value = "single,double")]
    modes: String,
    /// Square evaluation patch side, millimeters.
    #[arg(long, default_value_t = 23.0)]
    roi_mm: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct NlosArgs {
    /// Synthetic-field grid captured at the scatterer plane.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Simulate a hidden point source instead of reading a field.
    #[arg(long)]
    simulate: bool,
    /// Capture grid width in pixels (simulation).
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Capture pixel pitch in millimeters (simulation).
    #[arg(long, default_value_t = 0.5)]
    pitch_mm: f64,
    /// Hidden source "x,y,z" in millimeters: lateral offsets and depth
    /// behind the plane (simulation).
    #[arg(long, default_value = "0,0,200")]
    source_mm: String,
    #[arg(long, default_value_t = 11)]
    screen_seed: u64,
    /// Pupil cutoff of the relay imaging (simulation), cycles/pixel.
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long, default_value_t = 850e-9)]
    lambda1: f64,
    /// Synthetic wavelength in millimeters.
    #[arg(long)]
    lambda_syn_mm: f64,
    #[arg(long)]
    z_min_mm: f64,
    #[arg(long)]
    z_max_mm: f64,
    #[arg(long)]
    z_step_mm: f64,
    /// Complex smoothing of the synthetic field before the sweep, pixels.
    #[arg(long, default_value_t = 0.0)]
    smooth_sigma: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also render the focus image as PNG.
    #[arg(long)]
    png: bool,
}

#[derive(Args)]
struct VideoArgs {
    /// Directory of frame_NNNN.grid interferograms.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value_t = 850e-9)]
    lambda1: f64,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    synthetic_mm: Option<f64>,
    #[arg(long)]
    carrier_h: Option<String>,
    #[arg(long)]
    carrier_v: Option<String>,
    #[arg(long)]
    filter_radius: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    smooth_sigma: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also render each depth map as PNG.
    #[arg(long)]
    png: bool,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ExportPngArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// auto, phase, amplitude, value (alias depth), or intensity.
    #[arg(long, default_value = "auto")]
    map: String,
    /// gray, cyclic, or heat.
    #[arg(long, default_value = "gray")]
    colormap: String,
    /// Fixed normalization "min,max"; min-max of the data when omitted.
    #[arg(long)]
    range: Option<String>,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| CliError::Config(format!("bad number \"{p}\": {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = SimConfig::load(&a.config)?;
            let mode = SimMode::parse(&a.mode)?;
            commands::run_simulate(&cfg, &config_dir(&a.config), &a.out, mode, a.jobs)?;
        }
        Command::Demod(a) => {
            let spec = DemodSpec {
                input: a.input,
                out: a.out,
                carrier: a.carrier.as_deref().map(parse_carrier).transpose()?,
                hint: a.hint,
                dc_exclusion: a.dc_exclusion,
                filter: a.filter,
                filter_radius: a.filter_radius,
            };
            commands::run_demod(&spec)?;
        }
        Command::Reconstruct(a) => {
            let spec = ReconstructSpec {
                mode: a.mode,
                input: a.input,
                input2: a.input2,
                lambda1_m: a.lambda1,
                lambda2_m: a.lambda2,
                synthetic_m: a.synthetic_mm.map(|v| v * 1e-3),
                carrier_h: a.carrier_h.as_deref().map(parse_carrier).transpose()?,
                carrier_v: a.carrier_v.as_deref().map(parse_carrier).transpose()?,
                filter: a.filter,
                filter_radius: a.filter_radius,
                smooth_sigma: a.smooth_sigma,
                out: a.out,
            };
            commands::run_reconstruct(&spec)?;
        }
        Command::Unwrap(a) => {
            let spec = UnwrapSpec {
                fields: a.fields,
                lambda_syn_m: a.lambda_syn_mm.iter().map(|v| v * 1e-3).collect(),
                depth_span_m: a.depth_span_mm * 1e-3,
                smooth_sigma: a.smooth_sigma,
                amplitude_floor: a.amplitude_floor,
                out: a.out,
            };
            commands::run_unwrap(&spec)?;
        }
        Command::EvalPrecision(a) => {
            let cfg = SimConfig::load(&a.config)?;
            let spec = EvalPrecisionSpec {
                synthetic_m: parse_list(&a.synthetic_mm)?.iter().map(|v| v * 1e-3).collect(),
                modes: a.modes.split(',').map(|s| s.trim().to_string()).collect(),
                roi_m: a.roi_mm * 1e-3,
                out: a.out,
            };
            commands::run_eval_precision(&cfg, &config_dir(&a.config), &spec, a.jobs)?;
        }
        Command::Nlos(a) => {
            let simulate = if a.simulate {
                let src = parse_list(&a.source_mm)?;
                if src.len() != 3 {
                    return Err(CliError::Config("--source-mm needs \"x,y,z\"".into()));
                }
                Some(NlosSimSpec {
                    width: a.width,
                    pitch_m: a.pitch_mm * 1e-3,
                    source_m: (src[0] * 1e-3, src[1] * 1e-3, src[2] * 1e-3),
                    screen_seed: a.screen_seed,
                    lambda1_m: a.lambda1,
                    aperture_cutoff: a.cutoff,
                })
            } else {
                None
            };
            let spec = NlosSpec {
                field: a.field,
                simulate,
                lambda_syn_m: a.lambda_syn_mm * 1e-3,
                z_min_m: a.z_min_mm * 1e-3,
                z_max_m: a.z_max_mm * 1e-3,
                z_step_m: a.z_step_mm * 1e-3,
                smooth_sigma: a.smooth_sigma,
                out: a.out,
                write_png: a.png,
            };
            commands::run_nlos(&spec)?;
        }
        Command::Video(a) => {
            let spec = VideoSpec {
                frames_dir: a.frames,
                lambda1_m: a.lambda1,
                lambda2_m: a.lambda2,
                synthetic_m: a.synthetic_mm.map(|v| v * 1e-3),
                carrier_h: a.carrier_h.as_deref().map(parse_carrier).transpose()?,
                carrier_v: a.carrier_v.as_deref().map(parse_carrier).transpose()?,
                filter_radius: a.filter_radius,
                smooth_sigma: a.smooth_sigma,
                out: a.out,
                write_png: a.png,
            };
            commands::run_video(&spec, a.jobs)?;
        }
        Command::ExportPng(a) => {
            let g = grid::read_grid(&a.input)?;
            let kind = png::MapKind::parse(&a.map)?;
            let cmap = png::Colormap::parse(&a.colormap)?;
            let range = a
                .range
                .as_deref()
                .map(|s| -> Result<(f64, f64)> {
                    let v = parse_list(s)?;
                    if v.len() != 2 {
                        return Err(CliError::Config("--range needs \"min,max\"".into()));
                    }
                    Ok((v[0], v[1]))
                })
                .transpose()?;
            png::export_png(&g, kind, cmap, range, &a.out)?;
        }
        Command::Rerun(a) => {
            commands::run_rerun(&a.manifest, &a.out)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {e}", e.category());
        std::process::exit(e.exit_code());
    }
}

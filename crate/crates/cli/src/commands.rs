//! Subcommand implementations. Every command that writes artifacts also
//! writes a manifest with its resolved parameters and output hashes; `rerun`
//! replays a manifest.

use crate::config::SimConfig;
use crate::error::{CliError, Result};
use crate::grid;
use crate::manifest::Manifest;
use crate::png;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};
use switof_core::demod::{
    self, CarrierHint, CarrierLayout, CarrierSpec, FilterShape,
};
use switof_core::field::{fft2, phase_of, ComplexField, WavelengthPair};
use switof_core::metrology::{
    format_precision_table, precision_table, AcquisitionMode, PrecisionRun, Rect,
};
use switof_core::nlos::{focus_search, peak_position, sampling_guard_ok, PropagationPlan};
use switof_core::recon::{
    depth_from_phase, double_shot, single_shot, unwrap_cascade, CascadeConfig, OffsetConvention,
    Provenance, SyntheticField,
};
use switof_core::sim::{
    self, mix_seed, render_channels, render_sequence_frame, Interferogram, MotionScript,
};

pub fn parse_carrier(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!("expected \"u,v\", got \"{s}\"")));
    }
    let u = parts[0]
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("bad carrier component: {e}")))?;
    let v = parts[1]
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("bad carrier component: {e}")))?;
    Ok((u, v))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    crate::error::io_at(dir, std::fs::create_dir_all(dir))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    Single,
    Double,
    Both,
}

impl SimMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SimMode::Single),
            "double" => Ok(SimMode::Double),
            "both" => Ok(SimMode::Both),
            other => Err(CliError::Config(format!("unknown simulate mode \"{other}\""))),
        }
    }
}

/// Render a scene into ground truth plus interferograms. With a `[motion]`
/// section the output is a frame sequence; otherwise one static capture in
/// the requested acquisition mode(s).
pub fn run_simulate(
    cfg: &SimConfig,
    config_dir: &Path,
    out: &Path,
    mode: SimMode,
    jobs: Option<usize>,
) -> Result<PathBuf> {
    ensure_dir(out)?;
    let scene = cfg.build_scene(config_dir)?;
    let pair = cfg.wavelength_pair()?;
    let aperture = cfg.aperture()?;
    let layout = cfg.carrier_layout(scene.width, scene.height)?;

    let mut manifest = Manifest::new(
        "simulate",
        json!({
            "config": cfg,
            "config_dir": config_dir,
            "mode": mode,
        }),
    );

    // ground truth depth (raw heights; datum conventions apply downstream)
    let truth_path = out.join("truth.grid");
    grid::write_real_map(
        &truth_path,
        scene.width,
        scene.height,
        scene.pitch(),
        &scene.macro_height,
        None,
    )?;
    manifest.record_output(out, &truth_path)?;
    let refl_path = out.join("reflectivity.grid");
    grid::write_real_map(
        &refl_path,
        scene.width,
        scene.height,
        scene.pitch(),
        &scene.reflectivity,
        None,
    )?;
    manifest.record_output(out, &refl_path)?;

    if cfg.motion.is_some() {
        let script = cfg.build_motion_script()?;
        let (e1, e2) = sim::simulate_fields(&scene, &pair, &aperture)?;
        let ref_h = cfg.reference_for(layout.horizontal.frequency, &e1)?;
        let ref_v = cfg.reference_for(layout.vertical.frequency, &e2)?;
        let camera = cfg.camera_for(&[(&e1, &ref_h), (&e2, &ref_v)])?;
        let setup = sim::FrameSetup { pair, aperture, reference_h: ref_h, reference_v: ref_v, camera };

        let frames = render_sequence(&scene, &script, &setup, jobs)?;
        for (k, img) in frames.iter().enumerate() {
            let path = out.join(format!("frame_{k:04}.grid"));
            grid::write_interferogram(&path, img)?;
            manifest.record_output(out, &path)?;
        }
        // per-frame scripted truth for validation
        for (k, motion) in script.frames.iter().enumerate() {
            let frame_scene = sim::apply_motion(&scene, motion);
            let path = out.join(format!("truth_{k:04}.grid"));
            grid::write_real_map(
                &path,
                frame_scene.width,
                frame_scene.height,
                frame_scene.pitch(),
                &frame_scene.macro_height,
                None,
            )?;
            manifest.record_output(out, &path)?;
        }
    } else {
        let (e1, e2) = sim::simulate_fields(&scene, &pair, &aperture)?;
        let ref_h = cfg.reference_for(layout.horizontal.frequency, &e1)?;
        let ref_v = cfg.reference_for(layout.vertical.frequency, &e2)?;

        if matches!(mode, SimMode::Single | SimMode::Both) {
            let camera = cfg.camera_for(&[(&e1, &ref_h), (&e2, &ref_v)])?;
            let img = render_channels(&[(&e1, &ref_h), (&e2, &ref_v)], &camera)?;
            let path = out.join("single.grid");
            grid::write_interferogram(&path, &img)?;
            manifest.record_output(out, &path)?;
        }
        if matches!(mode, SimMode::Double | SimMode::Both) {
            // double shot: both wavelengths see the same (horizontal) carrier
            let ref_h2 = cfg.reference_for(layout.horizontal.frequency, &e2)?;
            let cam1 = cfg.camera_for(&[(&e1, &ref_h)])?;
            let mut cam2 = cfg.camera_for(&[(&e2, &ref_h2)])?;
            cam2.seed = mix_seed(cam1.seed, 1);
            let shot1 = render_channels(&[(&e1, &ref_h)], &cam1)?;
            let shot2 = render_channels(&[(&e2, &ref_h2)], &cam2)?;
            for (name, img) in [("shot1.grid", &shot1), ("shot2.grid", &shot2)] {
                let path = out.join(name);
                grid::write_interferogram(&path, img)?;
                manifest.record_output(out, &path)?;
            }
        }
    }
    manifest.write(out)
}

fn render_sequence(
    scene: &sim::SceneSpec,
    script: &MotionScript,
    setup: &sim::FrameSetup,
    jobs: Option<usize>,
) -> Result<Vec<Interferogram>> {
    let render = |(k, motion): (usize, &sim::MotionTransform)| {
        render_sequence_frame(scene, script, setup, k, motion).map_err(CliError::from)
    };
    match jobs {
        Some(n) => with_pool(n, || {
            script
                .frames
                .par_iter()
                .enumerate()
                .map(render)
                .collect::<Result<Vec<_>>>()
        }),
        None => script.frames.iter().enumerate().map(render).collect(),
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

// ---------------------------------------------------------------------------
// demod
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemodSpec {
    pub input: PathBuf,
    pub out: PathBuf,
    /// Explicit carrier; when absent the carrier is located from the
    /// spectrum using the hint.
    pub carrier: Option<(f64, f64)>,
    pub hint: String,
    pub dc_exclusion: f64,
    pub filter: String,
    pub filter_radius: Option<f64>,
}

pub fn run_demod(spec: &DemodSpec) -> Result<PathBuf> {
    let img = grid::read_interferogram(&spec.input)?;
    let shape = match spec.filter.as_str() {
        "hann" => FilterShape::Hann,
        "gaussian" => FilterShape::Gaussian,
        other => return Err(CliError::Config(format!("unknown filter \"{other}\""))),
    };
    let carrier = match spec.carrier {
        Some(freq) => {
            let radius = spec
                .filter_radius
                .unwrap_or_else(|| demod::default_filter_radius(freq, None));
            CarrierSpec::new(freq, shape, radius)?
        }
        None => {
            let hint = match spec.hint.as_str() {
                "horizontal" => CarrierHint::Horizontal,
                "vertical" => CarrierHint::Vertical,
                other => return Err(CliError::Config(format!("unknown hint \"{other}\""))),
            };
            let spectrum = fft2(&img.to_field()?)?;
            let mut located = demod::locate_carrier(&spectrum, hint, spec.dc_exclusion, 0.1)?;
            located.filter_shape = shape;
            located.filter_radius = spec
                .filter_radius
                .unwrap_or_else(|| demod::default_filter_radius(located.frequency, None));
            CarrierSpec::new(located.frequency, located.filter_shape, located.filter_radius)?
        }
    };
    let field = demod::extract_field(&img, &carrier)?;

    let out_dir = spec.out.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    ensure_dir(&out_dir)?;
    grid::write_field(&spec.out, &field)?;
    let mut manifest = Manifest::new(
        "demod",
        json!({
            "spec": spec,
            "carrier": { "frequency": carrier.frequency, "filter_radius": carrier.filter_radius },
        }),
    );
    manifest.record_input(&spec.input)?;
    manifest.record_output(&out_dir, &spec.out)?;
    manifest.write(&out_dir)
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructSpec {
    pub mode: String,
    pub input: PathBuf,
    pub input2: Option<PathBuf>,
    pub lambda1_m: f64,
    pub lambda2_m: Option<f64>,
    pub synthetic_m: Option<f64>,
    pub carrier_h: Option<(f64, f64)>,
    pub carrier_v: Option<(f64, f64)>,
    pub filter: String,
    pub filter_radius: Option<f64>,
    pub smooth_sigma: f64,
    pub out: PathBuf,
}

impl ReconstructSpec {
    fn pair(&self) -> Result<WavelengthPair> {
        match (self.lambda2_m, self.synthetic_m) {
            (Some(l2), None) => Ok(WavelengthPair::new(self.lambda1_m, l2)?),
            (None, Some(s)) => Ok(WavelengthPair::from_synthetic(self.lambda1_m, s)?),
            (Some(_), Some(_)) => {
                Err(CliError::Config("give either lambda2 or synthetic, not both".into()))
            }
            (None, None) => {
                Err(CliError::Config("one of lambda2 or synthetic is required".into()))
            }
        }
    }

    fn layout(&self, width: usize, height: usize) -> Result<CarrierLayout> {
        let shape = match self.filter.as_str() {
            "hann" => FilterShape::Hann,
            "gaussian" => FilterShape::Gaussian,
            other => return Err(CliError::Config(format!("unknown filter \"{other}\""))),
        };
        let defaults = CarrierLayout::default_for(width, height, None)?;
        let fh = self.carrier_h.unwrap_or(defaults.horizontal.frequency);
        let fv = self.carrier_v.unwrap_or(defaults.vertical.frequency);
        let rh = self
            .filter_radius
            .unwrap_or_else(|| demod::default_filter_radius(fh, None));
        let rv = self
            .filter_radius
            .unwrap_or_else(|| demod::default_filter_radius(fv, None));
        Ok(CarrierLayout {
            horizontal: CarrierSpec::new(fh, shape, rh)?,
            vertical: CarrierSpec::new(fv, shape, rv)?,
        })
    }
}

/// Reconstruct a synthetic field from one crossed-fringe image (single-shot)
/// or two single-reference images (double-shot), then derive phase and depth.
pub fn run_reconstruct(spec: &ReconstructSpec) -> Result<PathBuf> {
    let pair = spec.pair()?;
    let img = grid::read_interferogram(&spec.input)?;
    let layout = spec.layout(img.width, img.height)?;
    let mut manifest = Manifest::new("reconstruct", json!({ "spec": spec }));
    manifest.record_input(&spec.input)?;

    let mut syn: SyntheticField = match spec.mode.as_str() {
        "single-shot" => single_shot(&img, &layout, &pair)?,
        "double-shot" => {
            let second = spec
                .input2
                .as_ref()
                .ok_or_else(|| CliError::Config("double-shot needs --input2".into()))?;
            manifest.record_input(second)?;
            let img2 = grid::read_interferogram(second)?;
            double_shot(&img, &img2, &layout.horizontal, &pair)?
        }
        other => return Err(CliError::Config(format!("unknown mode \"{other}\""))),
    };
    if spec.smooth_sigma > 0.0 {
        syn = syn.smoothed(spec.smooth_sigma);
    }
    let pm = phase_of(&syn.field);
    let depth = depth_from_phase(&pm, img.pitch, pair.synthetic, OffsetConvention::ZeroMin)?;

    ensure_dir(&spec.out)?;
    let syn_path = spec.out.join("synthetic.grid");
    grid::write_field(&syn_path, &syn.field)?;
    let phase_path = spec.out.join("phase.grid");
    grid::write_real_map(&phase_path, pm.width, pm.height, img.pitch, &pm.phase, Some(&pm.valid))?;
    let depth_path = spec.out.join("depth.grid");
    grid::write_depth_map(&depth_path, &depth)?;
    for p in [&syn_path, &phase_path, &depth_path] {
        manifest.record_output(&spec.out, p)?;
    }
    manifest.write(&spec.out)
}

// ---------------------------------------------------------------------------
// unwrap
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnwrapSpec {
    pub fields: Vec<PathBuf>,
    pub lambda_syn_m: Vec<f64>,
    pub depth_span_m: f64,
    pub smooth_sigma: f64,
    pub amplitude_floor: f64,
    pub out: PathBuf,
}

/// Multi-frequency unwrapping of synthetic-field grids; emits the unwrapped
/// phase and depth at the finest wavelength.
pub fn run_unwrap(spec: &UnwrapSpec) -> Result<PathBuf> {
    if spec.fields.len() != spec.lambda_syn_m.len() {
        return Err(CliError::Config(format!(
            "{} field files but {} wavelengths",
            spec.fields.len(),
            spec.lambda_syn_m.len()
        )));
    }
    if spec.fields.is_empty() {
        return Err(CliError::Config("at least one --field is required".into()));
    }
    let mut manifest = Manifest::new("unwrap", json!({ "spec": spec }));
    let mut fields = Vec::new();
    let mut pitch = None;
    for (path, &lambda) in spec.fields.iter().zip(&spec.lambda_syn_m) {
        manifest.record_input(path)?;
        let f = grid::read_field(path)?;
        pitch.get_or_insert(f.pitch());
        fields.push(SyntheticField::new(f, lambda, Provenance::SingleShot)?);
    }
    let mut config = CascadeConfig::new(spec.smooth_sigma, spec.depth_span_m)?;
    config.amplitude_floor = spec.amplitude_floor;
    let unwrapped = unwrap_cascade(&fields, &config)?;
    let finest = fields
        .iter()
        .map(|f| f.synthetic_wavelength)
        .fold(f64::INFINITY, f64::min);

    let pm = unwrapped.to_phase_map();
    let depth = depth_from_phase(&pm, pitch.unwrap(), finest, OffsetConvention::ZeroMin)?;

    ensure_dir(&spec.out)?;
    let phase_path = spec.out.join("unwrapped_phase.grid");
    grid::write_real_map(
        &phase_path,
        pm.width,
        pm.height,
        pitch.unwrap(),
        &pm.phase,
        Some(&pm.valid),
    )?;
    let depth_path = spec.out.join("depth.grid");
    grid::write_depth_map(&depth_path, &depth)?;
    manifest.record_output(&spec.out, &phase_path)?;
    manifest.record_output(&spec.out, &depth_path)?;
    manifest.write(&spec.out)
}

// ---------------------------------------------------------------------------
// eval-precision
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalPrecisionSpec {
    pub synthetic_m: Vec<f64>,
    pub modes: Vec<String>,
    pub roi_m: f64,
    pub out: PathBuf,
}

/// Simulate the configured (planar) scene at every requested synthetic
/// wavelength and acquisition mode, then tabulate plane-fit depth precision.
pub fn run_eval_precision(
    cfg: &SimConfig,
    config_dir: &Path,
    spec: &EvalPrecisionSpec,
    jobs: Option<usize>,
) -> Result<PathBuf> {
    let scene = cfg.build_scene(config_dir)?;
    let aperture = cfg.aperture()?;
    let layout = cfg.carrier_layout(scene.width, scene.height)?;
    let roi = Rect::centered_physical(scene.width, scene.height, scene.pitch(), spec.roi_m);

    let modes: Vec<AcquisitionMode> = spec
        .modes
        .iter()
        .map(|m| match m.as_str() {
            "single" => Ok(AcquisitionMode::SingleShot),
            "double" => Ok(AcquisitionMode::DoubleShot),
            other => Err(CliError::Config(format!("unknown mode \"{other}\""))),
        })
        .collect::<Result<_>>()?;

    let mut cases = Vec::new();
    for &syn in &spec.synthetic_m {
        for &mode in &modes {
            cases.push((syn, mode));
        }
    }

    let build_run = |(idx, &(syn, mode)): (usize, &(f64, AcquisitionMode))| -> Result<PrecisionRun> {
        let pair = WavelengthPair::from_synthetic(cfg.optics.lambda1_m, syn)?;
        let (e1, e2) = sim::simulate_fields(&scene, &pair, &aperture)?;
        let frames = match mode {
            AcquisitionMode::SingleShot => {
                let ref_h = cfg.reference_for(layout.horizontal.frequency, &e1)?;
                let ref_v = cfg.reference_for(layout.vertical.frequency, &e2)?;
                let mut cam = cfg.camera_for(&[(&e1, &ref_h), (&e2, &ref_v)])?;
                cam.seed = mix_seed(cam.seed, idx as u64 + 1);
                vec![render_channels(&[(&e1, &ref_h), (&e2, &ref_v)], &cam)?]
            }
            AcquisitionMode::DoubleShot => {
                let ref1 = cfg.reference_for(layout.horizontal.frequency, &e1)?;
                let ref2 = cfg.reference_for(layout.horizontal.frequency, &e2)?;
                let mut cam1 = cfg.camera_for(&[(&e1, &ref1)])?;
                cam1.seed = mix_seed(cam1.seed, 2 * idx as u64 + 1);
                let mut cam2 = cam1;
                cam2.seed = mix_seed(cam1.seed, 2 * idx as u64 + 2);
                vec![
                    render_channels(&[(&e1, &ref1)], &cam1)?,
                    render_channels(&[(&e2, &ref2)], &cam2)?,
                ]
            }
        };
        Ok(PrecisionRun { pair, mode, frames, layout, roi })
    };

    let runs: Vec<PrecisionRun> = match jobs {
        Some(n) => with_pool(n, || {
            cases
                .par_iter()
                .enumerate()
                .map(build_run)
                .collect::<Result<Vec<_>>>()
        })?,
        None => cases
            .iter()
            .enumerate()
            .map(build_run)
            .collect::<Result<Vec<_>>>()?,
    };

    let reports = precision_table(&runs)?;
    let table = format_precision_table(&reports);

    ensure_dir(&spec.out)?;
    let table_path = spec.out.join("precision.tsv");
    grid::write_atomic(&table_path, table.as_bytes())?;
    let mut manifest = Manifest::new(
        "eval-precision",
        json!({ "config": cfg, "config_dir": config_dir, "spec": spec }),
    );
    manifest.record_output(&spec.out, &table_path)?;
    print!("{table}");
    manifest.write(&spec.out)?;
    Ok(table_path)
}

// ---------------------------------------------------------------------------
// nlos
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NlosSpec {
    /// Synthetic-field grid captured at the scatterer; mutually exclusive
    /// with `simulate`.
    pub field: Option<PathBuf>,
    pub simulate: Option<NlosSimSpec>,
    pub lambda_syn_m: f64,
    pub z_min_m: f64,
    pub z_max_m: f64,
    pub z_step_m: f64,
    pub smooth_sigma: f64,
    pub out: PathBuf,
    pub write_png: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NlosSimSpec {
    pub width: usize,
    pub pitch_m: f64,
    /// Hidden point source: lateral offsets and depth behind the plane (m).
    pub source_m: (f64, f64, f64),
    pub screen_seed: u64,
    pub lambda1_m: f64,
    pub aperture_cutoff: Option<f64>,
}

/// Backpropagate a synthetic field through the sweep range and report the
/// best-focus plane.
pub fn run_nlos(spec: &NlosSpec) -> Result<PathBuf> {
    let mut manifest = Manifest::new("nlos", json!({ "spec": spec }));
    let field = match (&spec.field, &spec.simulate) {
        (Some(path), None) => {
            manifest.record_input(path)?;
            grid::read_field(path)?
        }
        (None, Some(simspec)) => {
            let ps = sim::PointSourceScene {
                width: simspec.width,
                height: simspec.width,
                pitch: simspec.pitch_m,
                source: simspec.source_m,
                screen_seed: simspec.screen_seed,
                aperture: match simspec.aperture_cutoff {
                    Some(c) => Some(sim::ApertureSpec::new(c)?),
                    None => None,
                },
            };
            let pair = WavelengthPair::from_synthetic(simspec.lambda1_m, spec.lambda_syn_m)?;
            let c1 = sim::diffuser_capture_field(&ps, pair.lambda1)?;
            let c2 = sim::diffuser_capture_field(&ps, pair.lambda2)?;
            switof_core::field::mix_conjugate(&c1, &c2)?
        }
        _ => {
            return Err(CliError::Config(
                "nlos needs exactly one of --field or --simulate".into(),
            ))
        }
    };
    let field = if spec.smooth_sigma > 0.0 {
        let data = switof_core::field::gaussian_blur_complex(
            field.width(),
            field.height(),
            field.data(),
            None,
            spec.smooth_sigma,
        );
        ComplexField::new(field.width(), field.height(), field.pitch(), data)?
    } else {
        field
    };

    if !sampling_guard_ok(&field, spec.lambda_syn_m, spec.z_max_m) {
        eprintln!(
            "warning: sweep distance {} m exceeds the sampling guard (span^2/lambda); \
             results are produced but may alias",
            spec.z_max_m
        );
    }
    let plan = PropagationPlan::new(
        spec.lambda_syn_m,
        spec.z_min_m,
        spec.z_max_m,
        spec.z_step_m,
        field.pitch(),
    )?;
    let result = focus_search(&field, &plan)?;

    ensure_dir(&spec.out)?;
    let syn_path = spec.out.join("synthetic.grid");
    grid::write_field(&syn_path, &field)?;
    manifest.record_output(&spec.out, &syn_path)?;

    let mut curve = String::from("z_mm\tscore\n");
    for (z, s) in &result.scores {
        curve.push_str(&format!("{:.6}\t{:.6}\n", z * 1e3, s));
    }
    let curve_path = spec.out.join("focus_curve.tsv");
    grid::write_atomic(&curve_path, curve.as_bytes())?;
    manifest.record_output(&spec.out, &curve_path)?;

    let image_path = spec.out.join("focus.grid");
    grid::write_real_map(
        &image_path,
        result.width,
        result.height,
        field.pitch(),
        &result.image,
        None,
    )?;
    manifest.record_output(&spec.out, &image_path)?;

    if spec.write_png {
        let g = grid::read_grid(&image_path)?;
        let png_path = spec.out.join("focus.png");
        png::export_png(&g, png::MapKind::Value, png::Colormap::Heat, None, &png_path)?;
        manifest.record_output(&spec.out, &png_path)?;
    }

    let (px, py) = peak_position(&result.image, result.width);
    println!(
        "focus: z = {:.3} mm, peak at ({px}, {py}), focused = {}",
        result.z_star * 1e3,
        result.focused
    );
    manifest.params["result"] = json!({
        "z_star_m": result.z_star,
        "peak": [px, py],
        "focused": result.focused,
    });
    manifest.write(&spec.out)
}

// ---------------------------------------------------------------------------
// video
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoSpec {
    pub frames_dir: PathBuf,
    pub lambda1_m: f64,
    pub lambda2_m: Option<f64>,
    pub synthetic_m: Option<f64>,
    pub carrier_h: Option<(f64, f64)>,
    pub carrier_v: Option<(f64, f64)>,
    pub filter_radius: Option<f64>,
    pub smooth_sigma: f64,
    pub out: PathBuf,
    pub write_png: bool,
}

/// Per-frame single-shot reconstruction over a directory of
/// `frame_NNNN.grid` interferograms, emitting a depth-map sequence.
pub fn run_video(spec: &VideoSpec, jobs: Option<usize>) -> Result<PathBuf> {
    let mut frame_paths: Vec<PathBuf> = std::fs::read_dir(&spec.frames_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", spec.frames_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map_or(false, |n| n.starts_with("frame_") && n.ends_with(".grid"))
        })
        .collect();
    frame_paths.sort();
    if frame_paths.is_empty() {
        return Err(CliError::Data(format!(
            "no frame_*.grid files in {}",
            spec.frames_dir.display()
        )));
    }

    let rspec = ReconstructSpec {
        mode: "single-shot".into(),
        input: frame_paths[0].clone(),
        input2: None,
        lambda1_m: spec.lambda1_m,
        lambda2_m: spec.lambda2_m,
        synthetic_m: spec.synthetic_m,
        carrier_h: spec.carrier_h,
        carrier_v: spec.carrier_v,
        filter: "hann".into(),
        filter_radius: spec.filter_radius,
        smooth_sigma: spec.smooth_sigma,
        out: spec.out.clone(),
    };
    let pair = rspec.pair()?;

    ensure_dir(&spec.out)?;
    let reconstruct_one = |(k, path): (usize, &PathBuf)| -> Result<(usize, PathBuf)> {
        let img = grid::read_interferogram(path)?;
        let layout = rspec.layout(img.width, img.height)?;
        let mut syn = single_shot(&img, &layout, &pair)?;
        if spec.smooth_sigma > 0.0 {
            syn = syn.smoothed(spec.smooth_sigma);
        }
        let pm = phase_of(&syn.field);
        let depth = depth_from_phase(&pm, img.pitch, pair.synthetic, OffsetConvention::ZeroMin)?;
        let depth_path = spec.out.join(format!("depth_{k:04}.grid"));
        grid::write_depth_map(&depth_path, &depth)?;
        if spec.write_png {
            let g = grid::read_grid(&depth_path)?;
            let png_path = spec.out.join(format!("depth_{k:04}.png"));
            png::export_png(&g, png::MapKind::Value, png::Colormap::Cyclic, None, &png_path)?;
        }
        Ok((k, depth_path))
    };

    let outputs: Vec<(usize, PathBuf)> = match jobs {
        Some(n) => with_pool(n, || {
            frame_paths
                .par_iter()
                .enumerate()
                .map(reconstruct_one)
                .collect::<Result<Vec<_>>>()
        })?,
        None => frame_paths
            .iter()
            .enumerate()
            .map(reconstruct_one)
            .collect::<Result<Vec<_>>>()?,
    };

    let mut manifest = Manifest::new("video", json!({ "spec": spec }));
    for p in &frame_paths {
        manifest.record_input(p)?;
    }
    for (_, p) in &outputs {
        manifest.record_output(&spec.out, p)?;
    }
    manifest.write(&spec.out)
}

// ---------------------------------------------------------------------------
// rerun
// ---------------------------------------------------------------------------

/// Re-execute a run from its manifest alone. Generative commands carry their
/// full configuration inline; file-driven commands verify their recorded
/// input hashes before running.
pub fn run_rerun(manifest_path: &Path, out: &Path) -> Result<()> {
    let m = Manifest::read(manifest_path)?;
    let verify_inputs = || -> Result<()> {
        for (path, hash) in &m.inputs {
            let p = PathBuf::from(path);
            let actual = crate::manifest::sha256_file(&p)?;
            if actual != *hash {
                return Err(CliError::Data(format!(
                    "input {path} changed since the recorded run (hash mismatch)"
                )));
            }
        }
        Ok(())
    };
    let get = |v: &serde_json::Value, key: &str| -> Result<serde_json::Value> {
        v.get(key)
            .cloned()
            .ok_or_else(|| CliError::Data(format!("manifest params missing \"{key}\"")))
    };
    match m.command.as_str() {
        "simulate" => {
            let cfg: SimConfig = serde_json::from_value(get(&m.params, "config")?)
                .map_err(|e| CliError::Data(format!("manifest config: {e}")))?;
            let config_dir: PathBuf = serde_json::from_value(get(&m.params, "config_dir")?)
                .map_err(|e| CliError::Data(format!("manifest config_dir: {e}")))?;
            let mode: SimMode = serde_json::from_value(get(&m.params, "mode")?)
                .map_err(|e| CliError::Data(format!("manifest mode: {e}")))?;
            run_simulate(&cfg, &config_dir, out, mode, None)?;
        }
        "eval-precision" => {
            let cfg: SimConfig = serde_json::from_value(get(&m.params, "config")?)
                .map_err(|e| CliError::Data(format!("manifest config: {e}")))?;
            let config_dir: PathBuf = serde_json::from_value(get(&m.params, "config_dir")?)
                .map_err(|e| CliError::Data(format!("manifest config_dir: {e}")))?;
            let mut spec: EvalPrecisionSpec = serde_json::from_value(get(&m.params, "spec")?)
                .map_err(|e| CliError::Data(format!("manifest spec: {e}")))?;
            spec.out = out.to_path_buf();
            run_eval_precision(&cfg, &config_dir, &spec, None)?;
        }
        "demod" => {
            verify_inputs()?;
            let mut spec: DemodSpec = serde_json::from_value(get(&m.params, "spec")?)
                .map_err(|e| CliError::Data(format!("manifest spec: {e}")))?;
            spec.out = out.join(
                spec.out.file_name().map(PathBuf::from).unwrap_or_else(|| "field.grid".into()),
            );
            run_demod(&spec)?;
        }
        "reconstruct" => {
            verify_inputs()?;
            let mut spec: ReconstructSpec = serde_json::from_value(get(&m.params, "spec")?)
                .map_err(|e| CliError::Data(format!("manifest spec: {e}")))?;
            spec.out = out.to_path_buf();
            run_reconstruct(&spec)?;
        }
        "unwrap" => {
            verify_inputs()?;
            let mut spec: UnwrapSpec = serde_json::from_value(get(&m.params, "spec")?)
                .map_err(|e| CliError::Data(format!("manifest spec: {e}")))?;
            spec.out = out.to_path_buf();
            run_unwrap(&spec)?;
        }
        "nlos" => {
            verify_inputs()?;
            let mut spec: NlosSpec = serde_json::from_value(get(&m.params, "spec")?)
                .map_err(|e| CliError::Data(format!("manifest spec: {e}")))?;
            spec.out = out.to_path_buf();
            run_nlos(&spec)?;
        }
        "video" => {
            verify_inputs()?;
            let mut spec: VideoSpec = serde_json::from_value(get(&m.params, "spec")?)
                .map_err(|e| CliError::Data(format!("manifest spec: {e}")))?;
            spec.out = out.to_path_buf();
            run_video(&spec, None)?;
        }
        other => {
            return Err(CliError::Data(format!("manifest for unknown command \"{other}\"")))
        }
    }
    Ok(())
}


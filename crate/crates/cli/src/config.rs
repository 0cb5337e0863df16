//! Human-editable run configuration (TOML). Unknown keys are hard errors so
//! a typo in a physics parameter can never pass silently.

use crate::error::{CliError, Result};
use crate::grid;
use serde::{Deserialize, Serialize};
use std::path::Path;
use switof_core::demod::{CarrierLayout, CarrierSpec, FilterShape};
use switof_core::field::{ComplexField, WavelengthPair};
use switof_core::sim::{
    auto_full_well, ApertureSpec, CameraSpec, MotionScript, MotionTransform, ReferenceBeam,
    SceneSpec,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scene: SceneConfig,
    pub optics: OpticsConfig,
    #[serde(default)]
    pub references: ReferencesConfig,
    pub camera: CameraConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    /// Physical width of the field of view, meters.
    pub fov_m: f64,
    pub seed: u64,
    /// Microscopic roughness standard deviation, meters.
    pub roughness_std_m: f64,
    #[serde(default = "default_corr_len")]
    pub roughness_corr_len_px: f64,
    pub height_map: HeightConfig,
    #[serde(default)]
    pub reflectivity: ReflectivityConfig,
}

fn default_corr_len() -> f64 {
    1.2
}

/// Built-in ground-truth height profiles, plus import from a grid file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HeightConfig {
    Flat {
        #[serde(default)]
        offset_m: f64,
    },
    /// Linear ramp along x from `offset_m` to `offset_m + span_m`.
    Ramp {
        span_m: f64,
        #[serde(default)]
        offset_m: f64,
    },
    /// Centered raised-cosine dome of height `span_m`.
    Dome {
        span_m: f64,
        #[serde(default)]
        offset_m: f64,
    },
    /// `steps` flat treads along x covering `span_m` total.
    Staircase {
        span_m: f64,
        steps: usize,
        #[serde(default)]
        offset_m: f64,
    },
    /// Flat background with one raised rectangle `[x0, y0, width, height]`.
    Block {
        region: [usize; 4],
        height_m: f64,
        #[serde(default)]
        offset_m: f64,
    },
    /// Per-pixel heights from an f32 grid file (path relative to the config).
    File { file: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReflectivityConfig {
    Uniform {
        #[serde(default = "default_one")]
        value: f64,
    },
    /// Cosine taper from `border_value` at the image edge to `value` at
    /// `border_px` inward, on all four sides.
    Border {
        #[serde(default = "default_one")]
        value: f64,
        border_px: usize,
        border_value: f64,
    },
}

fn default_one() -> f64 {
    1.0
}

impl Default for ReflectivityConfig {
    fn default() -> Self {
        ReflectivityConfig::Uniform { value: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    pub lambda1_m: f64,
    /// Either the second wavelength or the target synthetic wavelength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_m: Option<f64>,
    /// Pupil radius in cycles/pixel.
    pub aperture_cutoff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferencesConfig {
    /// Carrier of the horizontal-axis reference (cycles/pixel); defaults to
    /// a bin-aligned frequency near 1/3.
    pub carrier_h: Option<[f64; 2]>,
    pub carrier_v: Option<[f64; 2]>,
    pub amplitude: AmplitudeSpec,
    pub filter: FilterKind,
    /// Sideband filter radius in cycles/pixel; default 0.8x the free room
    /// around the carrier.
    pub filter_radius: Option<f64>,
}

impl Default for ReferencesConfig {
    fn default() -> Self {
        Self {
            carrier_h: None,
            carrier_v: None,
            amplitude: AmplitudeSpec::Named("matched".into()),
            filter: FilterKind::Hann,
            filter_radius: None,
        }
    }
}

/// `"matched"` (reference amplitude = object RMS) or an explicit value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AmplitudeSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Hann,
    Gaussian,
}

impl From<FilterKind> for FilterShape {
    fn from(k: FilterKind) -> Self {
        match k {
            FilterKind::Hann => FilterShape::Hann,
            FilterKind::Gaussian => FilterShape::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub bit_depth: u32,
    #[serde(default)]
    pub noise_std: f64,
    pub seed: u64,
    /// `"auto"` (5% headroom over the brightest pixel) or a fixed intensity.
    #[serde(default = "default_full_well")]
    pub full_well: FullWellSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FullWellSpec {
    Fixed(f64),
    Named(String),
}

fn default_full_well() -> FullWellSpec {
    FullWellSpec::Named("auto".into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub frames: usize,
    #[serde(default)]
    pub decorrelate: bool,
    /// `static`, `pendulum` (a region sliding left-right), or `approach`
    /// (whole scene moving in depth).
    pub script: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_frames: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz_total_m: Option<f64>,
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::io_at(path, std::fs::read_to_string(path))?;
        let cfg: SimConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.optics.lambda2_m, self.optics.synthetic_m) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "optics: give either lambda2_m or synthetic_m, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "optics: one of lambda2_m or synthetic_m is required".into(),
                ))
            }
            _ => {}
        }
        if let AmplitudeSpec::Named(name) = &self.references.amplitude {
            if name != "matched" {
                return Err(CliError::Config(format!(
                    "references.amplitude: expected a number or \"matched\", got \"{name}\""
                )));
            }
        }
        if let FullWellSpec::Named(name) = &self.camera.full_well {
            if name != "auto" {
                return Err(CliError::Config(format!(
                    "camera.full_well: expected a number or \"auto\", got \"{name}\""
                )));
            }
        }
        if let Some(m) = &self.motion {
            match m.script.as_str() {
                "static" => {}
                "pendulum" => {
                    if m.region.is_none() || m.amplitude_px.is_none() || m.period_frames.is_none()
                    {
                        return Err(CliError::Config(
                            "motion: pendulum needs region, amplitude_px, period_frames".into(),
                        ));
                    }
                }
                "approach" => {
                    if m.dz_total_m.is_none() {
                        return Err(CliError::Config("motion: approach needs dz_total_m".into()));
                    }
                }
                other => {
                    return Err(CliError::Config(format!(
                        "motion.script: unknown script \"{other}\""
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn wavelength_pair(&self) -> Result<WavelengthPair> {
        let pair = match (self.optics.lambda2_m, self.optics.synthetic_m) {
            (Some(l2), None) => WavelengthPair::new(self.optics.lambda1_m, l2)?,
            (None, Some(s)) => WavelengthPair::from_synthetic(self.optics.lambda1_m, s)?,
            _ => unreachable!("validated"),
        };
        Ok(pair)
    }

    pub fn aperture(&self) -> Result<ApertureSpec> {
        Ok(ApertureSpec::new(self.optics.aperture_cutoff)?)
    }

    /// Ground-truth scene; grid-file height maps resolve relative to the
    /// config file's directory.
    pub fn build_scene(&self, config_dir: &Path) -> Result<SceneSpec> {
        let sc = &self.scene;
        let (w, h) = (sc.width, sc.height);
        let n = w * h;
        let macro_height = match &sc.height_map {
            HeightConfig::Flat { offset_m } => vec![*offset_m; n],
            HeightConfig::Ramp { span_m, offset_m } => {
                let mut z = Vec::with_capacity(n);
                for _y in 0..h {
                    for x in 0..w {
                        z.push(offset_m + span_m * x as f64 / w as f64);
                    }
                }
                z
            }
            HeightConfig::Dome { span_m, offset_m } => {
                let (cx, cy) = ((w / 2) as f64, (h / 2) as f64);
                let rmax = cx.min(cy);
                let mut z = Vec::with_capacity(n);
                for y in 0..h {
                    for x in 0..w {
                        let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt() / rmax;
                        z.push(
                            offset_m
                                + span_m * 0.5 * (1.0 + (std::f64::consts::PI * r.min(1.0)).cos()),
                        );
                    }
                }
                z
            }
            HeightConfig::Staircase { span_m, steps, offset_m } => {
                if *steps < 2 {
                    return Err(CliError::Config("staircase needs at least 2 steps".into()));
                }
                let mut z = Vec::with_capacity(n);
                for _y in 0..h {
                    for x in 0..w {
                        let s = (x * steps / w).min(steps - 1);
                        z.push(offset_m + span_m * s as f64 / (steps - 1) as f64);
                    }
                }
                z
            }
            HeightConfig::Block { region, height_m, offset_m } => {
                let [x0, y0, bw, bh] = *region;
                let mut z = vec![*offset_m; n];
                for y in y0..(y0 + bh).min(h) {
                    for x in x0..(x0 + bw).min(w) {
                        z[y * w + x] = offset_m + height_m;
                    }
                }
                z
            }
            HeightConfig::File { file } => {
                let path = config_dir.join(file);
                let d = grid::read_depth_map(&path)?;
                if d.width != w || d.height != h {
                    return Err(CliError::Config(format!(
                        "height map {} is {}x{}, scene is {w}x{h}",
                        path.display(),
                        d.width,
                        d.height
                    )));
                }
                d.z
            }
        };
        let mut scene = SceneSpec::with_height_map(
            w,
            h,
            sc.fov_m,
            macro_height,
            sc.roughness_std_m,
            sc.roughness_corr_len_px,
            sc.seed,
        )?;
        match &sc.reflectivity {
            ReflectivityConfig::Uniform { value } => {
                scene.reflectivity = vec![*value; n];
            }
            ReflectivityConfig::Border { value, border_px, border_value } => {
                for y in 0..h {
                    for x in 0..w {
                        let d = x.min(w - 1 - x).min(y).min(h - 1 - y);
                        scene.reflectivity[y * w + x] = if d < *border_px {
                            let t = d as f64 / *border_px as f64;
                            border_value
                                + (value - border_value)
                                    * 0.5
                                    * (1.0 - (std::f64::consts::PI * t).cos())
                        } else {
                            *value
                        };
                    }
                }
            }
        }
        scene.validate()?;
        Ok(scene)
    }

    /// Carrier layout for the configured or default (bin-aligned near 1/3)
    /// reference tilts. The sideband filter radius defaults to 0.8x the free
    /// room around each carrier, which passes the whole speckle band through
    /// the tapered window.
    pub fn carrier_layout(&self, width: usize, height: usize) -> Result<CarrierLayout> {
        let shape: FilterShape = self.references.filter.into();
        let defaults = CarrierLayout::default_for(width, height, None)?;
        let fh = self
            .references
            .carrier_h
            .map(|[u, v]| (u, v))
            .unwrap_or(defaults.horizontal.frequency);
        let fv = self
            .references
            .carrier_v
            .map(|[u, v]| (u, v))
            .unwrap_or(defaults.vertical.frequency);
        let rh = self
            .references
            .filter_radius
            .unwrap_or_else(|| switof_core::demod::default_filter_radius(fh, None));
        let rv = self
            .references
            .filter_radius
            .unwrap_or_else(|| switof_core::demod::default_filter_radius(fv, None));
        Ok(CarrierLayout {
            horizontal: CarrierSpec::new(fh, shape, rh)?,
            vertical: CarrierSpec::new(fv, shape, rv)?,
        })
    }

    /// Reference beam for a carrier, resolving `"matched"` amplitudes
    /// against the object field.
    pub fn reference_for(&self, carrier: (f64, f64), object: &ComplexField) -> Result<ReferenceBeam> {
        match &self.references.amplitude {
            AmplitudeSpec::Fixed(a) => Ok(ReferenceBeam::new(carrier, *a)?),
            AmplitudeSpec::Named(_) => Ok(ReferenceBeam::matched(carrier, object)?),
        }
    }

    /// Camera with the full well resolved against the actual beam channels.
    pub fn camera_for(&self, channels: &[(&ComplexField, &ReferenceBeam)]) -> Result<CameraSpec> {
        let full_well = match &self.camera.full_well {
            FullWellSpec::Fixed(v) => *v,
            FullWellSpec::Named(_) => auto_full_well(channels)?,
        };
        Ok(CameraSpec::new(
            self.camera.bit_depth,
            full_well,
            self.camera.noise_std,
            self.camera.seed,
        )?)
    }

    /// Per-frame motion transforms from the script description.
    pub fn build_motion_script(&self) -> Result<MotionScript> {
        let m = self
            .motion
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no [motion] section".into()))?;
        if m.frames == 0 {
            return Err(CliError::Config("motion: frames must be positive".into()));
        }
        let frames = (0..m.frames)
            .map(|k| match m.script.as_str() {
                "static" => MotionTransform::Identity,
                "pendulum" => {
                    let [x0, y0, w, h] = m.region.unwrap();
                    let amp = m.amplitude_px.unwrap();
                    let period = m.period_frames.unwrap() as f64;
                    let dx = (amp
                        * (std::f64::consts::TAU * k as f64 / period).sin())
                    .round() as isize;
                    MotionTransform::TranslateRegion {
                        x0,
                        y0,
                        width: w,
                        height: h,
                        dx,
                        dy: 0,
                        fill: m.fill_m.unwrap_or(0.0),
                    }
                }
                "approach" => {
                    let total = m.dz_total_m.unwrap();
                    let steps = (m.frames - 1).max(1) as f64;
                    MotionTransform::DepthOffset { dz: total * k as f64 / steps }
                }
                _ => unreachable!("validated"),
            })
            .collect();
        Ok(MotionScript { frames, decorrelate: m.decorrelate })
    }
}

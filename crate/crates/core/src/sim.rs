//! Forward physics simulator: ground-truth scenes, speckled object fields,
//! and crossed-fringe camera images.
//!
//! The imaging model is deliberately minimal: a rough surface imprints the
//! round-trip pathlength `2*(z + h)` onto the illumination phase at each
//! wavelength, and the imaging system low-passes the result with a circular
//! pupil in the image-plane spectrum. That is the smallest model that
//! reproduces subjective speckle whose grain size is controlled by the
//! aperture. Free-space propagation between object and lens is not simulated.
//!
//! Cross-wavelength interference terms are dropped analytically: they beat at
//! hundreds of GHz and average to zero over any realistic exposure, so the
//! rendered image is the sum of the two single-wavelength interference
//! patterns.
//!
//! Every random draw (micro-roughness, sensor noise, diffuser screen) comes
//! from a ChaCha stream seeded explicitly, so identical specs give
//! bit-identical images.

use crate::error::{Error, Result};
use crate::field::{fft2, gaussian_blur_complex, ifft2, ComplexField, WavelengthPair};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Ground-truth description of a scene: macroscopic shape, microscopic
/// roughness statistics, reflectivity, geometry, and the seed that fixes the
/// roughness realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Physical width of the field of view in meters; sets the pixel pitch
    /// as `fov / width`.
    pub fov: f64,
    /// Per-pixel macroscopic height z in meters (row-major).
    pub macro_height: Vec<f64>,
    /// Standard deviation of the microscopic surface height in meters.
    /// Values well above the optical wavelength produce fully developed
    /// speckle.
    pub roughness_std: f64,
    /// Correlation length of the micro-roughness in pixels (0 = white).
    pub roughness_corr_len: f64,
    /// Per-pixel amplitude reflectivity in [0, 1].
    pub reflectivity: Vec<f64>,
    pub seed: u64,
}

impl SceneSpec {
    /// Uniform-reflectivity scene over a given height map.
    pub fn with_height_map(
        width: usize,
        height: usize,
        fov: f64,
        macro_height: Vec<f64>,
        roughness_std: f64,
        roughness_corr_len: f64,
        seed: u64,
    ) -> Result<Self> {
        let scene = Self {
            width,
            height,
            fov,
            macro_height,
            roughness_std,
            roughness_corr_len,
            reflectivity: vec![1.0; width * height],
            seed,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Flat scene at z = 0.
    pub fn flat(
        width: usize,
        height: usize,
        fov: f64,
        roughness_std: f64,
        roughness_corr_len: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::with_height_map(
            width,
            height,
            fov,
            vec![0.0; width * height],
            roughness_std,
            roughness_corr_len,
            seed,
        )
    }

    pub fn pitch(&self) -> f64 {
        self.fov / self.width as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < crate::field::MIN_DIM || self.height < crate::field::MIN_DIM {
            return Err(Error::Config("scene grid too small".into()));
        }
        if !(self.fov > 0.0 && self.fov.is_finite()) {
            return Err(Error::Config(format!("fov must be positive, got {}", self.fov)));
        }
        if self.macro_height.len() != self.width * self.height
            || self.reflectivity.len() != self.width * self.height
        {
            return Err(Error::DataValidity("scene map length mismatch".into()));
        }
        if !self.macro_height.iter().all(|z| z.is_finite()) {
            return Err(Error::DataValidity("macro height contains non-finite values".into()));
        }
        if !(self.roughness_std >= 0.0 && self.roughness_std.is_finite()) {
            return Err(Error::Config("roughness_std must be non-negative".into()));
        }
        if !(self.roughness_corr_len >= 0.0 && self.roughness_corr_len.is_finite()) {
            return Err(Error::Config("roughness_corr_len must be non-negative".into()));
        }
        if !self.reflectivity.iter().all(|r| (0.0..=1.0).contains(r)) {
            return Err(Error::DataValidity("reflectivity outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Circular pupil in the image-plane spectrum; controls subjective speckle
/// size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureSpec {
    /// Pupil radius in cycles/pixel, in (0, 0.5].
    pub cutoff: f64,
}

impl ApertureSpec {
    pub fn new(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff <= 0.5) {
            return Err(Error::Config(format!(
                "aperture cutoff must be in (0, 0.5] cycles/pixel, got {cutoff}"
            )));
        }
        Ok(Self { cutoff })
    }
}

/// A tilted reference beam illuminating the sensor directly: a plane wave
/// `a * exp(i*2*pi*(u*x + v*y))` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceBeam {
    /// Spatial carrier in cycles/pixel.
    pub carrier: (f64, f64),
    /// Field amplitude.
    pub amplitude: f64,
}

impl ReferenceBeam {
    pub fn new(carrier: (f64, f64), amplitude: f64) -> Result<Self> {
        if carrier.0.abs() > 0.5 || carrier.1.abs() > 0.5 {
            return Err(Error::Config(format!(
                "carrier ({}, {}) exceeds Nyquist (0.5 cycles/pixel per axis)",
                carrier.0, carrier.1
            )));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Config("reference amplitude must be positive".into()));
        }
        Ok(Self { carrier, amplitude })
    }

    /// Reference matched to an object field for maximum fringe contrast:
    /// amplitude equal to the spatial RMS of the object amplitude (the
    /// simulated analog of ND-filter intensity matching).
    pub fn matched(carrier: (f64, f64), object: &ComplexField) -> Result<Self> {
        Self::new(carrier, object.rms_amplitude())
    }
}

/// Sensor model: quantization depth, full-scale mapping, and additive read
/// noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    /// Bits per pixel; one of 8, 10, 12, 16.
    pub bit_depth: u32,
    /// Field-intensity value that maps to the maximum code.
    pub full_well_scale: f64,
    /// Additive Gaussian noise, as a fraction of full scale.
    pub noise_std: f64,
    pub seed: u64,
}

impl CameraSpec {
    pub fn new(bit_depth: u32, full_well_scale: f64, noise_std: f64, seed: u64) -> Result<Self> {
        let cam = Self { bit_depth, full_well_scale, noise_std, seed };
        cam.validate()?;
        Ok(cam)
    }

    /// Noiseless 16-bit sensor with the given full scale.
    pub fn noiseless(full_well_scale: f64) -> Result<Self> {
        Self::new(16, full_well_scale, 0.0, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if ![8, 10, 12, 16].contains(&self.bit_depth) {
            return Err(Error::Config(format!(
                "bit depth must be one of 8/10/12/16, got {}",
                self.bit_depth
            )));
        }
        if !(self.full_well_scale > 0.0 && self.full_well_scale.is_finite()) {
            return Err(Error::Config("full_well_scale must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be non-negative".into()));
        }
        Ok(())
    }

    pub fn max_code(&self) -> f64 {
        ((1u32 << self.bit_depth) - 1) as f64
    }
}

/// A captured camera image: non-negative, integer-valued intensity codes.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch in meters/pixel, inherited from the scene.
    pub pitch: f64,
    /// Quantized intensity codes in [0, 2^bit_depth - 1], stored as f64.
    pub data: Vec<f64>,
    pub camera: CameraSpec,
}

impl Interferogram {
    /// View the image as a real-valued complex field for Fourier processing.
    pub fn to_field(&self) -> Result<ComplexField> {
        ComplexField::from_real(self.width, self.height, self.pitch, &self.data)
    }
}

/// Seeded micro-roughness realization: white Gaussian heights filtered to the
/// scene's correlation length and rescaled to exactly `roughness_std`.
///
/// Depends only on the scene seed and geometry, so the two wavelengths of one
/// frame see the same surface.
pub fn micro_roughness(scene: &SceneSpec) -> Vec<f64> {
    let n = scene.width * scene.height;
    if scene.roughness_std == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let filtered: Vec<f64> = if scene.roughness_corr_len > 0.0 {
        let complex: Vec<Complex64> = white.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        gaussian_blur_complex(scene.width, scene.height, &complex, None, scene.roughness_corr_len)
            .into_iter()
            .map(|c| c.re)
            .collect()
    } else {
        white
    };
    let mean = filtered.iter().sum::<f64>() / n as f64;
    let var = filtered.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { scene.roughness_std / var.sqrt() } else { 0.0 };
    filtered.iter().map(|v| (v - mean) * scale).collect()
}

/// Backscattered object field at one wavelength.
///
/// `E = ifft2( fft2( reflectivity * exp(i*4*pi*(z + h)/lambda) ) * pupil )`
/// where `h` is the seeded micro-roughness. The factor `4*pi/lambda` is the
/// round-trip phase, matching the depth conversion `z = phi*Lambda/(4*pi)`
/// downstream.
pub fn object_field(
    scene: &SceneSpec,
    lambda: f64,
    aperture: &ApertureSpec,
) -> Result<ComplexField> {
    scene.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("wavelength must be positive, got {lambda}")));
    }
    let h = micro_roughness(scene);
    let pathlength: Vec<f64> = scene
        .macro_height
        .iter()
        .zip(&h)
        .map(|(&z, &hh)| 2.0 * (z + hh))
        .collect();
    field_from_pathlength(
        scene.width,
        scene.height,
        scene.pitch(),
        &pathlength,
        Some(&scene.reflectivity),
        None,
        lambda,
        Some(aperture),
    )
}

/// Shared surface-to-field kernel: imprint `exp(i*2*pi*pathlength/lambda)`
/// (plus an optional extra phase screen) on the reflectivity map and low-pass
/// with the pupil.
#[allow(clippy::too_many_arguments)]
pub fn field_from_pathlength(
    width: usize,
    height: usize,
    pitch: f64,
    pathlength: &[f64],
    reflectivity: Option<&[f64]>,
    extra_phase: Option<&[f64]>,
    lambda: f64,
    aperture: Option<&ApertureSpec>,
) -> Result<ComplexField> {
    let n = width * height;
    if pathlength.len() != n {
        return Err(Error::DataValidity("pathlength map length mismatch".into()));
    }
    let mut data = Vec::with_capacity(n);
    for k in 0..n {
        let amp = reflectivity.map_or(1.0, |r| r[k]);
        let mut phi = TAU * pathlength[k] / lambda;
        if let Some(extra) = extra_phase {
            phi += extra[k];
        }
        data.push(Complex64::from_polar(amp, phi));
    }
    let surface = ComplexField::new(width, height, pitch, data)?;
    match aperture {
        Some(ap) => {
            let cutoff = ap.cutoff;
            let spec = fft2(&surface)?
                .filtered(|fu, fv| if fu.hypot(fv) <= cutoff { 1.0 } else { 0.0 });
            ifft2(&spec)
        }
        None => Ok(surface),
    }
}

/// Pre-noise intensity of a set of (object field, reference) channels:
/// `sum_k |E_k + R_k|^2` per pixel.
pub fn pre_noise_intensity(channels: &[(&ComplexField, &ReferenceBeam)]) -> Result<Vec<f64>> {
    if channels.is_empty() {
        return Err(Error::Config("at least one beam channel required".into()));
    }
    let (first, _) = channels[0];
    let (w, h) = (first.width(), first.height());
    for (f, _) in channels {
        if f.width() != w || f.height() != h {
            return Err(Error::DimensionMismatch("channel fields differ in geometry".into()));
        }
    }
    let mut intensity = vec![0.0; w * h];
    for (field, beam) in channels {
        let (u, v) = beam.carrier;
        for y in 0..h {
            for x in 0..w {
                let r = Complex64::from_polar(
                    beam.amplitude,
                    TAU * (u * x as f64 + v * y as f64),
                );
                let s = field.get(x, y) + r;
                intensity[y * w + x] += s.norm_sqr();
            }
        }
    }
    Ok(intensity)
}

/// Full-well scale with 5% headroom over the brightest pre-noise pixel.
pub fn auto_full_well(channels: &[(&ComplexField, &ReferenceBeam)]) -> Result<f64> {
    let intensity = pre_noise_intensity(channels)?;
    let peak = intensity.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::DataValidity("all-dark image; cannot derive full well".into()));
    }
    Ok(1.05 * peak)
}

/// Render one camera image from any number of (object field, reference)
/// channels. Channels add incoherently; carriers must be pairwise distinct or
/// their spectral sidebands would coincide.
pub fn render_channels(
    channels: &[(&ComplexField, &ReferenceBeam)],
    cam: &CameraSpec,
) -> Result<Interferogram> {
    cam.validate()?;
    for (i, (_, a)) in channels.iter().enumerate() {
        for (_, b) in channels.iter().skip(i + 1) {
            if a.carrier == b.carrier {
                return Err(Error::SpectralOverlap(format!(
                    "two reference beams share carrier ({}, {}); their sidebands would alias",
                    a.carrier.0, a.carrier.1
                )));
            }
        }
    }
    let mut intensity = pre_noise_intensity(channels)?;
    let (first, _) = channels[0];
    let (w, h) = (first.width(), first.height());

    if cam.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cam.seed);
        let sigma = cam.noise_std * cam.full_well_scale;
        for v in intensity.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v += sigma * n;
        }
    }

    let max_code = cam.max_code();
    let data = intensity
        .into_iter()
        .map(|v| {
            let clipped = v.clamp(0.0, cam.full_well_scale);
            (clipped / cam.full_well_scale * max_code).round()
        })
        .collect();
    Ok(Interferogram { width: w, height: h, pitch: first.pitch(), data, camera: *cam })
}

/// Render the standard two-wavelength crossed-fringe image:
/// `I = |E1 + R1|^2 + |E2 + R2|^2` plus sensor noise and quantization.
pub fn render_interferogram(
    e1: &ComplexField,
    e2: &ComplexField,
    ref1: &ReferenceBeam,
    ref2: &ReferenceBeam,
    cam: &CameraSpec,
) -> Result<Interferogram> {
    render_channels(&[(e1, ref1), (e2, ref2)], cam)
}

/// Deterministic per-stream seed derivation (SplitMix64 finalizer). Stable
/// across platforms; used to give each frame of a sequence its own roughness
/// and noise streams.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-frame change applied to the ground-truth height map.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionTransform {
    Identity,
    /// Add a constant to the whole height map (object moving in depth).
    DepthOffset { dz: f64 },
    /// Move the height content of a rectangle by whole pixels; vacated pixels
    /// take the fill height. Models an articulated part sliding in front of a
    /// background.
    TranslateRegion {
        x0: usize,
        y0: usize,
        width: usize,
        height: usize,
        dx: isize,
        dy: isize,
        fill: f64,
    },
}

/// A frame-by-frame motion script. With `decorrelate` set, every frame after
/// the first re-randomizes the micro-roughness, modeling the speckle
/// decorrelation a moving rough surface produces between exposures.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub frames: Vec<MotionTransform>,
    pub decorrelate: bool,
}

/// Everything besides the scene needed to render one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSetup {
    pub pair: WavelengthPair,
    pub aperture: ApertureSpec,
    pub reference_h: ReferenceBeam,
    pub reference_v: ReferenceBeam,
    pub camera: CameraSpec,
}

/// Apply a motion transform to the scene's height map, leaving everything
/// else (including the seed) untouched.
pub fn apply_motion(scene: &SceneSpec, motion: &MotionTransform) -> SceneSpec {
    let mut out = scene.clone();
    match motion {
        MotionTransform::Identity => {}
        MotionTransform::DepthOffset { dz } => {
            for z in out.macro_height.iter_mut() {
                *z += dz;
            }
        }
        MotionTransform::TranslateRegion { x0, y0, width, height, dx, dy, fill } => {
            let (w, h) = (scene.width as isize, scene.height as isize);
            // lift the region, fill the source area, paste at the offset
            let mut patch = Vec::with_capacity(width * height);
            for yy in *y0..(y0 + height).min(scene.height) {
                for xx in *x0..(x0 + width).min(scene.width) {
                    patch.push((xx, yy, scene.macro_height[yy * scene.width + xx]));
                }
            }
            for &(xx, yy, _) in &patch {
                out.macro_height[yy * scene.width + xx] = *fill;
            }
            for &(xx, yy, z) in &patch {
                let tx = xx as isize + dx;
                let ty = yy as isize + dy;
                if tx >= 0 && tx < w && ty >= 0 && ty < h {
                    out.macro_height[ty as usize * scene.width + tx as usize] = z;
                }
            }
        }
    }
    out
}

/// Both object fields of one frame.
pub fn simulate_fields(
    scene: &SceneSpec,
    pair: &WavelengthPair,
    aperture: &ApertureSpec,
) -> Result<(ComplexField, ComplexField)> {
    let e1 = object_field(scene, pair.lambda1, aperture)?;
    let e2 = object_field(scene, pair.lambda2, aperture)?;
    Ok((e1, e2))
}

/// Render a motion sequence, one crossed-fringe image per frame.
///
/// Frame 0 uses the base seeds (so a one-frame identity script reproduces a
/// direct [`render_interferogram`] call exactly); later frames derive their
/// noise seed, and with `decorrelate` also their roughness seed, via
/// [`mix_seed`].
pub fn render_frame_sequence(
    scene: &SceneSpec,
    script: &MotionScript,
    setup: &FrameSetup,
) -> Result<Vec<Interferogram>> {
    if script.frames.is_empty() {
        return Err(Error::Config("motion script has no frames".into()));
    }
    script
        .frames
        .iter()
        .enumerate()
        .map(|(k, motion)| render_sequence_frame(scene, script, setup, k, motion))
        .collect()
}

/// Render one frame of a motion sequence; exposed so callers can produce
/// frames in parallel or on demand.
pub fn render_sequence_frame(
    scene: &SceneSpec,
    script: &MotionScript,
    setup: &FrameSetup,
    frame_index: usize,
    motion: &MotionTransform,
) -> Result<Interferogram> {
    let mut frame_scene = apply_motion(scene, motion);
    if script.decorrelate && frame_index > 0 {
        frame_scene.seed = mix_seed(scene.seed, frame_index as u64);
    }
    let mut cam = setup.camera;
    if frame_index > 0 {
        cam.seed = mix_seed(setup.camera.seed, frame_index as u64);
    }
    let (e1, e2) = simulate_fields(&frame_scene, &setup.pair, &setup.aperture)?;
    render_channels(&[(&e1, &setup.reference_h), (&e2, &setup.reference_v)], &cam)
}

/// Mean speckle area in pixels^2, measured as the area of the intensity
/// autocovariance above half its zero-lag value. Scales as 1/cutoff^2 for a
/// circular pupil.
pub fn mean_speckle_area(field: &ComplexField) -> Result<f64> {
    let n = (field.width() * field.height()) as f64;
    let intensity: Vec<f64> = field.data().iter().map(|c| c.norm_sqr()).collect();
    let mean = intensity.iter().sum::<f64>() / n;
    let centered: Vec<f64> = intensity.iter().map(|v| v - mean).collect();
    let f = ComplexField::from_real(field.width(), field.height(), field.pitch(), &centered)?;
    let spec = fft2(&f)?;
    let power = spec.mapped(|c| Complex64::new(c.norm_sqr(), 0.0));
    let acv = ifft2(&power)?;
    let zero_lag = acv.data()[0].re;
    if zero_lag <= 0.0 {
        return Err(Error::DataValidity("zero intensity variance; no speckle to measure".into()));
    }
    let count = acv.data().iter().filter(|c| c.re >= 0.5 * zero_lag).count();
    Ok(count as f64)
}

/// A point source hidden behind a thin random-phase screen at the capture
/// plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSourceScene {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch of the capture plane in meters.
    pub pitch: f64,
    /// Source position: lateral offsets from the grid center (meters) and
    /// distance behind the capture plane (meters).
    pub source: (f64, f64, f64),
    /// Seed of the diffuser phase screen; the same screen is applied at both
    /// optical wavelengths, so it cancels in the synthetic field.
    pub screen_seed: u64,
    /// Optional pupil modeling the relay imaging of the diffuser surface.
    pub aperture: Option<ApertureSpec>,
}

/// One-way pathlength from the hidden source to each pixel of the capture
/// plane. Grid center is pixel `(width/2, height/2)`.
pub fn point_source_pathlength(ps: &PointSourceScene) -> Vec<f64> {
    let (sx, sy, d) = ps.source;
    let cx = (ps.width / 2) as f64;
    let cy = (ps.height / 2) as f64;
    let mut out = Vec::with_capacity(ps.width * ps.height);
    for j in 0..ps.height {
        for i in 0..ps.width {
            let x = (i as f64 - cx) * ps.pitch;
            let y = (j as f64 - cy) * ps.pitch;
            out.push(((x - sx).powi(2) + (y - sy).powi(2) + d * d).sqrt());
        }
    }
    out
}

/// Field captured at the diffuser plane for one wavelength: the spherical
/// wave from the hidden source, multiplied by the diffuser's random phase
/// screen, optionally relayed through a pupil. Amplitude variation over the
/// plane (1/R) is negligible at the simulated geometries and is omitted.
pub fn diffuser_capture_field(ps: &PointSourceScene, lambda: f64) -> Result<ComplexField> {
    if ps.source.2 <= 0.0 {
        return Err(Error::Config("source must lie behind the capture plane".into()));
    }
    let pathlength = point_source_pathlength(ps);
    let mut rng = ChaCha8Rng::seed_from_u64(ps.screen_seed);
    let screen: Vec<f64> = (0..ps.width * ps.height).map(|_| rng.gen::<f64>() * TAU).collect();
    field_from_pathlength(
        ps.width,
        ps.height,
        ps.pitch,
        &pathlength,
        None,
        Some(&screen),
        lambda,
        ps.aperture.as_ref(),
    )
}

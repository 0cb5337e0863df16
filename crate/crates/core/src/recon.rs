//! Synthetic-field formation, depth conversion, and multi-frequency phase
//! unwrapping.
//!
//! Depth follows `z = phi * Lambda / (4*pi)`: half the pathlength difference
//! the wrapped synthetic phase encodes. A wrapped map therefore covers one
//! ambiguity interval of `Lambda / 2`.
//!
//! Unwrapped maps keep their wrapped fractional phase and the integer fringe
//! order separately, so re-wrapping an unwrapped map returns the input
//! bit-exactly: unwrapping can never alter the fractional phase, only the
//! 2-pi count on top of it.

use crate::demod::{extract_field, CarrierLayout, CarrierSpec};
use crate::error::{Error, Result};
use crate::field::{
    gaussian_blur_complex, mix_conjugate, phase_of, phase_of_with_floor, synthetic_wavelength,
    ComplexField, PhaseMap, WavelengthPair,
};
use crate::sim::Interferogram;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// How a synthetic field was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    SingleShot,
    DoubleShot,
    /// Mixed from two parent synthetic fields; records their wavelengths.
    BeatNote { parents: (f64, f64) },
}

/// A complex field carrying phase at a synthetic wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticField {
    pub field: ComplexField,
    pub synthetic_wavelength: f64,
    pub provenance: Provenance,
}

impl SyntheticField {
    pub fn new(field: ComplexField, synthetic_wavelength: f64, provenance: Provenance) -> Result<Self> {
        if !(synthetic_wavelength > 0.0 && synthetic_wavelength.is_finite()) {
            return Err(Error::Config("synthetic wavelength must be positive".into()));
        }
        Ok(Self { field, synthetic_wavelength, provenance })
    }

    /// Wrapped phase map of the field.
    pub fn phase(&self) -> PhaseMap {
        phase_of(&self.field)
    }

    /// Complex-domain Gaussian smoothing of the field; amplitude acts as the
    /// weight, so speckle nulls do not drag their neighbors.
    pub fn smoothed(&self, sigma: f64) -> Self {
        let f = &self.field;
        let data = gaussian_blur_complex(f.width(), f.height(), f.data(), None, sigma);
        Self {
            field: ComplexField::new(f.width(), f.height(), f.pitch(), data)
                .expect("blur preserves validity"),
            synthetic_wavelength: self.synthetic_wavelength,
            provenance: self.provenance,
        }
    }
}

/// Global depth datum convention. Interferometric phase has no absolute
/// zero, so depth maps are reported relative to a chosen datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetConvention {
    /// Smallest valid depth maps to zero (default).
    ZeroMin,
    /// Mean valid depth maps to zero.
    ZeroMean,
    /// No offset applied.
    Raw,
}

/// Per-pixel depth in meters with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch in meters/pixel.
    pub pitch: f64,
    pub z: Vec<f64>,
    pub mask: Vec<bool>,
    pub convention: OffsetConvention,
}

impl DepthMap {
    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Convert a phase map (wrapped or unwrapped) at a synthetic wavelength to
/// depth: `z = phi * Lambda / (4*pi)`, then apply the offset convention over
/// valid pixels.
pub fn depth_from_phase(
    phi: &PhaseMap,
    pitch: f64,
    lambda_syn: f64,
    convention: OffsetConvention,
) -> Result<DepthMap> {
    if !(lambda_syn > 0.0 && lambda_syn.is_finite()) {
        return Err(Error::Config("synthetic wavelength must be positive".into()));
    }
    let mut z: Vec<f64> = phi.phase.iter().map(|&p| p * lambda_syn / (2.0 * TAU)).collect();
    let offset = match convention {
        OffsetConvention::Raw => 0.0,
        OffsetConvention::ZeroMin => z
            .iter()
            .zip(&phi.valid)
            .filter(|(_, &v)| v)
            .map(|(&zz, _)| zz)
            .fold(f64::INFINITY, f64::min),
        OffsetConvention::ZeroMean => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (&zz, &v) in z.iter().zip(&phi.valid) {
                if v {
                    sum += zz;
                    n += 1;
                }
            }
            if n > 0 {
                sum / n as f64
            } else {
                0.0
            }
        }
    };
    if offset.is_finite() && offset != 0.0 {
        for v in z.iter_mut() {
            *v -= offset;
        }
    }
    Ok(DepthMap {
        width: phi.width,
        height: phi.height,
        pitch,
        z,
        mask: phi.valid.clone(),
        convention,
    })
}

/// Mix two synthetic fields into a beat-note ("synthetic-synthetic") field
/// whose wavelength is the synthetic wavelength of the two inputs. Mixing the
/// smaller-wavelength field against the larger keeps the beat phase positive
/// for positive depth.
pub fn beat_note(s1: &SyntheticField, s2: &SyntheticField) -> Result<SyntheticField> {
    let beat_lambda = synthetic_wavelength(s1.synthetic_wavelength, s2.synthetic_wavelength)?;
    let (a, b) = if s1.synthetic_wavelength <= s2.synthetic_wavelength {
        (s1, s2)
    } else {
        (s2, s1)
    };
    let field = mix_conjugate(&a.field, &b.field)?;
    SyntheticField::new(
        field,
        beat_lambda,
        Provenance::BeatNote { parents: (s1.synthetic_wavelength, s2.synthetic_wavelength) },
    )
}

/// An unwrapped phase map: the wrapped fractional phase plus an integer
/// fringe order per pixel. `value = wrapped + 2*pi*order`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnwrappedPhaseMap {
    pub width: usize,
    pub height: usize,
    pub wrapped: Vec<f64>,
    pub fringe_order: Vec<i32>,
    pub valid: Vec<bool>,
}

impl UnwrappedPhaseMap {
    /// A trivial unwrapped map with fringe order zero everywhere.
    pub fn from_wrapped(pm: &PhaseMap) -> Self {
        Self {
            width: pm.width,
            height: pm.height,
            wrapped: pm.phase.clone(),
            fringe_order: vec![0; pm.phase.len()],
            valid: pm.valid.clone(),
        }
    }

    /// Unwrapped phase values, `wrapped + 2*pi*order`.
    pub fn values(&self) -> Vec<f64> {
        self.wrapped
            .iter()
            .zip(&self.fringe_order)
            .map(|(&w, &k)| w + TAU * k as f64)
            .collect()
    }

    /// Re-wrap: returns the stored fractional phase, bit-exact with the map
    /// that was unwrapped.
    pub fn rewrap(&self) -> PhaseMap {
        PhaseMap {
            width: self.width,
            height: self.height,
            phase: self.wrapped.clone(),
            valid: self.valid.clone(),
        }
    }

    /// Materialize the unwrapped values as a plain phase map.
    pub fn to_phase_map(&self) -> PhaseMap {
        PhaseMap {
            width: self.width,
            height: self.height,
            phase: self.values(),
            valid: self.valid.clone(),
        }
    }
}

/// Number-theoretic unwrapping of a wrapped map against an already-unwrapped
/// guidance at a larger synthetic wavelength.
///
/// `ratio` is `Lambda_guidance / Lambda_wrapped`; the guidance phase times
/// the ratio predicts the true phase, and the fringe order is the nearest
/// whole number of 2-pi turns between prediction and measurement:
/// `order = round((guidance*ratio - wrapped) / 2*pi)`.
///
/// A guidance phase error at one pixel flips that pixel's fringe order once
/// it exceeds `pi / ratio`.
pub fn guided_unwrap(
    wrapped: &PhaseMap,
    guidance: &PhaseMap,
    ratio: f64,
) -> Result<UnwrappedPhaseMap> {
    if ratio <= 1.0 || !ratio.is_finite() {
        return Err(Error::Config(format!(
            "guidance-to-wrapped wavelength ratio must exceed 1, got {ratio}"
        )));
    }
    if wrapped.width != guidance.width || wrapped.height != guidance.height {
        return Err(Error::DimensionMismatch("wrapped/guidance geometry differs".into()));
    }
    let n = wrapped.phase.len();
    let mut order = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for k in 0..n {
        let ok = wrapped.valid[k] && guidance.valid[k];
        valid.push(ok);
        if ok {
            let predicted = guidance.phase[k] * ratio;
            order.push(((predicted - wrapped.phase[k]) / TAU).round() as i32);
        } else {
            order.push(0);
        }
    }
    Ok(UnwrappedPhaseMap {
        width: wrapped.width,
        height: wrapped.height,
        wrapped: wrapped.phase.clone(),
        fringe_order: order,
        valid,
    })
}

fn effective_weights(pm: &PhaseMap, weights: Option<&[f64]>) -> Vec<f64> {
    let mut w: Vec<f64> = match weights {
        Some(ws) => ws.to_vec(),
        None => vec![1.0; pm.phase.len()],
    };
    for (k, &v) in pm.valid.iter().enumerate() {
        if !v {
            w[k] = 0.0;
        }
    }
    w
}

/// Smooth a wrapped, wrap-free phase map into a guidance map.
///
/// The phase is blurred in the complex domain (`exp(i*phi)` weighted per
/// pixel — field amplitudes when available, so speckle nulls do not drag
/// their neighbors), which has no wrap-boundary artifacts. The result is then
/// re-branched: a wrap-free map occupies an arc shorter than a full turn, so
/// the 2-pi cut is placed inside the empty part of the weighted phase
/// histogram and the values are expressed contiguously on the same branch as
/// the input. A map with no empty arc is not wrap-free and is rejected.
pub fn smooth_wrapped_guidance(
    pm: &PhaseMap,
    weights: Option<&[f64]>,
    sigma: f64,
) -> Result<PhaseMap> {
    let n = pm.phase.len();
    let w = effective_weights(pm, weights);
    let data: Vec<Complex64> =
        pm.phase.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    let blurred = if sigma > 0.0 {
        gaussian_blur_complex(pm.width, pm.height, &data, Some(&w), sigma)
    } else {
        data
    };

    // weighted angular histogram of the smoothed phase
    const BINS: usize = 64;
    let mut hist = [0.0f64; BINS];
    let mut total = 0.0;
    for (k, b) in blurred.iter().enumerate() {
        if pm.valid[k] && b.norm() > 0.0 {
            let bin = (crate::field::wrap_2pi(b.arg()) / TAU * BINS as f64) as usize % BINS;
            hist[bin] += w[k];
            total += w[k];
        }
    }
    if total == 0.0 {
        return Err(Error::DataValidity("guidance map has no valid pixels".into()));
    }
    // longest circular run of near-empty bins; a quarter of the uniform
    // share tolerates the junk pedestal that image borders and residual
    // nulls spread across all angles
    let floor = 0.25 * total / BINS as f64;
    let mut best_len = 0usize;
    let mut best_start = 0usize;
    let mut run = 0usize;
    for i in 0..2 * BINS {
        if hist[i % BINS] < floor {
            run += 1;
            if run > best_len {
                best_len = run.min(BINS);
                best_start = i + 1 - run;
            }
        } else {
            run = 0;
        }
    }
    if best_len < 2 {
        return Err(Error::CascadeInfeasible {
            stage: "guidance".into(),
            reason: "guidance phase occupies the full wrap interval; it is not wrap-free".into(),
        });
    }
    let cut = (best_start as f64 + best_len as f64 / 2.0) / BINS as f64 * TAU;

    // express values contiguously past the cut, then re-center onto the
    // branch of the input so integer fringe predictions stay consistent
    let mut phase: Vec<f64> = Vec::with_capacity(n);
    let mut mean_out = 0.0;
    let mut mean_in = 0.0;
    for (k, b) in blurred.iter().enumerate() {
        let v = if pm.valid[k] && b.norm() > 0.0 {
            cut + crate::field::wrap_2pi(b.arg() - cut)
        } else {
            pm.phase[k]
        };
        phase.push(v);
        mean_out += w[k] * v;
        mean_in += w[k] * pm.phase[k];
    }
    let shift = TAU * ((mean_out - mean_in) / total / TAU).round();
    if shift != 0.0 {
        for v in phase.iter_mut() {
            *v -= shift;
        }
    }
    Ok(PhaseMap { width: pm.width, height: pm.height, phase, valid: pm.valid.clone() })
}

/// Smooth an already-unwrapped guidance map: a weighted linear blur of the
/// real phase values. Unwrapped maps have no wrap boundaries, so linear
/// smoothing is artifact-free, and the amplitude weighting suppresses the
/// bounded (at most pi) noise that speckle nulls leave behind after
/// unwrapping.
pub fn smooth_unwrapped_guidance(pm: &PhaseMap, weights: Option<&[f64]>, sigma: f64) -> PhaseMap {
    if sigma <= 0.0 {
        return pm.clone();
    }
    let w = effective_weights(pm, weights);
    let data: Vec<Complex64> =
        pm.phase.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let blurred = gaussian_blur_complex(pm.width, pm.height, &data, Some(&w), sigma);
    let phase = blurred
        .iter()
        .zip(&pm.phase)
        .zip(&pm.valid)
        .map(|((b, &orig), &v)| if v { b.re } else { orig })
        .collect();
    PhaseMap { width: pm.width, height: pm.height, phase, valid: pm.valid.clone() }
}

/// Parameters of the multi-frequency unwrapping cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    /// Gaussian sigma (pixels) of the smoothing applied to each stage's
    /// guidance map.
    pub smoothing_sigma: f64,
    /// Expected scene depth span in meters; a field is wrap-free when half
    /// its synthetic wavelength covers this span.
    pub depth_span: f64,
    /// Relative amplitude floor for phase validity inside the cascade.
    /// Speckle nulls below this fraction of the mean amplitude carry no
    /// phase and are masked out of the result.
    pub amplitude_floor: f64,
}

impl CascadeConfig {
    pub const DEFAULT_SMOOTHING_SIGMA: f64 = 3.0;
    pub const DEFAULT_AMPLITUDE_FLOOR: f64 = 0.3;

    pub fn new(smoothing_sigma: f64, depth_span: f64) -> Result<Self> {
        if !(depth_span > 0.0 && depth_span.is_finite()) {
            return Err(Error::Config("depth span must be positive".into()));
        }
        if !(smoothing_sigma >= 0.0) {
            return Err(Error::Config("smoothing sigma must be non-negative".into()));
        }
        Ok(Self { smoothing_sigma, depth_span, amplitude_floor: Self::DEFAULT_AMPLITUDE_FLOOR })
    }
}

/// Multi-frequency unwrapping cascade: establish a wrap-free guidance map
/// (directly, or by building the largest-wavelength beat note from the
/// available pairs), then unwrap stage by stage from the largest to the
/// smallest synthetic wavelength, smoothing the guidance between stages.
/// Returns the unwrapped map at the finest wavelength.
pub fn unwrap_cascade(
    fields: &[SyntheticField],
    config: &CascadeConfig,
) -> Result<UnwrappedPhaseMap> {
    if fields.is_empty() {
        return Err(Error::Config("cascade needs at least one field".into()));
    }
    for (i, a) in fields.iter().enumerate() {
        for b in fields.iter().skip(i + 1) {
            if a.synthetic_wavelength == b.synthetic_wavelength {
                return Err(Error::Config(format!(
                    "duplicate synthetic wavelength {} in cascade",
                    a.synthetic_wavelength
                )));
            }
        }
    }
    let wrap_free = |lambda: f64| lambda / 2.0 >= config.depth_span;

    // largest wavelength first; ties are impossible after the check above
    let mut order: Vec<usize> = (0..fields.len()).collect();
    order.sort_by(|&a, &b| {
        fields[b]
            .synthetic_wavelength
            .partial_cmp(&fields[a].synthetic_wavelength)
            .unwrap()
    });

    // establish guidance; its smoothing is weighted by the guidance field's
    // own amplitude so speckle nulls do not pollute it
    let largest = &fields[order[0]];
    let floor = config.amplitude_floor;
    let (guidance_raw, guidance_amp, mut guidance_lambda, stages): (PhaseMap, Vec<f64>, f64, &[usize]) =
        if wrap_free(largest.synthetic_wavelength) {
            (
                phase_of_with_floor(&largest.field, floor),
                largest.field.amplitude(),
                largest.synthetic_wavelength,
                &order[1..],
            )
        } else {
            // best beat-note pair: the largest achievable beat wavelength
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..fields.len() {
                for j in (i + 1)..fields.len() {
                    let lb = synthetic_wavelength(
                        fields[i].synthetic_wavelength,
                        fields[j].synthetic_wavelength,
                    )?;
                    if best.map_or(true, |(_, _, b)| lb > b) {
                        best = Some((i, j, lb));
                    }
                }
            }
            let (i, j, lb) = best.ok_or_else(|| Error::CascadeInfeasible {
                stage: "guidance".into(),
                reason: format!(
                    "single field at {} m is wrapped over a {} m depth span",
                    largest.synthetic_wavelength, config.depth_span
                ),
            })?;
            if !wrap_free(lb) {
                return Err(Error::CascadeInfeasible {
                    stage: "guidance".into(),
                    reason: format!(
                        "largest beat-note wavelength {} m still wraps over a {} m depth span",
                        lb, config.depth_span
                    ),
                });
            }
            let beat = beat_note(&fields[i], &fields[j])?;
            let amp = beat.field.amplitude();
            (phase_of_with_floor(&beat.field, floor), amp, lb, &order[..])
        };
    if stages.is_empty() {
        // a single wrap-free field: nothing to unwrap
        return Ok(UnwrappedPhaseMap::from_wrapped(&phase_of_with_floor(&largest.field, floor)));
    }
    let mut guidance =
        smooth_wrapped_guidance(&guidance_raw, Some(&guidance_amp), config.smoothing_sigma)?;

    let mut result: Option<UnwrappedPhaseMap> = None;
    for &idx in stages {
        let f = &fields[idx];
        let ratio = guidance_lambda / f.synthetic_wavelength;
        let mut unwrapped =
            guided_unwrap(&phase_of_with_floor(&f.field, floor), &guidance, ratio)?;
        // reliability mask: when the measurement lands almost half a turn
        // from the guidance prediction, the fringe-order rounding was a coin
        // flip; such pixels carry no trustworthy unwrapped value
        for k in 0..unwrapped.wrapped.len() {
            if unwrapped.valid[k] {
                let residual = crate::field::wrap_pm_pi(
                    guidance.phase[k] * ratio - unwrapped.wrapped[k],
                )
                .abs();
                if residual > 0.85 * std::f64::consts::PI {
                    unwrapped.valid[k] = false;
                }
            }
        }
        guidance = smooth_unwrapped_guidance(
            &unwrapped.to_phase_map(),
            Some(&f.field.amplitude()),
            config.smoothing_sigma,
        );
        guidance_lambda = f.synthetic_wavelength;
        result = Some(unwrapped);
    }
    Ok(result.expect("at least one stage ran"))
}

/// Recover the synthetic field from one crossed-fringe image: demodulate the
/// horizontal-carrier sideband (wavelength 1) and the vertical-carrier
/// sideband (wavelength 2), then mix so the synthetic phase grows with depth.
pub fn single_shot(
    img: &Interferogram,
    layout: &CarrierLayout,
    pair: &WavelengthPair,
) -> Result<SyntheticField> {
    let e1 = extract_field(img, &layout.horizontal)?;
    let e2 = extract_field(img, &layout.vertical)?;
    mix_for_depth(&e1, &e2, pair, Provenance::SingleShot)
}

/// Recover the synthetic field from two sequential single-reference images
/// that share one carrier: image 1 carries wavelength 1, image 2 wavelength 2.
pub fn double_shot(
    img1: &Interferogram,
    img2: &Interferogram,
    carrier: &CarrierSpec,
    pair: &WavelengthPair,
) -> Result<SyntheticField> {
    let e1 = extract_field(img1, carrier)?;
    let e2 = extract_field(img2, carrier)?;
    mix_for_depth(&e1, &e2, pair, Provenance::DoubleShot)
}

/// Mix two recovered optical fields into the synthetic field, ordering the
/// conjugation so that `phi = +4*pi*z/Lambda` for positive depth: the
/// smaller wavelength accumulates phase faster, so it goes first.
pub fn mix_for_depth(
    e1: &ComplexField,
    e2: &ComplexField,
    pair: &WavelengthPair,
    provenance: Provenance,
) -> Result<SyntheticField> {
    let field = if pair.lambda1 <= pair.lambda2 {
        mix_conjugate(e1, e2)?
    } else {
        mix_conjugate(e2, e1)?
    };
    SyntheticField::new(field, pair.synthetic, provenance)
}

/// Count fringe-order disagreements between an unwrapped phase map and a
/// ground-truth unwrapped phase, ignoring the global piston (interferometric
/// phase has no absolute datum).
pub fn fringe_order_errors(unwrapped: &UnwrappedPhaseMap, truth: &[f64]) -> Result<usize> {
    let values = unwrapped.values();
    if truth.len() != values.len() {
        return Err(Error::DimensionMismatch("truth length mismatch".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (k, &v) in values.iter().enumerate() {
        if unwrapped.valid[k] {
            sum += v - truth[k];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::DataValidity("no valid pixels".into()));
    }
    let piston = sum / n as f64;
    Ok(values
        .iter()
        .enumerate()
        .filter(|&(k, &v)| {
            unwrapped.valid[k] && ((v - truth[k] - piston) / TAU).round() as i64 != 0
        })
        .count())
}

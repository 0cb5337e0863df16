//! Single-shot Fourier demodulation: locate a spatial carrier in the image
//! spectrum, re-center its sideband, filter, and inverse-transform to recover
//! the complex object field from one intensity image.
//!
//! With references of the form `a * exp(+i*2*pi*f.x)`, the sideband at `+f`
//! carries `a * conj(E)`; [`extract_field`] conjugates after demodulation so
//! its output correlates with the object field `E` itself. Sub-bin carrier
//! frequencies are handled by an integer-bin spectrum shift plus a residual
//! phase ramp in the spatial domain, referenced to pixel (0, 0).

use crate::error::{Error, Result};
use crate::field::{fft2, ifft2, ComplexField, Spectrum};
use crate::sim::Interferogram;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Spectral window applied around the re-centered carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterShape {
    /// Raised cosine, exactly zero at the filter radius.
    Hann,
    /// Gaussian with sigma = radius/2, truncated to zero beyond the radius so
    /// DC can never leak through.
    Gaussian,
}

/// One reference beam's carrier and the sideband filter used to extract it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierSpec {
    /// Carrier frequency in cycles/pixel.
    pub frequency: (f64, f64),
    pub filter_shape: FilterShape,
    /// Filter radius in cycles/pixel.
    pub filter_radius: f64,
}

impl CarrierSpec {
    pub fn new(
        frequency: (f64, f64),
        filter_shape: FilterShape,
        filter_radius: f64,
    ) -> Result<Self> {
        let mag = frequency.0.hypot(frequency.1);
        if mag == 0.0 {
            return Err(Error::Config("carrier frequency must be nonzero".into()));
        }
        if !(filter_radius > 0.0 && filter_radius.is_finite()) {
            return Err(Error::Config("filter radius must be positive".into()));
        }
        if frequency.0.abs() + filter_radius > 0.5 || frequency.1.abs() + filter_radius > 0.5 {
            return Err(Error::Config(format!(
                "carrier ({}, {}) plus filter radius {} exceeds Nyquist",
                frequency.0, frequency.1, filter_radius
            )));
        }
        Ok(Self { frequency, filter_shape, filter_radius })
    }

    /// Default Hann filter sized by [`default_filter_radius`].
    pub fn with_default_filter(frequency: (f64, f64), pupil_cutoff: Option<f64>) -> Result<Self> {
        Self::new(frequency, FilterShape::Hann, default_filter_radius(frequency, pupil_cutoff))
    }
}

/// Default sideband filter radius: the pupil cutoff when the aperture is
/// known (the speckle band is exactly that wide), otherwise 0.8x the free
/// room around the carrier — the smaller of the carrier-to-DC gap and the
/// distance to the Nyquist box. That passes the band with generous margin
/// while keeping both the DC bin and the Nyquist edge outside the window.
pub fn default_filter_radius(frequency: (f64, f64), pupil_cutoff: Option<f64>) -> f64 {
    match pupil_cutoff {
        Some(c) => c,
        None => {
            let (u, v) = frequency;
            let room = u.hypot(v).min(0.5 - u.abs()).min(0.5 - v.abs());
            0.8 * room
        }
    }
}

/// Where to look for a carrier peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CarrierHint {
    /// Right half-plane (u > 0): vertical fringes from a horizontally tilted
    /// reference.
    Horizontal,
    /// Bottom half-plane (v > 0): horizontal fringes from a vertically tilted
    /// reference.
    Vertical,
    /// Frequencies whose direction lies within `half_width` radians of
    /// `angle` (measured from the +u axis). Supports setups with more than
    /// two references spread around the aperture.
    Cone { angle: f64, half_width: f64 },
}

impl CarrierHint {
    fn contains(&self, fu: f64, fv: f64) -> bool {
        match *self {
            CarrierHint::Horizontal => fu > 0.0,
            CarrierHint::Vertical => fv > 0.0,
            CarrierHint::Cone { angle, half_width } => {
                if fu == 0.0 && fv == 0.0 {
                    return false;
                }
                let d = crate::field::wrap_pm_pi(fv.atan2(fu) - angle).abs();
                d <= half_width
            }
        }
    }
}

/// Find the strongest spectral peak in the hinted half-plane, outside the DC
/// exclusion disk, and refine it to sub-bin accuracy with a 3x3 magnitude
/// centroid.
///
/// Fails with `CarrierNotFound` when no bin in the search region rises above
/// mean + 6 sigma of the regional magnitude, which is what happens when the
/// object beam is blocked: the reference alone interferes with nothing and
/// produces no fringes.
pub fn locate_carrier(
    spec: &Spectrum,
    hint: CarrierHint,
    dc_exclusion_radius: f64,
    default_radius: f64,
) -> Result<CarrierSpec> {
    let (w, h) = (spec.width(), spec.height());
    let mut peak: Option<(usize, usize, f64)> = None;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for j in 0..h {
        for i in 0..w {
            let (fu, fv) = spec.freq_at(i, j);
            if fu.hypot(fv) <= dc_exclusion_radius || !hint.contains(fu, fv) {
                continue;
            }
            let m = spec.data()[j * w + i].norm();
            sum += m;
            sum_sq += m * m;
            count += 1;
            if peak.map_or(true, |(_, _, pm)| m > pm) {
                peak = Some((i, j, m));
            }
        }
    }
    let (pi, pj, pm) =
        peak.ok_or_else(|| Error::CarrierNotFound("search region is empty".into()))?;
    let mean = sum / count as f64;
    let var = (sum_sq / count as f64 - mean * mean).max(0.0);
    let threshold = mean + 6.0 * var.sqrt();
    if !(pm > threshold) || pm == 0.0 {
        return Err(Error::CarrierNotFound(format!(
            "no peak above mean + 6 sigma ({threshold:.3e}) in the search region"
        )));
    }

    // 3x3 magnitude centroid around the peak; neighbor bins are fetched with
    // periodic wrap but their coordinates stay relative to the peak, so the
    // centroid is correct even at the spectrum edge.
    let mut m_sum = 0.0;
    let mut du = 0.0;
    let mut dv = 0.0;
    for oj in -1i64..=1 {
        for oi in -1i64..=1 {
            let ni = (pi as i64 + oi).rem_euclid(w as i64) as usize;
            let nj = (pj as i64 + oj).rem_euclid(h as i64) as usize;
            let m = spec.data()[nj * w + ni].norm();
            m_sum += m;
            du += m * oi as f64;
            dv += m * oj as f64;
        }
    }
    let (pu, pv) = spec.freq_at(pi, pj);
    let fu = pu + du / m_sum / w as f64;
    let fv = pv + dv / m_sum / h as f64;
    CarrierSpec::new((fu, fv), FilterShape::Hann, default_radius)
}

fn window_value(shape: FilterShape, rho: f64, radius: f64) -> f64 {
    if rho > radius {
        return 0.0;
    }
    match shape {
        FilterShape::Hann => 0.5 * (1.0 + (std::f64::consts::PI * rho / radius).cos()),
        FilterShape::Gaussian => {
            let sigma = radius / 2.0;
            (-0.5 * (rho / sigma).powi(2)).exp()
        }
    }
}

/// Demodulate one sideband of an interferogram into a complex field.
///
/// Pipeline: FFT, integer-bin shift putting the carrier bin at DC, window of
/// the chosen shape and radius (centered on the exact sub-bin carrier
/// position), inverse FFT, residual-carrier phase ramp, conjugation, and
/// amplitude normalization to unit spatial RMS.
pub fn extract_field(img: &Interferogram, carrier: &CarrierSpec) -> Result<ComplexField> {
    extract_field_from(&img.to_field()?, carrier)
}

/// [`extract_field`] on an already-materialized real image field.
pub fn extract_field_from(image: &ComplexField, carrier: &CarrierSpec) -> Result<ComplexField> {
    let (fu, fv) = carrier.frequency;
    if fu.abs() > 0.5 || fv.abs() > 0.5 {
        return Err(Error::Config("carrier outside Nyquist".into()));
    }
    if fu.hypot(fv) <= carrier.filter_radius {
        return Err(Error::SpectralOverlap(format!(
            "filter radius {} reaches the DC bin from carrier ({}, {})",
            carrier.filter_radius, fu, fv
        )));
    }
    let (w, h) = (image.width(), image.height());
    let spec = fft2(image)?;

    // integer part of the carrier in bins, residual in cycles/pixel
    let bu = (fu * w as f64).round();
    let bv = (fv * h as f64).round();
    let du = fu - bu / w as f64;
    let dv = fv - bv / h as f64;

    let shifted = spec.shifted_bins(-(bu as isize), -(bv as isize));
    let windowed = shifted.filtered(|u, v| {
        window_value(carrier.filter_shape, (u - du).hypot(v - dv), carrier.filter_radius)
    });
    let field = ifft2(&windowed)?;

    // compensate the residual sub-bin carrier, undo the conjugation the +f
    // sideband carries, and normalize
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let ramp = Complex64::from_polar(1.0, -TAU * (du * x as f64 + dv * y as f64));
            data.push((field.get(x, y) * ramp).conj());
        }
    }
    let out = ComplexField::new(w, h, image.pitch(), data)?;
    let rms = out.rms_amplitude();
    if rms == 0.0 {
        return Err(Error::DataValidity("extracted field is identically zero".into()));
    }
    Ok(out.scaled(Complex64::new(1.0 / rms, 0.0)))
}

/// The two carriers of the standard crossed-fringe layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierLayout {
    pub horizontal: CarrierSpec,
    pub vertical: CarrierSpec,
}

impl CarrierLayout {
    /// Bin-aligned carriers at roughly 3 pixels/fringe for a given image
    /// size, with default filters. Bin alignment keeps the demodulation free
    /// of boundary leakage.
    pub fn default_for(width: usize, height: usize, pupil_cutoff: Option<f64>) -> Result<Self> {
        let u = (width as f64 / 3.0).round() / width as f64;
        let v = (height as f64 / 3.0).round() / height as f64;
        Ok(Self {
            horizontal: CarrierSpec::with_default_filter((u, 0.0), pupil_cutoff)?,
            vertical: CarrierSpec::with_default_filter((0.0, v), pupil_cutoff)?,
        })
    }
}

/// Geometry report for a set of carriers and a pupil cutoff: every sideband
/// occupies a disk of the pupil radius around +/- its carrier, while the DC
/// term occupies twice that radius (the image autocorrelation doubles the
/// band). Distances are measured on the frequency torus, so Nyquist aliasing
/// shows up as overlap with the wrapped twin.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// Minimum gap between sideband disks for each carrier pair `(i, j)`;
    /// `(i, i)` entries measure a sideband against its own Hermitian twin.
    pub pairwise_gaps: Vec<((usize, usize), f64)>,
    /// Smallest DC-to-sideband gap over all carriers.
    pub dc_gap: f64,
    /// Carriers whose sideband disk extends past the Nyquist edge and wraps.
    pub clipped: Vec<usize>,
    /// True when any gap is negative.
    pub overlap_flag: bool,
}

impl SeparationReport {
    /// Smallest gap anywhere in the report.
    pub fn min_gap(&self) -> f64 {
        self.pairwise_gaps.iter().map(|&(_, g)| g).fold(self.dc_gap, f64::min)
    }
}

fn torus_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let du = (a.0 - b.0).rem_euclid(1.0);
    let dv = (a.1 - b.1).rem_euclid(1.0);
    let du = du.min(1.0 - du);
    let dv = dv.min(1.0 - dv);
    du.hypot(dv)
}

/// Check that the spectral regions of a carrier layout stay separated for a
/// given pupil cutoff. Report-only; callers decide whether a negative gap is
/// fatal.
pub fn check_separation(carriers: &[CarrierSpec], pupil_cutoff: f64) -> SeparationReport {
    let r_side = pupil_cutoff;
    let r_dc = 2.0 * pupil_cutoff;
    let mut pairwise = Vec::new();
    let mut dc_gap = f64::INFINITY;
    let mut clipped = Vec::new();

    let sidebands: Vec<[(f64, f64); 2]> = carriers
        .iter()
        .map(|c| {
            let f = c.frequency;
            [f, (-f.0, -f.1)]
        })
        .collect();

    for (i, c) in carriers.iter().enumerate() {
        let f = c.frequency;
        dc_gap = dc_gap.min(torus_distance(f, (0.0, 0.0)) - r_dc - r_side);
        if f.0.abs() + r_side > 0.5 || f.1.abs() + r_side > 0.5 {
            clipped.push(i);
        }
    }

    for i in 0..carriers.len() {
        // a sideband against its own wrapped twin
        let self_gap = torus_distance(sidebands[i][0], sidebands[i][1]) - 2.0 * r_side;
        pairwise.push(((i, i), self_gap));
        for j in (i + 1)..carriers.len() {
            let mut gap = f64::INFINITY;
            for a in &sidebands[i] {
                for b in &sidebands[j] {
                    gap = gap.min(torus_distance(*a, *b) - 2.0 * r_side);
                }
            }
            pairwise.push(((i, j), gap));
        }
    }

    let overlap_flag = dc_gap < 0.0 || pairwise.iter().any(|&(_, g)| g < 0.0);
    SeparationReport { pairwise_gaps: pairwise, dc_gap, clipped, overlap_flag }
}

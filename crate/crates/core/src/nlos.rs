//! Non-line-of-sight reconstruction: treat the synthetic field captured at a
//! diffuser plane as a hologram at the synthetic wavelength and backpropagate
//! it to localize a hidden source.
//!
//! Propagation uses the angular-spectrum method with the exact transfer
//! function `exp(i*2*pi*d*sqrt(1/Lambda^2 - nu^2))`; evanescent components
//! (`nu > 1/Lambda`) are zeroed. At synthetic wavelengths of a millimeter and
//! sub-millimeter pixel pitches the evanescent region is a thin rim of the
//! spectrum, but it exists and is handled.

use crate::error::{Error, Result};
use crate::field::{fft2, ifft2, ComplexField};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Backpropagation sweep description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPlan {
    pub synthetic_wavelength: f64,
    /// Sweep range of depths behind the capture plane, in meters.
    pub z_min: f64,
    pub z_max: f64,
    pub z_step: f64,
    /// Pixel pitch of the capture plane; must match the field being swept.
    pub plane_pitch: f64,
}

impl PropagationPlan {
    pub fn new(
        synthetic_wavelength: f64,
        z_min: f64,
        z_max: f64,
        z_step: f64,
        plane_pitch: f64,
    ) -> Result<Self> {
        if !(synthetic_wavelength > 0.0) {
            return Err(Error::Config("synthetic wavelength must be positive".into()));
        }
        if !(z_step > 0.0) {
            return Err(Error::Config("z step must be positive".into()));
        }
        if !(z_min <= z_max) {
            return Err(Error::Config("z range is empty".into()));
        }
        if !(plane_pitch > 0.0) {
            return Err(Error::Config("plane pitch must be positive".into()));
        }
        Ok(Self { synthetic_wavelength, z_min, z_max, z_step, plane_pitch })
    }

    /// Depths visited by the sweep.
    pub fn depths(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut z = self.z_min;
        while z <= self.z_max + 0.5 * self.z_step {
            out.push(z);
            z += self.z_step;
        }
        out
    }
}

/// Free-space propagation of a field over a signed distance at the given
/// wavelength. Positive distances propagate away from the source side;
/// backpropagation toward a hidden source uses negative distances.
///
/// Energy in the propagating band is conserved exactly (the transfer
/// function is a pure phase there).
pub fn angular_spectrum_propagate(
    field: &ComplexField,
    lambda_syn: f64,
    distance: f64,
) -> Result<ComplexField> {
    if !(lambda_syn > 0.0 && lambda_syn.is_finite()) {
        return Err(Error::Config("wavelength must be positive".into()));
    }
    if !distance.is_finite() {
        return Err(Error::Config("distance must be finite".into()));
    }
    let pitch = field.pitch();
    let inv_l2 = 1.0 / (lambda_syn * lambda_syn);
    let spec = fft2(field)?;
    let mut data = spec.data().to_vec();
    let (w, h) = (spec.width(), spec.height());
    for j in 0..h {
        for i in 0..w {
            let (u, v) = spec.freq_at(i, j);
            let nu_sq = (u / pitch).powi(2) + (v / pitch).powi(2);
            let kz_sq = inv_l2 - nu_sq;
            data[j * w + i] *= if kz_sq > 0.0 {
                Complex64::from_polar(1.0, TAU * distance * kz_sq.sqrt())
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    let filtered = spec.with_data(data);
    ifft2(&filtered)
}

/// Sampling heuristic for the angular-spectrum method: the propagation
/// distance should stay below `span^2 / lambda` or the transfer-function
/// phase aliases across bins. Violations degrade, not invalidate, the
/// result; callers surface this as a warning.
pub fn sampling_guard_ok(field: &ComplexField, lambda_syn: f64, distance: f64) -> bool {
    let span = field.width().min(field.height()) as f64 * field.pitch();
    distance.abs() < span * span / lambda_syn
}

/// Outcome of a focus sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusResult {
    /// Depth of the best-focus plane behind the capture plane, meters.
    pub z_star: f64,
    /// Amplitude image at the best-focus plane.
    pub image: Vec<f64>,
    pub width: usize,
    pub height: usize,
    /// (depth, sharpness score) for every plane visited.
    pub scores: Vec<(f64, f64)>,
    /// False when no plane scored at least 2 (peak-to-mean): nothing focused.
    pub focused: bool,
}

/// Sweep backpropagation depths and score each plane by its peak-to-mean
/// amplitude ratio, which is large exactly when a point-like source snaps
/// into focus.
pub fn focus_search(field: &ComplexField, plan: &PropagationPlan) -> Result<FocusResult> {
    if (plan.plane_pitch - field.pitch()).abs() > 1e-12 * plan.plane_pitch {
        return Err(Error::Config(format!(
            "plan pitch {} does not match field pitch {}",
            plan.plane_pitch,
            field.pitch()
        )));
    }
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut scores = Vec::new();
    for z in plan.depths() {
        let prop = angular_spectrum_propagate(field, plan.synthetic_wavelength, -z)?;
        let amplitude = prop.amplitude();
        let peak = amplitude.iter().cloned().fold(0.0, f64::max);
        let mean = amplitude.iter().sum::<f64>() / amplitude.len() as f64;
        let score = if mean > 0.0 { peak / mean } else { 0.0 };
        scores.push((z, score));
        if best.as_ref().map_or(true, |(_, s, _)| score > *s) {
            best = Some((z, score, amplitude));
        }
    }
    let (z_star, best_score, image) =
        best.ok_or_else(|| Error::Config("empty sweep range".into()))?;
    Ok(FocusResult {
        z_star,
        image,
        width: field.width(),
        height: field.height(),
        scores,
        focused: best_score >= 2.0,
    })
}

/// Peak location of an amplitude image.
pub fn peak_position(image: &[f64], width: usize) -> (usize, usize) {
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for (k, &v) in image.iter().enumerate() {
        if v > best.2 {
            best = (k % width, k / width, v);
        }
    }
    (best.0, best.1)
}

/// Full width at half maximum of the focal spot, in pixels: the mean of the
/// x- and y-cuts through the peak, with linear interpolation at the
/// half-maximum crossings.
pub fn spot_fwhm(image: &[f64], width: usize, height: usize) -> f64 {
    let (px, py) = peak_position(image, width);
    let peak = image[py * width + px];
    let half = peak / 2.0;

    let cross = |values: &dyn Fn(isize) -> Option<f64>, dir: isize| -> f64 {
        let mut prev = peak;
        let mut d = 0isize;
        loop {
            d += dir;
            match values(d) {
                Some(v) if v >= half => prev = v,
                Some(v) => {
                    // linear interpolation between prev (>= half) and v
                    let frac = (prev - half) / (prev - v);
                    return (d.abs() - 1) as f64 + frac;
                }
                None => return d.abs() as f64,
            }
        }
    };

    let x_cut = |d: isize| -> Option<f64> {
        let x = px as isize + d;
        (x >= 0 && x < width as isize).then(|| image[py * width + x as usize])
    };
    let y_cut = |d: isize| -> Option<f64> {
        let y = py as isize + d;
        (y >= 0 && y < height as isize).then(|| image[y as usize * width + px])
    };

    let wx = cross(&x_cut, 1) + cross(&x_cut, -1);
    let wy = cross(&y_cut, 1) + cross(&y_cut, -1);
    (wx + wy) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{mix_conjugate, WavelengthPair};
    use crate::sim::{diffuser_capture_field, PointSourceScene};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 850e-9;
    const SYN: f64 = 1e-3;

    fn random_field(w: usize, pitch: f64, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * w)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        ComplexField::new(w, w, pitch, data).unwrap()
    }

    /// Synthetic field at the diffuser plane for a hidden point source.
    fn hidden_source_field(source: (f64, f64, f64), aperture: Option<f64>) -> ComplexField {
        let ps = PointSourceScene {
            width: 64,
            height: 64,
            pitch: 0.5e-3,
            source,
            screen_seed: 11,
            aperture: aperture.map(|c| crate::sim::ApertureSpec::new(c).unwrap()),
        };
        let pair = WavelengthPair::from_synthetic(LAMBDA, SYN).unwrap();
        let c1 = diffuser_capture_field(&ps, pair.lambda1).unwrap();
        let c2 = diffuser_capture_field(&ps, pair.lambda2).unwrap();
        mix_conjugate(&c1, &c2).unwrap()
    }

    #[test]
    fn zero_distance_is_identity_for_band_limited_fields() {
        // pitch 0.75 mm at a 1 mm wavelength: the whole Nyquist square is
        // propagating, so nothing is zeroed
        let f = random_field(32, 0.75e-3, 1);
        let out = angular_spectrum_propagate(&f, SYN, 0.0).unwrap();
        let max_err = f
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-10, "max error {max_err}");
    }

    #[test]
    fn forward_then_backward_restores_propagating_band() {
        let f = random_field(32, 0.4e-3, 2);
        // band-limit by a zero-distance pass (zeroes evanescent components)
        let band = angular_spectrum_propagate(&f, SYN, 0.0).unwrap();
        let there = angular_spectrum_propagate(&band, SYN, 0.05).unwrap();
        let back = angular_spectrum_propagate(&there, SYN, -0.05).unwrap();
        let num: f64 = band
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = band.data().iter().map(|c| c.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-6, "relative error {}", (num / den).sqrt());
    }

    #[test]
    fn propagation_conserves_band_energy() {
        let f = random_field(32, 0.4e-3, 3);
        let band = angular_spectrum_propagate(&f, SYN, 0.0).unwrap();
        let prop = angular_spectrum_propagate(&band, SYN, 0.12).unwrap();
        let rel = (prop.l2_norm() - band.l2_norm()).abs() / band.l2_norm();
        assert!(rel < 1e-6, "energy drift {rel}");
    }

    #[test]
    fn backpropagation_focuses_hidden_point_source() {
        let d = 0.2;
        let syn_field = hidden_source_field((0.0, 0.0, d), None);
        let focused = angular_spectrum_propagate(&syn_field, SYN, -d).unwrap();
        let (px, py) = peak_position(&focused.amplitude(), 64);
        assert!(
            (px as i64 - 32).abs() <= 1 && (py as i64 - 32).abs() <= 1,
            "peak at ({px},{py}), expected (32,32)"
        );
    }

    #[test]
    fn focus_search_finds_source_depth() {
        let d = 0.2;
        let syn_field = hidden_source_field((0.0, 0.0, d), None);
        let plan = PropagationPlan::new(SYN, 0.1, 0.3, 5e-3, 0.5e-3).unwrap();
        let res = focus_search(&syn_field, &plan).unwrap();
        assert!(res.focused, "no focus found");
        assert!((res.z_star - d).abs() <= 5e-3, "z* = {}", res.z_star);
    }

    #[test]
    fn empty_field_reports_no_focus() {
        let f = ComplexField::zeros(32, 32, 0.5e-3).unwrap();
        let plan = PropagationPlan::new(SYN, 0.1, 0.2, 0.05, 0.5e-3).unwrap();
        let res = focus_search(&f, &plan).unwrap();
        assert!(!res.focused);
    }

    #[test]
    fn two_sources_give_two_score_maxima_and_the_global_one_wins() {
        // depths far enough apart that the defocused halo of one source does
        // not bury the focus bump of the other
        let a = hidden_source_field((-4e-3, 0.0, 0.12), None);
        let b = hidden_source_field((6e-3, 0.0, 0.28), None);
        let data: Vec<Complex64> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x + y * 0.8)
            .collect();
        let field = ComplexField::new(64, 64, 0.5e-3, data).unwrap();
        let plan = PropagationPlan::new(SYN, 0.1, 0.3, 5e-3, 0.5e-3).unwrap();
        let res = focus_search(&field, &plan).unwrap();
        // the global maximum belongs to the stronger source
        assert!((res.z_star - 0.12).abs() <= 5e-3, "z* = {}", res.z_star);
        // and a second local maximum marks the weaker one
        let local_max_near = |z0: f64| -> bool {
            res.scores.windows(3).any(|w| {
                let (z, s) = w[1];
                (z - z0).abs() <= 1e-2 && s > w[0].1 && s > w[2].1
            })
        };
        assert!(local_max_near(0.28), "scores: {:?}", res.scores);
    }

    #[test]
    fn reconstruction_shifts_with_the_source() {
        let d = 0.2;
        let base = hidden_source_field((0.0, 0.0, d), None);
        let shifted = hidden_source_field((4.0 * 0.5e-3, 0.0, d), None); // 4 px
        let pa = peak_position(
            &angular_spectrum_propagate(&base, SYN, -d).unwrap().amplitude(),
            64,
        );
        let pb = peak_position(
            &angular_spectrum_propagate(&shifted, SYN, -d).unwrap().amplitude(),
            64,
        );
        let dx = pb.0 as i64 - pa.0 as i64;
        let dy = pb.1 as i64 - pa.1 as i64;
        assert!((dx - 4).abs() <= 1 && dy.abs() <= 1, "shift ({dx},{dy})");
    }

    #[test]
    fn focal_spot_matches_diffraction_limit() {
        let d = 0.2;
        let syn_field = hidden_source_field((0.0, 0.0, d), None);
        let focused = angular_spectrum_propagate(&syn_field, SYN, -d).unwrap();
        let fwhm_px = spot_fwhm(&focused.amplitude(), 64, 64);
        // diffraction limit: Lambda * d / D with D the captured span
        let span = 64.0 * 0.5e-3;
        let limit_px = SYN * d / span / 0.5e-3;
        let ratio = fwhm_px / limit_px;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "spot {fwhm_px:.2} px vs limit {limit_px:.2} px (ratio {ratio:.2})"
        );
    }

    #[test]
    fn sampling_guard_flags_extreme_distances() {
        let f = random_field(32, 0.5e-3, 4);
        // span = 16 mm, span^2/lambda = 0.256 m
        assert!(sampling_guard_ok(&f, SYN, 0.2));
        assert!(!sampling_guard_ok(&f, SYN, 0.3));
    }
}

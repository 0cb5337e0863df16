//! Depth-precision metrology: ROI plane fits, residual standard deviation,
//! and single- vs double-shot comparison tables.
//!
//! The precision figure is the population standard deviation of the
//! plane-fit residuals over a region of interest, with no outlier filtering.
//! Population (not sample) normalization is pinned so regression tests are
//! bit-stable; at the pixel counts involved the difference is negligible.

use crate::demod::CarrierLayout;
use crate::error::{Error, Result};
use crate::field::{phase_of, WavelengthPair};
use crate::recon::{depth_from_phase, double_shot, single_shot, DepthMap, OffsetConvention};
use crate::sim::Interferogram;
use std::fmt;

/// Pixel-space region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self { x0, y0, width, height }
    }

    /// Centered square ROI covering a physical side length, clamped to the
    /// map. The default evaluation patch is 23 mm x 23 mm.
    pub fn centered_physical(map_width: usize, map_height: usize, pitch: f64, side: f64) -> Self {
        let px = ((side / pitch).round() as usize).clamp(1, map_width.min(map_height));
        Self {
            x0: (map_width - px) / 2,
            y0: (map_height - px) / 2,
            width: px,
            height: px,
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }
}

impl fmt::Display for Rect {
    /// Geometry-style formatting: `WxH+x0+y0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}+{}+{}", self.width, self.height, self.x0, self.y0)
    }
}

/// Acquisition mode of a precision run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcquisitionMode {
    SingleShot,
    DoubleShot,
}

impl fmt::Display for AcquisitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcquisitionMode::SingleShot => write!(f, "single-shot"),
            AcquisitionMode::DoubleShot => write!(f, "double-shot"),
        }
    }
}

/// Least-squares plane `z = a*x + b*y + c` over the valid pixels of an ROI;
/// x and y are in pixel units. Needs at least three non-collinear points.
pub fn fit_plane(depth: &DepthMap, roi: &Rect) -> Result<(f64, f64, f64)> {
    if roi.x0 + roi.width > depth.width || roi.y0 + roi.height > depth.height {
        return Err(Error::Config(format!(
            "ROI {roi} exceeds the {}x{} depth map",
            depth.width, depth.height
        )));
    }
    let mut n = 0.0;
    let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
    for y in roi.y0..roi.y0 + roi.height {
        for x in roi.x0..roi.x0 + roi.width {
            let k = y * depth.width + x;
            if depth.mask[k] {
                n += 1.0;
                sx += x as f64;
                sy += y as f64;
                sz += depth.z[k];
            }
        }
    }
    if n < 3.0 {
        return Err(Error::DegenerateFit(format!("only {n} valid pixels in {roi}")));
    }
    let (mx, my, mz) = (sx / n, sy / n, sz / n);

    // centered normal equations: well conditioned, and singularity means the
    // points are collinear
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in roi.y0..roi.y0 + roi.height {
        for x in roi.x0..roi.x0 + roi.width {
            let k = y * depth.width + x;
            if depth.mask[k] {
                let dx = x as f64 - mx;
                let dy = y as f64 - my;
                let dz = depth.z[k] - mz;
                sxx += dx * dx;
                sxy += dx * dy;
                syy += dy * dy;
                sxz += dx * dz;
                syz += dy * dz;
            }
        }
    }
    let det = sxx * syy - sxy * sxy;
    if det <= 1e-12 * (sxx * syy).max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateFit("ROI pixels are collinear".into()));
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    let c = mz - a * mx - b * my;
    Ok((a, b, c))
}

/// Precision figure for one measurement: the standard deviation of the
/// plane-fit residuals over an ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionReport {
    pub synthetic_wavelength: f64,
    pub mode: AcquisitionMode,
    pub roi: Rect,
    /// Depth precision in meters.
    pub delta_z: f64,
    /// Valid pixels that entered the statistic.
    pub n_points: usize,
}

/// Plane-fit precision over an ROI. Requires at least 100 valid pixels for a
/// meaningful population statistic.
pub fn precision(
    depth: &DepthMap,
    roi: &Rect,
    lambda_syn: f64,
    mode: AcquisitionMode,
) -> Result<PrecisionReport> {
    let (a, b, c) = fit_plane(depth, roi)?;
    let mut n = 0usize;
    let mut ss = 0.0;
    for y in roi.y0..roi.y0 + roi.height {
        for x in roi.x0..roi.x0 + roi.width {
            let k = y * depth.width + x;
            if depth.mask[k] {
                let r = depth.z[k] - (a * x as f64 + b * y as f64 + c);
                ss += r * r;
                n += 1;
            }
        }
    }
    if n < 100 {
        return Err(Error::DegenerateFit(format!(
            "{n} valid pixels in {roi}; at least 100 required for a precision figure"
        )));
    }
    Ok(PrecisionReport {
        synthetic_wavelength: lambda_syn,
        mode,
        roi: *roi,
        delta_z: (ss / n as f64).sqrt(),
        n_points: n,
    })
}

/// One end-to-end precision run: captured frames plus everything needed to
/// reconstruct them. Single-shot mode takes one crossed-fringe frame;
/// double-shot takes two single-reference frames sharing the horizontal
/// carrier.
#[derive(Debug, Clone)]
pub struct PrecisionRun {
    pub pair: WavelengthPair,
    pub mode: AcquisitionMode,
    pub frames: Vec<Interferogram>,
    pub layout: CarrierLayout,
    pub roi: Rect,
}

/// Reconstruct a depth map from a precision run's frames.
pub fn reconstruct_run(run: &PrecisionRun) -> Result<DepthMap> {
    let syn = match run.mode {
        AcquisitionMode::SingleShot => {
            let img = run
                .frames
                .first()
                .ok_or_else(|| Error::Config("single-shot run needs one frame".into()))?;
            single_shot(img, &run.layout, &run.pair)?
        }
        AcquisitionMode::DoubleShot => {
            if run.frames.len() < 2 {
                return Err(Error::Config("double-shot run needs two frames".into()));
            }
            double_shot(&run.frames[0], &run.frames[1], &run.layout.horizontal, &run.pair)?
        }
    };
    depth_from_phase(
        &phase_of(&syn.field),
        run.frames[0].pitch,
        run.pair.synthetic,
        OffsetConvention::ZeroMin,
    )
}

/// Run every precision measurement and collect one report per run.
pub fn precision_table(runs: &[PrecisionRun]) -> Result<Vec<PrecisionReport>> {
    runs.iter()
        .map(|run| {
            let depth = reconstruct_run(run)?;
            precision(&depth, &run.roi, run.pair.synthetic, run.mode)
        })
        .collect()
}

/// Fixed-header tab-separated rendering of precision reports.
pub fn format_precision_table(reports: &[PrecisionReport]) -> String {
    let mut out = String::from("lambda_syn_mm\tmode\tdelta_z_mm\tn_points\troi\n");
    for r in reports {
        out.push_str(&format!(
            "{:.6}\t{}\t{:.6}\t{}\t{}\n",
            r.synthetic_wavelength * 1e3,
            r.mode,
            r.delta_z * 1e3,
            r.n_points,
            r.roi
        ));
    }
    out
}

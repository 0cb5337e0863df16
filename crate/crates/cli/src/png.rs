//! 8-bit PNG export of grid files with a recorded normalization.
//!
//! PNG output is for viewing only; the grid files remain the bit-exact
//! interchange format. Masked (NaN) pixels render black, and the applied
//! normalization is written to a `<png>.norm.txt` sidecar so renders are
//! auditable.

use crate::error::{CliError, Result};
use crate::grid::{GridData, GridFile};
use std::path::Path;
use switof_core::field::wrap_2pi;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// Complex grids render phase; real grids their values; code grids their
    /// intensity.
    Auto,
    Phase,
    Amplitude,
    Value,
    Intensity,
}

impl MapKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MapKind::Auto),
            "phase" => Ok(MapKind::Phase),
            "amplitude" => Ok(MapKind::Amplitude),
            "value" | "depth" => Ok(MapKind::Value),
            "intensity" => Ok(MapKind::Intensity),
            other => Err(CliError::Config(format!("unknown map kind \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    Gray,
    /// Hue wheel; start and end colors match, suited to wrapped phase.
    Cyclic,
    /// Black, red, yellow, white.
    Heat,
}

impl Colormap {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gray" | "grey" => Ok(Colormap::Gray),
            "cyclic" => Ok(Colormap::Cyclic),
            "heat" => Ok(Colormap::Heat),
            other => Err(CliError::Config(format!("unknown colormap \"{other}\""))),
        }
    }

    fn rgb(&self, t: f64) -> [u8; 3] {
        let t = t.clamp(0.0, 1.0);
        match self {
            Colormap::Gray => {
                let v = (t * 255.0).round() as u8;
                [v, v, v]
            }
            Colormap::Cyclic => {
                // full hue sweep at full saturation
                let h = t * 6.0;
                let x = 1.0 - (h % 2.0 - 1.0).abs();
                let (r, g, b) = match h as usize {
                    0 => (1.0, x, 0.0),
                    1 => (x, 1.0, 0.0),
                    2 => (0.0, 1.0, x),
                    3 => (0.0, x, 1.0),
                    4 => (x, 0.0, 1.0),
                    _ => (1.0, 0.0, x),
                };
                [
                    (r * 255.0).round() as u8,
                    (g * 255.0).round() as u8,
                    (b * 255.0).round() as u8,
                ]
            }
            Colormap::Heat => {
                let (r, g, b) = if t < 1.0 / 3.0 {
                    (3.0 * t, 0.0, 0.0)
                } else if t < 2.0 / 3.0 {
                    (1.0, 3.0 * t - 1.0, 0.0)
                } else {
                    (1.0, 1.0, 3.0 * t - 2.0)
                };
                [
                    (r * 255.0).round() as u8,
                    (g * 255.0).round() as u8,
                    (b * 255.0).round() as u8,
                ]
            }
        }
    }
}

/// Normalization actually applied to the render.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mode: &'static str,
    pub min: f64,
    pub max: f64,
}

fn scalar_map(grid: &GridFile, kind: MapKind) -> Result<(Vec<f64>, Vec<bool>, &'static str)> {
    match (&grid.data, kind) {
        (GridData::Complex(v), MapKind::Phase | MapKind::Auto) => {
            let vals = v
                .iter()
                .map(|[re, im]| wrap_2pi((*im as f64).atan2(*re as f64)))
                .collect();
            Ok((vals, vec![true; v.len()], "phase"))
        }
        (GridData::Complex(v), MapKind::Amplitude) => {
            let vals = v
                .iter()
                .map(|[re, im]| ((*re as f64).powi(2) + (*im as f64).powi(2)).sqrt())
                .collect();
            Ok((vals, vec![true; v.len()], "amplitude"))
        }
        (GridData::Real(v), MapKind::Value | MapKind::Auto) => {
            let mask: Vec<bool> = v.iter().map(|x| x.is_finite()).collect();
            let vals = v
                .iter()
                .map(|&x| if x.is_finite() { x as f64 } else { 0.0 })
                .collect();
            Ok((vals, mask, "value"))
        }
        (GridData::Codes(v), MapKind::Intensity | MapKind::Auto) => {
            let vals = v.iter().map(|&c| c as f64).collect();
            Ok((vals, vec![true; v.len()], "intensity"))
        }
        (data, kind) => Err(CliError::Config(format!(
            "map kind {kind:?} does not apply to {} grids",
            data.kind()
        ))),
    }
}

/// Render a grid to PNG. `range` fixes the normalization; otherwise min-max
/// over unmasked pixels is used. Returns the normalization for the sidecar.
pub fn export_png(
    grid: &GridFile,
    kind: MapKind,
    colormap: Colormap,
    range: Option<(f64, f64)>,
    path: &Path,
) -> Result<Normalization> {
    let (values, mask, resolved_kind) = scalar_map(grid, kind)?;
    if !mask.iter().any(|&m| m) {
        return Err(CliError::Data("all pixels are masked; nothing to render".into()));
    }
    let norm = match range {
        Some((lo, hi)) => {
            if !(hi > lo) {
                return Err(CliError::Config("fixed range must have max > min".into()));
            }
            Normalization { mode: "fixed", min: lo, max: hi }
        }
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (v, m) in values.iter().zip(&mask) {
                if *m {
                    lo = lo.min(*v);
                    hi = hi.max(*v);
                }
            }
            if hi == lo {
                // constant image: center it
                lo -= 0.5;
                hi += 0.5;
            }
            Normalization { mode: "minmax", min: lo, max: hi }
        }
    };

    let mut img = image::RgbImage::new(grid.width as u32, grid.height as u32);
    for y in 0..grid.height {
        for x in 0..grid.width {
            let k = y * grid.width + x;
            let pixel = if mask[k] {
                colormap.rgb((values[k] - norm.min) / (norm.max - norm.min))
            } else {
                [0, 0, 0]
            };
            img.put_pixel(x as u32, y as u32, image::Rgb(pixel));
        }
    }
    if let Some(dir) = path.parent() {
        crate::error::io_at(path, std::fs::create_dir_all(dir))?;
    }
    img.save(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;

    let sidecar = path.with_extension("png.norm.txt");
    let text = format!(
        "map={resolved_kind}\ncolormap={colormap:?}\nmode={}\nmin={}\nmax={}\n",
        norm.mode, norm.min, norm.max
    );
    crate::grid::write_atomic(&sidecar, text.as_bytes())?;
    Ok(norm)
}

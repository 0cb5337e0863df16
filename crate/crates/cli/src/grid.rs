//! Bit-exact binary grid format for fields, images, and depth/phase maps.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "SWIGRID\0"
//! 8       2     format version (1)
//! 10      2     dtype: 0 = f32 real, 1 = f32 complex interleaved, 2 = u16
//! 12      4     width (u32)
//! 16      4     height (u32)
//! 20      8     pitch in meters/pixel (f64)
//! 28      2     bit depth (u16 payloads only, else 0)
//! 30      34    reserved, zero
//! 64      ...   payload, row-major
//! ```
//!
//! Values are stored single-precision; `write(read(file))` reproduces the
//! file byte for byte. Depth and phase maps mark invalid pixels with NaN.

use crate::error::{io_at, CliError, Result};
use num_complex::Complex64;
use std::fs;
use std::io::Write;
use std::path::Path;
use switof_core::field::ComplexField;
use switof_core::recon::{DepthMap, OffsetConvention};
use switof_core::sim::{CameraSpec, Interferogram};

pub const MAGIC: &[u8; 8] = b"SWIGRID\0";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 64;

/// Typed payload of a grid file.
#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Real(Vec<f32>),
    Complex(Vec<[f32; 2]>),
    Codes(Vec<u16>),
}

impl GridData {
    fn dtype(&self) -> u16 {
        match self {
            GridData::Real(_) => 0,
            GridData::Complex(_) => 1,
            GridData::Codes(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            GridData::Real(v) => v.len(),
            GridData::Complex(v) => v.len(),
            GridData::Codes(v) => v.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GridData::Real(_) => "f32 real",
            GridData::Complex(_) => "f32 complex",
            GridData::Codes(_) => "u16",
        }
    }
}

/// One grid file in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
    /// Bit depth of u16 payloads; 0 otherwise.
    pub bit_depth: u16,
    pub data: GridData,
}

impl GridFile {
    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.data.len() != self.width * self.height {
            return Err(CliError::Data(format!(
                "payload length {} does not match {}x{}",
                self.data.len(),
                self.width,
                self.height
            )));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.data.dtype().to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&self.pitch.to_le_bytes());
        out.extend_from_slice(&self.bit_depth.to_le_bytes());
        out.resize(HEADER_LEN, 0);
        match &self.data {
            GridData::Real(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            GridData::Complex(v) => {
                for [re, im] in v {
                    out.extend_from_slice(&re.to_le_bytes());
                    out.extend_from_slice(&im.to_le_bytes());
                }
            }
            GridData::Codes(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(CliError::Data(format!(
                "grid file truncated: {} bytes, header needs {HEADER_LEN}",
                bytes.len()
            )));
        }
        if &bytes[0..8] != MAGIC {
            return Err(CliError::Data("bad magic at byte offset 0".into()));
        }
        let version = u16::from_le_bytes(bytes[8..10].try_into().unwrap());
        if version != VERSION {
            return Err(CliError::Data(format!("unsupported grid version {version}")));
        }
        let dtype = u16::from_le_bytes(bytes[10..12].try_into().unwrap());
        let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let pitch = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let bit_depth = u16::from_le_bytes(bytes[28..30].try_into().unwrap());
        let n = width * height;
        let elem = match dtype {
            0 => 4,
            1 => 8,
            2 => 2,
            other => {
                return Err(CliError::Data(format!("unknown dtype {other} at byte offset 10")))
            }
        };
        let expected = HEADER_LEN + n * elem;
        if bytes.len() != expected {
            return Err(CliError::Data(format!(
                "grid payload truncated at byte offset {}: expected {expected} bytes, got {}",
                bytes.len().min(expected),
                bytes.len()
            )));
        }
        let body = &bytes[HEADER_LEN..];
        let data = match dtype {
            0 => GridData::Real(
                body.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            1 => GridData::Complex(
                body.chunks_exact(8)
                    .map(|c| {
                        [
                            f32::from_le_bytes(c[0..4].try_into().unwrap()),
                            f32::from_le_bytes(c[4..8].try_into().unwrap()),
                        ]
                    })
                    .collect(),
            ),
            _ => GridData::Codes(
                body.chunks_exact(2)
                    .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Ok(GridFile { width, height, pitch, bit_depth, data })
    }
}

/// Write a file atomically: stage in a sibling temp file, then rename, so a
/// parallel reader never sees a partial write.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    io_at(path, fs::create_dir_all(dir))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("grid"),
        std::process::id()
    ));
    {
        let mut f = io_at(&tmp, fs::File::create(&tmp))?;
        io_at(&tmp, f.write_all(bytes))?;
        io_at(&tmp, f.sync_all())?;
    }
    io_at(path, fs::rename(&tmp, path))
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    let bytes = io_at(path, fs::read(path))?;
    GridFile::decode(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_grid(path: &Path, grid: &GridFile) -> Result<()> {
    write_atomic(path, &grid.encode()?)
}

pub fn write_field(path: &Path, field: &ComplexField) -> Result<()> {
    let data = field
        .data()
        .iter()
        .map(|c| [c.re as f32, c.im as f32])
        .collect();
    write_grid(
        path,
        &GridFile {
            width: field.width(),
            height: field.height(),
            pitch: field.pitch(),
            bit_depth: 0,
            data: GridData::Complex(data),
        },
    )
}

pub fn read_field(path: &Path) -> Result<ComplexField> {
    let grid = read_grid(path)?;
    match grid.data {
        GridData::Complex(v) => {
            let data = v
                .iter()
                .map(|[re, im]| Complex64::new(*re as f64, *im as f64))
                .collect();
            ComplexField::new(grid.width, grid.height, grid.pitch, data)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        }
        other => Err(CliError::Data(format!(
            "{}: expected a complex field grid, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

pub fn write_interferogram(path: &Path, img: &Interferogram) -> Result<()> {
    let data = img.data.iter().map(|&v| v as u16).collect();
    write_grid(
        path,
        &GridFile {
            width: img.width,
            height: img.height,
            pitch: img.pitch,
            bit_depth: img.camera.bit_depth as u16,
            data: GridData::Codes(data),
        },
    )
}

/// Read an interferogram. Only the bit depth survives serialization; the
/// other sensor parameters are not needed downstream and default to a
/// noiseless description of the stored codes.
pub fn read_interferogram(path: &Path) -> Result<Interferogram> {
    let grid = read_grid(path)?;
    match grid.data {
        GridData::Codes(v) => {
            let bit_depth = if grid.bit_depth == 0 { 16 } else { grid.bit_depth as u32 };
            let camera = CameraSpec::new(bit_depth, ((1u32 << bit_depth) - 1) as f64, 0.0, 0)
                .map_err(CliError::from)?;
            Ok(Interferogram {
                width: grid.width,
                height: grid.height,
                pitch: grid.pitch,
                data: v.iter().map(|&c| c as f64).collect(),
                camera,
            })
        }
        other => Err(CliError::Data(format!(
            "{}: expected a u16 interferogram grid, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

/// Depth maps serialize as f32 with NaN marking invalid pixels.
pub fn write_depth_map(path: &Path, depth: &DepthMap) -> Result<()> {
    let data = depth
        .z
        .iter()
        .zip(&depth.mask)
        .map(|(&z, &m)| if m { z as f32 } else { f32::NAN })
        .collect();
    write_grid(
        path,
        &GridFile {
            width: depth.width,
            height: depth.height,
            pitch: depth.pitch,
            bit_depth: 0,
            data: GridData::Real(data),
        },
    )
}

pub fn read_depth_map(path: &Path) -> Result<DepthMap> {
    let grid = read_grid(path)?;
    match grid.data {
        GridData::Real(v) => {
            let mask: Vec<bool> = v.iter().map(|x| x.is_finite()).collect();
            let z = v
                .iter()
                .map(|&x| if x.is_finite() { x as f64 } else { 0.0 })
                .collect();
            Ok(DepthMap {
                width: grid.width,
                height: grid.height,
                pitch: grid.pitch,
                z,
                mask,
                convention: OffsetConvention::Raw,
            })
        }
        other => Err(CliError::Data(format!(
            "{}: expected an f32 depth grid, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

/// Real-valued maps (phase, amplitude, ground truth) share the depth-map
/// encoding.
pub fn write_real_map(
    path: &Path,
    width: usize,
    height: usize,
    pitch: f64,
    values: &[f64],
    mask: Option<&[bool]>,
) -> Result<()> {
    let data = values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if mask.map_or(true, |m| m[k]) {
                v as f32
            } else {
                f32::NAN
            }
        })
        .collect();
    write_grid(
        path,
        &GridFile { width, height, pitch, bit_depth: 0, data: GridData::Real(data) },
    )
}

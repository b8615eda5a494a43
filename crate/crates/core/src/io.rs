//! `FSEIMG01` magnitude image files.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `FSEIMG01`              |
//! | 8      | 4    | `ny` (u32)                    |
//! | 12     | 4    | `nx` (u32)                    |
//! | 16     | 4    | dtype code, `1` = f32         |
//! | 20     | 4    | reserved, zero                |
//! | 24     | 4·ny·nx | row-major f32 payload      |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{ComplexImage, RealImage};

pub const MAGIC: &[u8; 8] = b"FSEIMG01";
pub const HEADER_LEN: usize = 24;
pub const DTYPE_F32: u32 = 1;

/// Single-precision magnitude image as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeImage {
    ny: usize,
    nx: usize,
    data: Vec<f32>,
}

impl MagnitudeImage {
    pub fn new(ny: usize, nx: usize, data: Vec<f32>) -> Result<Self> {
        if ny == 0 || nx == 0 || ny * nx != data.len() {
            return Err(Error::invalid(
                "image",
                format!("{} values do not fill {ny}x{nx}", data.len()),
            ));
        }
        if ny > u32::MAX as usize || nx > u32::MAX as usize {
            return Err(Error::invalid("image", "dimensions exceed u32"));
        }
        Ok(Self { ny, nx, data })
    }

    pub fn from_complex(img: &ComplexImage) -> Self {
        Self {
            ny: img.ny(),
            nx: img.nx(),
            data: img.data().iter().map(|z| z.norm() as f32).collect(),
        }
    }

    pub fn from_real(img: &RealImage) -> Self {
        Self {
            ny: img.ny(),
            nx: img.nx(),
            data: img.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Widened to f64 for metric computation.
    pub fn to_real(&self) -> RealImage {
        RealImage::new(self.ny, self.nx, self.data.iter().map(|&v| f64::from(v)).collect())
            .expect("shape checked at construction")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.ny as u32).to_le_bytes());
        out.extend_from_slice(&(self.nx as u32).to_le_bytes());
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fail(format!("truncated header: {} bytes", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(fail("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let (ny, nx, dtype, reserved) = (word(8) as usize, word(12) as usize, word(16), word(20));
        if dtype != DTYPE_F32 {
            return Err(fail(format!("unsupported dtype code {dtype}")));
        }
        if reserved != 0 {
            return Err(fail(format!("reserved field is {reserved}, expected 0")));
        }
        let expected = ny
            .checked_mul(nx)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| fail("dimensions overflow".into()))?;
        if bytes.len() != expected {
            return Err(fail(format!("payload length {} != expected {expected}", bytes.len())));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(ny, nx, data).map_err(|e| fail(e.to_string()))
    }
}

pub fn export_image(img: &MagnitudeImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, img.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<MagnitudeImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    MagnitudeImage::from_bytes(&bytes, path)
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

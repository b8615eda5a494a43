//! Complex image / k-space containers and the Fourier, rigid-motion and
//! noise operators that act on them.

mod fft;
mod noise;
mod rigid;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use fft::{fft2c, ifft2c};
pub use noise::{add_noise, derive_seed};
pub use rigid::{apply_rigid, RigidTransform};

macro_rules! complex_grid {
    ($name:ident, $what:literal) => {
        impl $name {
            /// Wraps a row-major buffer of `ny * nx` finite values.
            pub fn new(ny: usize, nx: usize, data: Vec<Complex64>) -> Result<Self> {
                check_len(ny, nx, data.len())?;
                if let Some(index) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                    return Err(Error::NonFinite { what: $what, index });
                }
                Ok(Self { ny, nx, data })
            }

            pub fn zeros(ny: usize, nx: usize) -> Self {
                Self {
                    ny,
                    nx,
                    data: vec![Complex64::new(0.0, 0.0); ny * nx],
                }
            }

            pub fn from_fn(ny: usize, nx: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
                let mut data = Vec::with_capacity(ny * nx);
                for y in 0..ny {
                    for x in 0..nx {
                        data.push(f(y, x));
                    }
                }
                Self { ny, nx, data }
            }

            pub fn ny(&self) -> usize {
                self.ny
            }

            pub fn nx(&self) -> usize {
                self.nx
            }

            pub fn shape(&self) -> (usize, usize) {
                (self.ny, self.nx)
            }

            pub fn data(&self) -> &[Complex64] {
                &self.data
            }

            /// Mutable view of the buffer. Operators re-validate finiteness.
            pub fn data_mut(&mut self) -> &mut [Complex64] {
                &mut self.data
            }

            pub fn into_data(self) -> Vec<Complex64> {
                self.data
            }

            pub fn get(&self, y: usize, x: usize) -> Complex64 {
                self.data[y * self.nx + x]
            }

            pub fn row(&self, y: usize) -> &[Complex64] {
                &self.data[y * self.nx..(y + 1) * self.nx]
            }

            pub fn row_mut(&mut self, y: usize) -> &mut [Complex64] {
                &mut self.data[y * self.nx..(y + 1) * self.nx]
            }

            /// Sum of squared moduli.
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|z| z.norm_sqr()).sum()
            }

            pub fn magnitude(&self) -> RealImage {
                RealImage {
                    ny: self.ny,
                    nx: self.nx,
                    data: self.data.iter().map(|z| z.norm()).collect(),
                }
            }

            pub(crate) fn ensure_finite(&self) -> Result<()> {
                match self.data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                    Some(index) => Err(Error::NonFinite { what: $what, index }),
                    None => Ok(()),
                }
            }
        }
    };
}

/// Image-domain complex array, row-major `ny x nx` with rows along phase encode.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    ny: usize,
    nx: usize,
    data: Vec<Complex64>,
}

/// Frequency-domain complex array with DC at `(ny / 2, nx / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpace {
    ny: usize,
    nx: usize,
    data: Vec<Complex64>,
}

complex_grid!(ComplexImage, "image");
complex_grid!(KSpace, "k-space");

impl ComplexImage {
    pub fn from_real(img: &RealImage) -> Self {
        Self {
            ny: img.ny,
            nx: img.nx,
            data: img.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Real-valued row-major array. Used for parameter maps and magnitude images.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    ny: usize,
    nx: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(ny: usize, nx: usize, data: Vec<f64>) -> Result<Self> {
        check_len(ny, nx, data.len())?;
        Ok(Self { ny, nx, data })
    }

    pub fn zeros(ny: usize, nx: usize) -> Self {
        Self::filled(ny, nx, 0.0)
    }

    pub fn filled(ny: usize, nx: usize, value: f64) -> Self {
        Self {
            ny,
            nx,
            data: vec![value; ny * nx],
        }
    }

    pub fn from_fn(ny: usize, nx: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(ny * nx);
        for y in 0..ny {
            for x in 0..nx {
                data.push(f(y, x));
            }
        }
        Self { ny, nx, data }
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.nx + x]
    }

    pub fn set(&mut self, y: usize, x: usize, value: f64) {
        self.data[y * self.nx + x] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            ny: self.ny,
            nx: self.nx,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn check_len(ny: usize, nx: usize, len: usize) -> Result<()> {
    if ny == 0 || nx == 0 {
        return Err(Error::invalid("shape", format!("dimensions must be positive, got {ny}x{nx}")));
    }
    if ny * nx != len {
        return Err(Error::invalid(
            "data",
            format!("buffer of length {len} does not match {ny}x{nx}"),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}

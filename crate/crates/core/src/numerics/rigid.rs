use std::f64::consts::PI;

use num_complex::Complex64;

use super::{fft2c, ifft2c, ComplexImage};
use crate::error::{Error, Result};

/// In-plane rigid motion state.
///
/// Positive `rotation_deg` turns image content counterclockwise as displayed
/// with row 0 at the top. Shifts move content toward larger row / column indices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform {
    pub rotation_deg: f64,
    pub shift_y: f64,
    pub shift_x: f64,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation_deg: 0.0,
        shift_y: 0.0,
        shift_x: 0.0,
    };

    pub fn rotation(rotation_deg: f64) -> Self {
        Self {
            rotation_deg,
            ..Self::IDENTITY
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.shift_y == 0.0 && self.shift_x == 0.0
    }

    pub fn inverse_rotation(&self) -> Self {
        Self::rotation(-self.rotation_deg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rotation_deg.is_finite() && self.shift_y.is_finite() && self.shift_x.is_finite()) {
            return Err(Error::invalid("transform", format!("non-finite component in {self:?}")));
        }
        Ok(())
    }
}

/// Rotates `img` about its geometric center with bilinear interpolation and
/// zero fill, then translates it through a linear phase ramp in k-space
/// (circular at the field-of-view edge).
pub fn apply_rigid(img: &ComplexImage, t: &RigidTransform) -> Result<ComplexImage> {
    img.ensure_finite()?;
    t.validate()?;
    if t.is_identity() {
        return Ok(img.clone());
    }
    let rotated = if t.rotation_deg == 0.0 {
        img.clone()
    } else {
        rotate_bilinear(img, t.rotation_deg)
    };
    if t.shift_y == 0.0 && t.shift_x == 0.0 {
        return Ok(rotated);
    }
    translate(&rotated, t.shift_y, t.shift_x)
}

/// cos/sin with exact values at multiples of 90 degrees.
fn cos_sin_deg(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter == quarter.round() {
        match (quarter.round() as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let r = deg * PI / 180.0;
        (r.cos(), r.sin())
    }
}

fn rotate_bilinear(img: &ComplexImage, deg: f64) -> ComplexImage {
    let (ny, nx) = img.shape();
    let (c, s) = cos_sin_deg(deg);
    let cy = (ny as f64 - 1.0) / 2.0;
    let cx = (nx as f64 - 1.0) / 2.0;
    let src = img.data();
    let zero = Complex64::new(0.0, 0.0);
    let fetch = |y: isize, x: isize| -> Complex64 {
        if y < 0 || x < 0 || y >= ny as isize || x >= nx as isize {
            zero
        } else {
            src[y as usize * nx + x as usize]
        }
    };

    let mut out = Vec::with_capacity(ny * nx);
    for y in 0..ny {
        let dy = y as f64 - cy;
        for x in 0..nx {
            let dx = x as f64 - cx;
            // inverse map: output pixel pulls from the source rotated by -deg
            let sx = cx + c * dx - s * dy;
            let sy = cy + s * dx + c * dy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            let mut v = zero;
            if fx == 0.0 && fy == 0.0 {
                v = fetch(y0, x0);
            } else if y0 >= -1 && x0 >= -1 && y0 < ny as isize && x0 < nx as isize {
                v = fetch(y0, x0) * ((1.0 - fy) * (1.0 - fx))
                    + fetch(y0, x0 + 1) * ((1.0 - fy) * fx)
                    + fetch(y0 + 1, x0) * (fy * (1.0 - fx))
                    + fetch(y0 + 1, x0 + 1) * (fy * fx);
            }
            out.push(v);
        }
    }
    ComplexImage { ny, nx, data: out }
}

fn translate(img: &ComplexImage, shift_y: f64, shift_x: f64) -> Result<ComplexImage> {
    let (ny, nx) = img.shape();
    let mut k = fft2c(img)?;
    let ramp_x: Vec<Complex64> = (0..nx)
        .map(|kx| Complex64::from_polar(1.0, -2.0 * PI * signed_freq(kx, nx) * shift_x / nx as f64))
        .collect();
    for ky in 0..ny {
        let ry = Complex64::from_polar(1.0, -2.0 * PI * signed_freq(ky, ny) * shift_y / ny as f64);
        for (z, rx) in k.row_mut(ky).iter_mut().zip(&ramp_x) {
            *z *= ry * rx;
        }
    }
    ifft2c(&k)
}

/// Frequency of centered index `k`, in `[-n/2, n/2)`.
fn signed_freq(k: usize, n: usize) -> f64 {
    k as f64 - (n / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_image(ny: usize, nx: usize, seed: u64) -> ComplexImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(ny, nx, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn rel_err(a: &ComplexImage, b: &ComplexImage) -> f64 {
        let num: f64 = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).norm_sqr()).sum();
        (num / b.energy()).sqrt()
    }

    #[test]
    fn zero_transform_is_bitwise_identity() {
        let img = random_image(7, 9, 1);
        let out = apply_rigid(&img, &RigidTransform::IDENTITY).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn quarter_turn_on_odd_grid_is_index_permutation() {
        let n = 5;
        let img = random_image(n, n, 2);
        let out = apply_rigid(&img, &RigidTransform::rotation(90.0)).unwrap();
        // Counterclockwise on screen: content at (y, x) moves to (n-1-x, y).
        for y in 0..n {
            for x in 0..n {
                assert_eq!(out.get(n - 1 - x, y), img.get(y, x));
            }
        }
        let half = apply_rigid(&img, &RigidTransform::rotation(180.0)).unwrap();
        for y in 0..n {
            for x in 0..n {
                assert_eq!(half.get(n - 1 - y, n - 1 - x), img.get(y, x));
            }
        }
        let back = apply_rigid(&out, &RigidTransform::rotation(-90.0)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn integer_shift_is_circular_roll() {
        let (ny, nx) = (8, 10);
        let img = ComplexImage::from_fn(ny, nx, |y, x| {
            let p = 2.0 * PI * x as f64 / nx as f64;
            Complex64::new(p.sin() + y as f64, (2.0 * p).cos())
        });
        let t = RigidTransform {
            shift_x: 3.0,
            ..RigidTransform::IDENTITY
        };
        let out = apply_rigid(&img, &t).unwrap();
        for y in 0..ny {
            for x in 0..nx {
                let rolled = img.get(y, (x + nx - 3) % nx);
                assert!((out.get(y, x) - rolled).norm() < 1e-8);
            }
        }
        let t = RigidTransform {
            shift_y: -2.0,
            ..RigidTransform::IDENTITY
        };
        let out = apply_rigid(&img, &t).unwrap();
        for y in 0..ny {
            for x in 0..nx {
                assert!((out.get(y, x) - img.get((y + 2) % ny, x)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn rotation_round_trip_on_smooth_image() {
        let n = 64;
        let c = (n as f64 - 1.0) / 2.0;
        let img = ComplexImage::from_fn(n, n, |y, x| {
            let r2 = ((y as f64 - c).powi(2) + (x as f64 - c).powi(2)) / (n as f64 * 0.2).powi(2);
            Complex64::new((-r2).exp() * (1.0 + 0.3 * (x as f64 / 9.0).sin()), 0.0)
        });
        for deg in [3.0, -7.5, 25.0] {
            let t = RigidTransform::rotation(deg);
            let back = apply_rigid(&apply_rigid(&img, &t).unwrap(), &t.inverse_rotation()).unwrap();
            assert!(rel_err(&back, &img) < 5e-2, "deg {deg}: {}", rel_err(&back, &img));
        }
    }

    #[test]
    fn rejects_non_finite_transform() {
        let img = random_image(4, 4, 3);
        assert!(apply_rigid(&img, &RigidTransform::rotation(f64::NAN)).is_err());
    }
}

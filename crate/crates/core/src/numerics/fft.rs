use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::{ComplexImage, KSpace};
use crate::error::Result;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Centered, orthonormal 2D DFT. The image center `(ny / 2, nx / 2)` is the
/// spatial origin and the DC coefficient lands at the same index.
pub fn fft2c(img: &ComplexImage) -> Result<KSpace> {
    img.ensure_finite()?;
    let (ny, nx) = img.shape();
    let data = centered_fft(ny, nx, img.data(), FftDirection::Forward);
    Ok(KSpace { ny, nx, data })
}

/// Inverse of [`fft2c`].
pub fn ifft2c(ksp: &KSpace) -> Result<ComplexImage> {
    ksp.ensure_finite()?;
    let (ny, nx) = ksp.shape();
    let data = centered_fft(ny, nx, ksp.data(), FftDirection::Inverse);
    Ok(ComplexImage { ny, nx, data })
}

fn centered_fft(ny: usize, nx: usize, src: &[Complex64], direction: FftDirection) -> Vec<Complex64> {
    let n = ny * nx;
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(nx, direction), p.plan_fft(ny, direction))
    });

    // ifftshift on the way in
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for y in 0..ny {
        let sy = (y + ny / 2) % ny;
        let src_row = &src[sy * nx..(sy + 1) * nx];
        let dst_row = &mut buf[y * nx..(y + 1) * nx];
        let split = nx - nx / 2;
        dst_row[..split].copy_from_slice(&src_row[nx / 2..]);
        dst_row[split..].copy_from_slice(&src_row[..nx / 2]);
    }
    row_fft.process(&mut buf);

    // columns become contiguous after transposing
    let mut cols = vec![Complex64::new(0.0, 0.0); n];
    for y in 0..ny {
        for x in 0..nx {
            cols[x * ny + y] = buf[y * nx + x];
        }
    }
    col_fft.process(&mut cols);

    // fftshift + transpose back + orthonormal scale
    let scale = 1.0 / (n as f64).sqrt();
    for y in 0..ny {
        let sy = (y + ny - ny / 2) % ny;
        for x in 0..nx {
            let sx = (x + nx - nx / 2) % nx;
            buf[y * nx + x] = cols[sx * ny + sy] * scale;
        }
    }
    buf
}

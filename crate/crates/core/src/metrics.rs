//! SSIM and NRMSE on magnitude images.

use crate::error::{Error, Result};
use crate::numerics::{ensure_shape, RealImage};

/// Side of the square SSIM window.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub id: String,
    pub ssim: f64,
    pub nrmse: f64,
}

impl MetricReport {
    pub fn compute(id: impl Into<String>, reference: &RealImage, estimate: &RealImage) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            ssim: ssim(reference, estimate, None)?,
            nrmse: nrmse(reference, estimate)?,
        })
    }
}

/// `||est - ref|| / ||ref||`.
pub fn nrmse(reference: &RealImage, estimate: &RealImage) -> Result<f64> {
    ensure_shape(reference.shape(), estimate.shape())?;
    let ref_sq: f64 = reference.data().iter().map(|v| v * v).sum();
    if ref_sq == 0.0 {
        return Err(Error::invalid("reference", "identically zero"));
    }
    let err_sq: f64 = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(r, e)| (e - r) * (e - r))
        .sum();
    Ok((err_sq / ref_sq).sqrt())
}

/// Mean SSIM over every 7x7 window lying fully inside the image.
///
/// `dynamic_range` defaults to `max(ref) - min(ref)`. Local (co)variances use
/// the unbiased `n - 1` normalization.
pub fn ssim(reference: &RealImage, estimate: &RealImage, dynamic_range: Option<f64>) -> Result<f64> {
    ensure_shape(reference.shape(), estimate.shape())?;
    let (ny, nx) = reference.shape();
    let w = SSIM_WINDOW;
    if ny < w || nx < w {
        return Err(Error::invalid(
            "image",
            format!("{ny}x{nx} is smaller than the {w}x{w} SSIM window"),
        ));
    }
    let range = match dynamic_range {
        Some(l) => l,
        None => {
            let (lo, hi) = reference
                .data()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        }
    };
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::invalid("dynamic_range", format!("must be > 0, got {range}")));
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);

    let a = reference.data();
    let b = estimate.data();
    // Window sums from summed-area tables, one per moment.
    let sa = SummedArea::new(ny, nx, |i| a[i]);
    let sb = SummedArea::new(ny, nx, |i| b[i]);
    let saa = SummedArea::new(ny, nx, |i| a[i] * a[i]);
    let sbb = SummedArea::new(ny, nx, |i| b[i] * b[i]);
    let sab = SummedArea::new(ny, nx, |i| a[i] * b[i]);

    let np = (w * w) as f64;
    let cov_norm = np / (np - 1.0);
    let mut total = 0.0;
    for y in 0..=ny - w {
        for x in 0..=nx - w {
            let mu_a = sa.window(y, x, w) / np;
            let mu_b = sb.window(y, x, w) / np;
            let var_a = cov_norm * (saa.window(y, x, w) / np - mu_a * mu_a);
            let var_b = cov_norm * (sbb.window(y, x, w) / np - mu_b * mu_b);
            let cov = cov_norm * (sab.window(y, x, w) / np - mu_a * mu_b);
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    Ok(total / ((ny - w + 1) * (nx - w + 1)) as f64)
}

struct SummedArea {
    nx1: usize,
    table: Vec<f64>,
}

impl SummedArea {
    fn new(ny: usize, nx: usize, f: impl Fn(usize) -> f64) -> Self {
        let nx1 = nx + 1;
        let mut table = vec![0.0; (ny + 1) * nx1];
        for y in 0..ny {
            let mut row = 0.0;
            for x in 0..nx {
                row += f(y * nx + x);
                table[(y + 1) * nx1 + x + 1] = table[y * nx1 + x + 1] + row;
            }
        }
        Self { nx1, table }
    }

    fn window(&self, y: usize, x: usize, w: usize) -> f64 {
        let t = &self.table;
        let n = self.nx1;
        t[(y + w) * n + x + w] - t[y * n + x + w] - t[(y + w) * n + x] + t[y * n + x]
    }
}

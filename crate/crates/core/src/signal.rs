//! Transverse-magnetization decay along the echo train.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{ensure_shape, ComplexImage, RealImage};

/// Per-pixel tissue parameters. Relaxation times are in milliseconds.
///
/// Background pixels have `pd == 0` and may carry `t2 == 0` as a sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMaps {
    pd: RealImage,
    t2: RealImage,
    t1: Option<RealImage>,
}

impl ParameterMaps {
    pub fn new(pd: RealImage, t2: RealImage, t1: Option<RealImage>) -> Result<Self> {
        ensure_shape(pd.shape(), t2.shape())?;
        if let Some(t1) = &t1 {
            ensure_shape(pd.shape(), t1.shape())?;
        }
        for (i, &p) in pd.data().iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::invalid("pd", format!("must be finite and >= 0 (index {i}, value {p})")));
            }
            if p > 0.0 {
                let t = t2.data()[i];
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::invalid("t2", format!("must be > 0 where pd > 0 (index {i}, value {t})")));
                }
                if let Some(t1) = &t1 {
                    let t = t1.data()[i];
                    if !(t.is_finite() && t > 0.0) {
                        return Err(Error::invalid("t1", format!("must be > 0 where pd > 0 (index {i}, value {t})")));
                    }
                }
            }
        }
        Ok(Self { pd, t2, t1 })
    }

    pub fn pd(&self) -> &RealImage {
        &self.pd
    }

    pub fn t2(&self) -> &RealImage {
        &self.t2
    }

    pub fn t1(&self) -> Option<&RealImage> {
        self.t1.as_ref()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pd.shape()
    }

    /// Returns a copy with proton density multiplied by `alpha >= 0`.
    pub fn scaled_pd(&self, alpha: f64) -> Result<Self> {
        Self::new(self.pd.map(|v| v * alpha), self.t2.clone(), self.t1.clone())
    }
}

/// Echo images of one train together with their echo times.
#[derive(Debug, Clone)]
pub struct EchoStack {
    echoes: Vec<ComplexImage>,
    te_ms: Vec<f64>,
}

impl EchoStack {
    pub fn echoes(&self) -> &[ComplexImage] {
        &self.echoes
    }

    pub fn te_ms(&self) -> &[f64] {
        &self.te_ms
    }

    pub fn len(&self) -> usize {
        self.echoes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.echoes.is_empty()
    }
}

/// `pd * exp(-te / t2)` per pixel; zero wherever `pd == 0`.
pub fn decay_image(maps: &ParameterMaps, te_ms: f64) -> Result<ComplexImage> {
    if !(te_ms > 0.0 && te_ms.is_finite()) {
        return Err(Error::invalid("te_ms", format!("must be > 0, got {te_ms}")));
    }
    let (ny, nx) = maps.shape();
    let pd = maps.pd.data();
    let t2 = maps.t2.data();
    let data = pd
        .iter()
        .zip(t2)
        .map(|(&p, &t)| {
            if p == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(p * (-te_ms / t).exp(), 0.0)
            }
        })
        .collect();
    ComplexImage::new(ny, nx, data)
}

/// Echo `e` (0-based) is evaluated at `te = (e + 1) * esp_ms`.
pub fn echo_stack(maps: &ParameterMaps, etl: usize, esp_ms: f64) -> Result<EchoStack> {
    if !(1..=64).contains(&etl) {
        return Err(Error::invalid("etl", format!("must be in 1..=64, got {etl}")));
    }
    if !(esp_ms > 0.0 && esp_ms.is_finite()) {
        return Err(Error::invalid("esp_ms", format!("must be > 0, got {esp_ms}")));
    }
    let te_ms: Vec<f64> = (1..=etl).map(|e| e as f64 * esp_ms).collect();
    let echoes = te_ms
        .iter()
        .map(|&te| decay_image(maps, te))
        .collect::<Result<Vec<_>>>()?;
    Ok(EchoStack { echoes, te_ms })
}

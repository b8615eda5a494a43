//! Procedural brain-like parameter maps and the MDME round trip that turns
//! them into fitted maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mdme::{match_maps, MdmeDictionary, MdmeVolume};
use crate::numerics::RealImage;
use crate::signal::ParameterMaps;

/// Tissue class with `(pd, t1 [ms], t2 [ms])`.
///
/// Values are plausible 3 T brain figures chosen to lie on the reference
/// dictionary grid (t1 on 100 + 20k, t2 on 10 + 2k), not measured data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tissue {
    pub name: &'static str,
    pub pd: f64,
    pub t1: f64,
    pub t2: f64,
}

pub const FAT: Tissue = Tissue { name: "fat", pd: 0.90, t1: 380.0, t2: 84.0 };
pub const GREY_MATTER: Tissue = Tissue { name: "gm", pd: 0.82, t1: 1300.0, t2: 100.0 };
pub const WHITE_MATTER: Tissue = Tissue { name: "wm", pd: 0.70, t1: 800.0, t2: 70.0 };
pub const CSF: Tissue = Tissue { name: "csf", pd: 1.00, t1: 4000.0, t2: 800.0 };
pub const DEEP_GREY: Tissue = Tissue { name: "deep_gm", pd: 0.78, t1: 1100.0, t2: 88.0 };
pub const LESION: Tissue = Tissue { name: "lesion", pd: 0.86, t1: 1500.0, t2: 120.0 };

pub const TISSUES: [Tissue; 6] = [FAT, GREY_MATTER, WHITE_MATTER, CSF, DEEP_GREY, LESION];

pub const MIN_PHANTOM_SIZE: usize = 32;

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cu: f64,
    cv: f64,
    au: f64,
    av: f64,
    angle: f64,
}

impl Ellipse {
    fn contains(&self, u: f64, v: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (du, dv) = (u - self.cu, v - self.cv);
        let pu = c * du + s * dv;
        let pv = -s * du + c * dv;
        (pu / self.au).powi(2) + (pv / self.av).powi(2) <= 1.0
    }

    fn scaled(&self, k: f64) -> Self {
        Self {
            au: self.au * k,
            av: self.av * k,
            ..*self
        }
    }
}

/// Random head-like phantom: fat shell, cortex, white matter, ventricles,
/// deep grey nuclei and a few lesions, painted in that order. Pixels outside
/// the outer ellipse are background (`pd = t1 = t2 = 0`).
pub fn generate_phantom(ny: usize, nx: usize, seed: u64) -> Result<ParameterMaps> {
    if ny < MIN_PHANTOM_SIZE || nx < MIN_PHANTOM_SIZE {
        return Err(Error::invalid(
            "phantom",
            format!("need at least {MIN_PHANTOM_SIZE}x{MIN_PHANTOM_SIZE}, got {ny}x{nx}"),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let mut j = |scale: f64| scale * jitter.sample(&mut rng);

    let head = Ellipse {
        cu: j(0.02),
        cv: j(0.02),
        au: 0.74 + j(0.03),
        av: 0.88 + j(0.03),
        angle: j(0.12),
    };
    let mut layers: Vec<(Ellipse, Tissue)> = vec![
        (head.scaled(0.90), GREY_MATTER),
        (head.scaled(0.72), WHITE_MATTER),
    ];
    for side in [-1.0, 1.0] {
        layers.push((
            Ellipse {
                cu: head.cu + side * (0.11 + j(0.015)),
                cv: head.cv - 0.05 + j(0.02),
                au: 0.06 + j(0.01).abs(),
                av: 0.22 + j(0.03),
                angle: head.angle + side * (0.25 + j(0.05)),
            },
            CSF,
        ));
        layers.push((
            Ellipse {
                cu: head.cu + side * (0.27 + j(0.02)),
                cv: head.cv + 0.12 + j(0.02),
                au: 0.07 + j(0.01).abs(),
                av: 0.11 + j(0.01).abs(),
                angle: head.angle + j(0.2),
            },
            DEEP_GREY,
        ));
    }
    let n_lesions = rng.random_range(0..=3);
    for _ in 0..n_lesions {
        let r = 0.45 * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let tissue = if rng.random_bool(0.7) { LESION } else { CSF };
        layers.push((
            Ellipse {
                cu: head.cu + r * phi.cos() * head.au,
                cv: head.cv + r * phi.sin() * head.av,
                au: rng.random_range(0.03..0.08),
                av: rng.random_range(0.03..0.08),
                angle: rng.random_range(0.0..std::f64::consts::PI),
            },
            tissue,
        ));
    }

    let n = ny * nx;
    let (mut pd, mut t1, mut t2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let cy = (ny as f64 - 1.0) / 2.0;
    let cx = (nx as f64 - 1.0) / 2.0;
    for y in 0..ny {
        let v = (y as f64 - cy) / (ny as f64 / 2.0);
        for x in 0..nx {
            let u = (x as f64 - cx) / (nx as f64 / 2.0);
            if !head.contains(u, v) {
                continue;
            }
            let mut tissue = FAT;
            for (e, t) in &layers {
                if e.contains(u, v) {
                    tissue = *t;
                }
            }
            let i = y * nx + x;
            pd[i] = tissue.pd;
            t1[i] = tissue.t1;
            t2[i] = tissue.t2;
        }
    }
    ParameterMaps::new(
        RealImage::new(ny, nx, pd)?,
        RealImage::new(ny, nx, t2)?,
        Some(RealImage::new(ny, nx, t1)?),
    )
}

/// Forward MDME simulation of `maps` with optional additive real Gaussian
/// noise of standard deviation `sigma` on every measurement.
pub fn synthesize_mdme(maps: &ParameterMaps, td_ms: &[f64], te_ms: &[f64], sigma: f64, seed: u64) -> Result<MdmeVolume> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be >= 0, got {sigma}")));
    }
    let mut vol = MdmeVolume::simulate(maps, td_ms, te_ms)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for v in vol.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(vol)
}

/// Fits T1 / T2 / PD maps to an MDME volume by dictionary matching.
pub fn phantom_from_mdme(volume: &MdmeVolume, dict: &MdmeDictionary) -> Result<ParameterMaps> {
    match_maps(volume, dict)
}

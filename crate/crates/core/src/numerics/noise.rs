use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::KSpace;
use crate::error::{Error, Result};

/// Adds circular complex white Gaussian noise of total variance `sigma^2`.
///
/// The stream comes from ChaCha20 keyed by `seed`, so outputs are reproducible
/// across platforms and independent across seeds.
pub fn add_noise(ksp: &KSpace, sigma: f64, seed: u64) -> Result<KSpace> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    ksp.ensure_finite()?;
    let mut out = ksp.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = sigma / std::f64::consts::SQRT_2;
    for z in out.data_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        z.re += scale * re;
        z.im += scale * im;
    }
    Ok(out)
}

/// Splits a base seed into independent sub-seeds (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::radio::Fingerprint;

/// Log-normal power noise: additive Gaussian in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation in dB.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// Perturbs every non-empty bin by an independent `N(0, sigma²)` dB draw,
/// visiting bins in row-major order. Empty bins stay empty.
pub fn apply_noise<R: Rng + ?Sized>(
    fp: &Fingerprint,
    noise: &NoiseModel,
    rng: &mut R,
) -> Fingerprint {
    let mut out = fp.clone();
    if noise.sigma == 0.0 {
        return out;
    }
    for v in out.values_mut().iter_mut().filter(|v| !v.is_nan()) {
        let z: f64 = StandardNormal.sample(rng);
        *v = (*v as f64 + noise.sigma * z) as f32;
    }
    out
}

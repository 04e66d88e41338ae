//! Image-domain CT noise from photon statistics.
//!
//! Each voxel's HU is mapped to a linear attenuation, the Beer-Lambert
//! transmitted count `lambda = I0 * exp(-mu * L)` is perturbed by Poisson
//! photon noise plus Gaussian electronic noise, and the noisy count is
//! mapped back to HU through the inverse transform.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::volume::Volume;

/// Above this mean the Poisson draw uses its Gaussian limit `N(lambda, lambda)`.
pub const POISSON_GAUSSIAN_CUTOFF: f64 = 1000.0;
/// Detector floor applied before the log transform.
pub const MIN_COUNT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    pub i0: f64,
    pub path_mm: f64,
    pub sigma_e: f64,
    pub mu_water_per_mm: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            i0: 1e5,
            path_mm: 200.0,
            sigma_e: 2.0,
            mu_water_per_mm: 0.0206,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.i0 > 0.0
            && self.path_mm > 0.0
            && self.sigma_e >= 0.0
            && self.mu_water_per_mm > 0.0
            && [self.i0, self.path_mm, self.sigma_e, self.mu_water_per_mm]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("noise params {self:?}")))
        }
    }

    /// Mean transmitted count for a voxel of the given HU.
    #[inline]
    pub fn expected_counts(&self, hu: f64) -> f64 {
        let mu = (self.mu_water_per_mm * (1.0 + hu / 1000.0)).max(0.0);
        self.i0 * (-mu * self.path_mm).exp()
    }

    /// Inverse of the forward model for a measured count.
    #[inline]
    pub fn hu_from_counts(&self, counts: f64) -> f64 {
        let c = counts.max(MIN_COUNT);
        let mu = -(c / self.i0).ln() / self.path_mm;
        1000.0 * (mu / self.mu_water_per_mm - 1.0)
    }

    /// First-order (delta method) variance of the noisy HU at `hu`:
    /// `(1000 / (L mu_w))^2 * (lambda + sigma_e^2) / lambda^2`.
    pub fn delta_method_variance(&self, hu: f64) -> f64 {
        let lambda = self.expected_counts(hu);
        let gain = 1000.0 / (self.path_mm * self.mu_water_per_mm);
        gain * gain * (lambda + self.sigma_e * self.sigma_e) / (lambda * lambda)
    }

    /// Delta-method mean of the noisy HU at `hu`, expanding `-ln` of the
    /// count to fourth order about `lambda`. Counts `N + e` (Poisson plus
    /// Gaussian electronics) have central moments `m2 = lambda + s^2`,
    /// `m3 = lambda` and `m4 = lambda + 3 lambda^2 + 6 lambda s^2 + 3 s^4`.
    /// At low counts the log transform biases HU upward by several HU, which
    /// the first-order mean misses.
    pub fn delta_method_mean(&self, hu: f64) -> f64 {
        let l = self.expected_counts(hu);
        let s2 = self.sigma_e * self.sigma_e;
        let (m2, m3) = (l + s2, l);
        let m4 = l + 3.0 * l * l + 6.0 * l * s2 + 3.0 * s2 * s2;
        let gain = 1000.0 / (self.path_mm * self.mu_water_per_mm);
        self.hu_from_counts(l) + gain * (m2 / (2.0 * l * l) - m3 / (3.0 * l.powi(3)) + m4 / (4.0 * l.powi(4)))
    }
}

/// Poisson variate: exact inversion below [`POISSON_GAUSSIAN_CUTOFF`],
/// Gaussian approximation above it.
pub fn sample_poisson(lambda: f64, rng: &mut StreamRng) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda >= POISSON_GAUSSIAN_CUTOFF {
        let z: f64 = StandardNormal.sample(rng);
        return lambda + lambda.sqrt() * z;
    }
    // Sequential-search inversion. Probabilities are carried scaled by
    // exp(lambda / 2) so p(0) = exp(-lambda) never underflows for
    // lambda < 1000.
    let half = (-0.5 * lambda).exp();
    let target = rng.next_f64() / half;
    let mut p = half;
    let mut cdf = p;
    let mut k = 0u64;
    while cdf <= target {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        if p == 0.0 && k as f64 > lambda {
            break;
        }
    }
    k as f64
}

/// Noisy HU for one voxel.
#[inline]
pub fn noisy_hu(hu: f64, params: &NoiseParams, rng: &mut StreamRng) -> f64 {
    let lambda = params.expected_counts(hu);
    let var_e = params.sigma_e * params.sigma_e;
    if lambda >= POISSON_GAUSSIAN_CUTOFF {
        // Gaussian photon noise plus Gaussian electronic noise in one draw.
        let z: f64 = StandardNormal.sample(rng);
        return params.hu_from_counts(lambda + (lambda + var_e).sqrt() * z);
    }
    let mut counts = sample_poisson(lambda, rng);
    if params.sigma_e > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        counts += params.sigma_e * z;
    }
    params.hu_from_counts(counts)
}

/// Applies independent per-voxel noise. One key is drawn from `rng`; voxel
/// `i` then uses the substream `(key, i)`, so the result does not depend on
/// traversal order.
pub fn apply_ct_noise(patch: &Volume, params: &NoiseParams, rng: &mut StreamRng) -> Volume {
    let key = rand::RngCore::next_u64(rng);
    let voxels = patch
        .voxels
        .iter()
        .enumerate()
        .map(|(i, &hu)| {
            let mut voxel_rng = StreamRng::substream(key, i as u64);
            noisy_hu(f64::from(hu), params, &mut voxel_rng) as f32
        })
        .collect();
    Volume {
        dims: patch.dims,
        spacing: patch.spacing,
        voxels,
    }
}

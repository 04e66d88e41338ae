//! Parametric plaque synthesis.
//!
//! A lesion is a sum of one to three isotropic Gaussian blobs,
//! `f(v) = sum_i w_i * exp(-|v - c_i|^2 / (2 sigma_i^2))`, thresholded at a
//! fraction `tau` of its peak. Lesions are stamped into HU patches at a
//! random artery voxel with a soft partial-volume edge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::components::{label_grid, Connectivity};
use crate::rng::StreamRng;
use crate::volume::{Dims, MaskVolume, Volume};

pub const SIGMA_RANGE: (f64, f64) = (0.7, 2.0);
pub const CALCIFIED_HU: (f64, f64) = (800.0, 1500.0);
pub const NONCALCIFIED_HU: (f64, f64) = (30.0, 90.0);
pub const MAX_BLOBS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LesionKind {
    Calcified,
    Noncalcified,
}

impl LesionKind {
    pub fn hu_range(self) -> (f64, f64) {
        match self {
            LesionKind::Calcified => CALCIFIED_HU,
            LesionKind::Noncalcified => NONCALCIFIED_HU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// Alpha ramp from the mask edge to the peak.
    #[default]
    Soft,
    /// Every mask voxel set to the target HU.
    Hard,
}

/// Tunables of lesion synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LesionConfig {
    /// Mask threshold as a fraction of the field maximum.
    pub threshold: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    /// Follow-on blobs are offset by at most this many sigmas (per axis)
    /// from an earlier blob.
    pub overlap_sigmas: f64,
    /// Raster support beyond the outermost blob centres, in units of the
    /// largest sigma.
    pub support_sigmas: f64,
    pub blend: BlendMode,
    pub max_retries: u32,
}

impl Default for LesionConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            weight_min: 0.5,
            weight_max: 1.0,
            overlap_sigmas: 1.5,
            support_sigmas: 3.0,
            blend: BlendMode::Soft,
            max_retries: 10,
        }
    }
}

impl LesionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.threshold > 0.0
            && self.threshold < 1.0
            && self.weight_min > 0.0
            && self.weight_min <= self.weight_max
            && self.weight_max <= 1.0
            && self.overlap_sigmas >= 0.0
            && self.overlap_sigmas.is_finite()
            && self.support_sigmas > 0.0
            && self.support_sigmas.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("lesion config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center_offset_voxels: [f64; 3],
    pub sigma_voxels: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    pub kind: LesionKind,
    pub blobs: Vec<Blob>,
    pub target_hu: f64,
    pub threshold: f64,
}

impl LesionSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        if !(1..=MAX_BLOBS).contains(&self.blobs.len()) {
            return fail(format!("{} blobs", self.blobs.len()));
        }
        for b in &self.blobs {
            if !(SIGMA_RANGE.0..=SIGMA_RANGE.1).contains(&b.sigma_voxels) {
                return fail(format!("sigma {}", b.sigma_voxels));
            }
            if !(b.weight > 0.0 && b.weight <= 1.0) {
                return fail(format!("weight {}", b.weight));
            }
            if !b.center_offset_voxels.iter().all(|c| c.is_finite()) {
                return fail(format!("centre {:?}", b.center_offset_voxels));
            }
        }
        let (lo, hi) = self.kind.hu_range();
        if !(lo..=hi).contains(&self.target_hu) {
            return fail(format!("{:?} target {} HU", self.kind, self.target_hu));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold {}", self.threshold));
        }
        Ok(())
    }

    pub fn max_sigma(&self) -> f64 {
        self.blobs.iter().map(|b| b.sigma_voxels).fold(0.0, f64::max)
    }

    /// Chebyshev radius around the peak that every mask voxel must respect.
    pub fn anchor_bound(&self) -> i64 {
        (3.0 * self.max_sigma()).ceil() as i64 + 1
    }

    #[inline]
    pub fn field_at(&self, v: [f64; 3]) -> f64 {
        self.blobs
            .iter()
            .map(|b| {
                let d2: f64 = (0..3).map(|a| (v[a] - b.center_offset_voxels[a]).powi(2)).sum();
                b.weight * (-d2 / (2.0 * b.sigma_voxels * b.sigma_voxels)).exp()
            })
            .sum()
    }
}

/// Draws a lesion: 1-3 blobs, the first at the origin and each later one
/// offset uniformly (per axis, within `overlap_sigmas * sigma_j`) from a
/// uniformly chosen earlier blob `j`.
pub fn sample_lesion_spec(rng: &mut StreamRng, kind: LesionKind, config: &LesionConfig) -> LesionSpec {
    let n = 1 + rng.below(MAX_BLOBS as u64) as usize;
    let mut blobs: Vec<Blob> = Vec::with_capacity(n);
    for i in 0..n {
        let sigma = rng.uniform(SIGMA_RANGE.0, SIGMA_RANGE.1);
        let center = if i == 0 {
            [0.0; 3]
        } else {
            let parent = &blobs[rng.below(i as u64) as usize];
            let reach = config.overlap_sigmas * parent.sigma_voxels;
            let c = parent.center_offset_voxels;
            [0, 1, 2].map(|a| c[a] + rng.uniform(-reach, reach))
        };
        let weight = rng.uniform(config.weight_min, config.weight_max);
        blobs.push(Blob {
            center_offset_voxels: center,
            sigma_voxels: sigma,
            weight,
        });
    }
    let (lo, hi) = kind.hu_range();
    LesionSpec {
        kind,
        blobs,
        target_hu: rng.uniform(lo, hi),
        threshold: config.threshold,
    }
}

/// A rasterized lesion on its own integer bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionStamp {
    /// Lesion-frame coordinates of the bbox's first voxel.
    pub origin: [i64; 3],
    pub dims: Dims,
    pub field: Vec<f64>,
    pub mask: Vec<u8>,
    pub f_max: f64,
    pub threshold: f64,
    /// Lesion-frame coordinates of the field maximum.
    pub peak: [i64; 3],
}

impl LesionStamp {
    pub fn voxel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m != 0).count()
    }

    fn coords(&self, i: usize) -> [i64; 3] {
        let x = i % self.dims[0];
        let y = (i / self.dims[0]) % self.dims[1];
        let z = i / (self.dims[0] * self.dims[1]);
        [
            self.origin[0] + x as i64,
            self.origin[1] + y as i64,
            self.origin[2] + z as i64,
        ]
    }

    /// `(offset from peak, field value)` of every mask voxel.
    pub fn mask_offsets(&self) -> impl Iterator<Item = ([i64; 3], f64)> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m != 0).map(|(i, _)| {
            let c = self.coords(i);
            ([0, 1, 2].map(|a| c[a] - self.peak[a]), self.field[i])
        })
    }

    /// Blend weight for a field value: 0 at the mask edge, 1 at the peak.
    #[inline]
    pub fn blend_weight(&self, f: f64, mode: BlendMode) -> f64 {
        match mode {
            BlendMode::Hard => 1.0,
            BlendMode::Soft if f >= self.f_max => 1.0,
            BlendMode::Soft => {
                let edge = self.threshold * self.f_max;
                ((f - edge) / ((1.0 - self.threshold) * self.f_max)).clamp(0.0, 1.0)
            }
        }
    }
}

/// Evaluates the field on the integer bbox extending `support_sigmas * max
/// sigma` past the blob centres and thresholds it against the bbox maximum.
/// Fails if the mask is empty or not 26-connected.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN has to fail the check
pub fn rasterize_lesion(spec: &LesionSpec, support_sigmas: f64) -> Result<LesionStamp> {
    spec.validate()?;
    let reach = support_sigmas * spec.max_sigma();
    let mut origin = [0i64; 3];
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let (lo, hi) = spec.blobs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            let c = b.center_offset_voxels[a];
            (lo.min(c), hi.max(c))
        });
        origin[a] = (lo - reach).floor() as i64;
        dims[a] = ((hi + reach).ceil() as i64 - origin[a] + 1) as usize;
    }
    let n = dims[0] * dims[1] * dims[2];
    let mut field = Vec::with_capacity(n);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let v = [
                    (origin[0] + x as i64) as f64,
                    (origin[1] + y as i64) as f64,
                    (origin[2] + z as i64) as f64,
                ];
                field.push(spec.field_at(v));
            }
        }
    }
    let (peak_index, f_max) = field
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, f)| if f > best.1 { (i, f) } else { best });
    if !(f_max > 0.0) {
        return Err(Error::Synthesis("field maximum is not positive".into()));
    }
    let cut = spec.threshold * f_max;
    let mask: Vec<u8> = field.iter().map(|&f| u8::from(f >= cut)).collect();
    let components = label_grid(dims, &mask, Connectivity::TwentySix).count;
    if components != 1 {
        return Err(Error::Synthesis(format!("mask has {components} components")));
    }
    let mut stamp = LesionStamp {
        origin,
        dims,
        field,
        mask,
        f_max,
        threshold: spec.threshold,
        peak: [0; 3],
    };
    stamp.peak = stamp.coords(peak_index);
    Ok(stamp)
}

/// Samples specs until one rasterizes to a valid stamp, trying at most
/// `1 + max_retries` times.
pub fn synthesize_lesion(
    rng: &mut StreamRng,
    kind: LesionKind,
    config: &LesionConfig,
) -> Result<(LesionSpec, LesionStamp)> {
    let mut last = None;
    for _ in 0..=config.max_retries {
        let spec = sample_lesion_spec(rng, kind, config);
        match rasterize_lesion(&spec, config.support_sigmas) {
            Ok(stamp) => return Ok((spec, stamp)),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Synthesis(format!(
        "no valid lesion after {} attempts: {}",
        config.max_retries + 1,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Result of stamping one lesion into a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub patch: Volume,
    pub lesion_mask: MaskVolume,
    pub anchor: [usize; 3],
}

/// Stamps `stamp` into a copy of `patch`, with its peak on an artery voxel
/// chosen uniformly from `artery_mask`.
pub fn inject_lesion(
    patch: &Volume,
    artery_mask: &MaskVolume,
    stamp: &LesionStamp,
    target_hu: f64,
    blend: BlendMode,
    rng: &mut StreamRng,
) -> Result<Injection> {
    if patch.dims != artery_mask.dims {
        return Err(Error::DimMismatch(patch.dims, artery_mask.dims));
    }
    let candidates = artery_mask.foreground();
    let mut out = patch.clone();
    let mut lesion_mask = MaskVolume::zeros_like(patch);
    let anchor = inject_into(&mut out, &mut lesion_mask, &candidates, stamp, target_hu, blend, rng)?;
    Ok(Injection {
        patch: out,
        lesion_mask,
        anchor,
    })
}

/// In-place form of [`inject_lesion`]. `candidates` are linear indices of
/// artery voxels; the stamp's mask is OR-ed into `lesion_mask`.
pub fn inject_into(
    patch: &mut Volume,
    lesion_mask: &mut MaskVolume,
    candidates: &[usize],
    stamp: &LesionStamp,
    target_hu: f64,
    blend: BlendMode,
    rng: &mut StreamRng,
) -> Result<[usize; 3]> {
    if candidates.is_empty() {
        return Err(Error::Placement("artery mask is empty".into()));
    }
    let anchor_index = candidates[rng.below(candidates.len() as u64) as usize];
    let anchor = patch.coords(anchor_index);
    for (offset, f) in stamp.mask_offsets() {
        let p = [0, 1, 2].map(|a| anchor[a] as i64 + offset[a]);
        if !patch.contains(p[0], p[1], p[2]) {
            continue;
        }
        let i = patch.index(p[0] as usize, p[1] as usize, p[2] as usize);
        let s = stamp.blend_weight(f, blend);
        let before = f64::from(patch.voxels[i]);
        patch.voxels[i] = if s >= 1.0 {
            target_hu as f32
        } else {
            (before + (target_hu - before) * s) as f32
        };
        lesion_mask.voxels[i] = 1;
    }
    Ok(anchor)
}

use serde::{Deserialize, Serialize};

use super::{check_spacing, Dims, Grid, MaskVolume, Spacing, Volume};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// `max(1, round(d * s / t))` per axis, rounding half away from zero.
pub fn resampled_dims(dims: Dims, spacing: Spacing, target: Spacing) -> Dims {
    let mut out = [1usize; 3];
    for a in 0..3 {
        let n = (dims[a] as f64 * spacing[a] / target[a]).round();
        out[a] = (n as usize).max(1);
    }
    out
}

/// Source coordinate for every output index along one axis. Voxel extents
/// are aligned, so output centre `o` maps to `(o + 0.5) * t / s - 0.5`,
/// then clamped to the source range.
fn axis_coords(n_out: usize, n_src: usize, ratio: f64) -> Vec<f64> {
    let hi = (n_src - 1) as f64;
    (0..n_out)
        .map(|o| ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, hi))
        .collect()
}

#[derive(Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(coords: &[f64], n_src: usize) -> Vec<Tap> {
    coords
        .iter()
        .map(|&c| {
            let lo = (c.floor() as usize).min(n_src - 1);
            let hi = (lo + 1).min(n_src - 1);
            Tap {
                lo,
                hi,
                frac: c - lo as f64,
            }
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

fn output_grid<T: Copy>(
    grid: &Grid<T>,
    target: Spacing,
) -> Result<(Dims, [Vec<f64>; 3])> {
    check_spacing(target)?;
    let dims = resampled_dims(grid.dims, grid.spacing, target);
    let coords = [0, 1, 2].map(|a| axis_coords(dims[a], grid.dims[a], target[a] / grid.spacing[a]));
    Ok((dims, coords))
}

/// Resamples an HU volume onto a new spacing with clamp-to-edge sampling.
pub fn resample(volume: &Volume, target: Spacing, mode: Interpolation) -> Result<Volume> {
    let (dims, coords) = output_grid(volume, target)?;
    let mut voxels = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    match mode {
        Interpolation::Nearest => {
            let idx = nearest_indices(&coords, volume.dims);
            for &z in &idx[2] {
                for &y in &idx[1] {
                    for &x in &idx[0] {
                        voxels.push(volume.get(x, y, z));
                    }
                }
            }
        }
        Interpolation::Trilinear => {
            let t = [0, 1, 2].map(|a| taps(&coords[a], volume.dims[a]));
            let at = |x: usize, y: usize, z: usize| f64::from(volume.get(x, y, z));
            for tz in &t[2] {
                for ty in &t[1] {
                    for tx in &t[0] {
                        let c00 = lerp(at(tx.lo, ty.lo, tz.lo), at(tx.hi, ty.lo, tz.lo), tx.frac);
                        let c10 = lerp(at(tx.lo, ty.hi, tz.lo), at(tx.hi, ty.hi, tz.lo), tx.frac);
                        let c01 = lerp(at(tx.lo, ty.lo, tz.hi), at(tx.hi, ty.lo, tz.hi), tx.frac);
                        let c11 = lerp(at(tx.lo, ty.hi, tz.hi), at(tx.hi, ty.hi, tz.hi), tx.frac);
                        let c0 = lerp(c00, c10, ty.frac);
                        let c1 = lerp(c01, c11, ty.frac);
                        voxels.push(lerp(c0, c1, tz.frac) as f32);
                    }
                }
            }
        }
    }
    Volume::new(dims, target, voxels)
}

/// Nearest-neighbour resampling of a binary mask; output stays binary.
pub fn resample_mask(mask: &MaskVolume, target: Spacing) -> Result<MaskVolume> {
    let (dims, coords) = output_grid(mask, target)?;
    let idx = nearest_indices(&coords, mask.dims);
    let mut voxels = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for &z in &idx[2] {
        for &y in &idx[1] {
            for &x in &idx[0] {
                voxels.push(mask.get(x, y, z));
            }
        }
    }
    MaskVolume::new(dims, target, voxels)
}

fn nearest_indices(coords: &[Vec<f64>; 3], src: Dims) -> [Vec<usize>; 3] {
    [0, 1, 2].map(|a| {
        coords[a]
            .iter()
            .map(|c| (c.round() as usize).min(src[a] - 1))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;

    fn random_volume(dims: Dims, seed: u64) -> Volume {
        let mut r = derive_rng(seed, "resample-test", 0);
        let n = dims[0] * dims[1] * dims[2];
        let voxels = (0..n).map(|_| r.uniform(-1024.0, 2000.0) as f32).collect();
        Volume::new(dims, [1.0, 0.8, 1.3], voxels).unwrap()
    }

    #[test]
    fn same_spacing_is_identity() {
        let v = random_volume([5, 4, 3], 1);
        let r = resample(&v, v.spacing, Interpolation::Trilinear).unwrap();
        assert_eq!(r, v);
        let n = resample(&v, v.spacing, Interpolation::Nearest).unwrap();
        assert_eq!(n, v);
    }

    #[test]
    fn upsample_doubles_dims() {
        let v = Volume::filled([4, 4, 4], [1.0; 3], 7.0).unwrap();
        let r = resample(&v, [0.5; 3], Interpolation::Trilinear).unwrap();
        assert_eq!(r.dims, [8, 8, 8]);
        assert!(r.voxels.iter().all(|&x| x == 7.0));
    }

    #[test]
    fn dims_round_half_away_and_floor_at_one() {
        assert_eq!(resampled_dims([5, 1, 3], [1.0; 3], [2.0; 3]), [3, 1, 2]);
        assert_eq!(resampled_dims([1, 1, 1], [0.1; 3], [10.0; 3]), [1, 1, 1]);
    }

    #[test]
    fn rejects_non_positive_target() {
        let v = Volume::filled([2, 2, 2], [1.0; 3], 0.0).unwrap();
        assert!(resample(&v, [0.5, 0.0, 0.5], Interpolation::Trilinear).is_err());
        let m = MaskVolume::zeros_like(&v);
        assert!(resample_mask(&m, [-1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn trilinear_midpoint_of_ramp() {
        // Two source voxels 0 and 10 along x, upsampled by 2: centres land at
        // source coordinates -0.25, 0.25, 0.75, 1.25 (clamped to [0, 1]).
        let v = Volume::new([2, 1, 1], [1.0; 3], vec![0.0, 10.0]).unwrap();
        let r = resample(&v, [0.5, 1.0, 1.0], Interpolation::Trilinear).unwrap();
        assert_eq!(r.voxels, vec![0.0, 2.5, 7.5, 10.0]);
    }

    proptest! {
        #[test]
        fn output_within_input_bounds(seed in any::<u64>(), t in 0.3f64..2.5) {
            let v = random_volume([4, 5, 3], seed);
            let (lo, hi) = v.min_max();
            let r = resample(&v, [t, t * 1.1, t * 0.9], Interpolation::Trilinear).unwrap();
            prop_assert!(r.voxels.iter().all(|&x| x >= lo && x <= hi));
        }

        #[test]
        fn constant_is_preserved(c in -1024.0f32..3000.0, t in 0.2f64..3.0) {
            let v = Volume::filled([3, 4, 5], [0.7, 1.0, 1.2], c).unwrap();
            let r = resample(&v, [t; 3], Interpolation::Trilinear).unwrap();
            prop_assert!(r.voxels.iter().all(|&x| x == c));
        }

        #[test]
        fn nearest_mask_stays_binary(seed in any::<u64>(), t in 0.2f64..3.0) {
            let mut r = derive_rng(seed, "mask", 0);
            let voxels = (0..60).map(|_| r.below(2) as u8).collect();
            let m = MaskVolume::new([3, 4, 5], [1.0; 3], voxels).unwrap();
            let out = resample_mask(&m, [t, t, t]).unwrap();
            prop_assert!(out.voxels.iter().all(|&x| x <= 1));
        }
    }
}

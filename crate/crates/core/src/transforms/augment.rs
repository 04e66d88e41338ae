//! Joint rigid+zoom+flip augmentation of an HU patch and its mask.
//!
//! The forward map applied to a voxel position `p` (relative to the patch
//! centre `c = (d - 1) / 2`) is `flip(zoom * Rz * Ry * Rx * (p - c)) + c`,
//! i.e. rotate about x, then y, then z, then zoom, then flip. Outputs are
//! produced by pulling each output voxel back through the inverse map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::volume::{Grid, Interpolation, MaskVolume, Volume, Voxel};

/// Slack for source coordinates that land a rounding error outside the grid.
const EDGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub rotation_deg: [f64; 3],
    pub zoom: f64,
    pub flips: [bool; 3],
}

impl AugmentParams {
    pub const IDENTITY: Self = Self {
        rotation_deg: [0.0; 3],
        zoom: 1.0,
        flips: [false; 3],
    };

    fn is_pure_flip(&self) -> bool {
        self.rotation_deg == [0.0; 3] && self.zoom == 1.0
    }

    /// Inverse of the linear part (flip excluded): `Rx^T Ry^T Rz^T / zoom`.
    fn inverse_matrix(&self) -> [[f64; 3]; 3] {
        let [ax, ay, az] = self.rotation_deg.map(f64::to_radians);
        let (sx, cx) = ax.sin_cos();
        let (sy, cy) = ay.sin_cos();
        let (sz, cz) = az.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        let r = matmul(&rz, &matmul(&ry, &rx));
        let mut inv = [[0.0; 3]; 3];
        for (i, row) in inv.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r[j][i] / self.zoom;
            }
        }
        inv
    }
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentRanges {
    pub rotation_max_deg: f64,
    pub zoom_min: f64,
    pub zoom_max: f64,
    /// Independent per-axis flip probability.
    pub flip_probability: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self {
            rotation_max_deg: 15.0,
            zoom_min: 0.9,
            zoom_max: 1.1,
            flip_probability: 0.5,
        }
    }
}

impl AugmentRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rotation_max_deg.is_finite()
            && self.rotation_max_deg >= 0.0
            && self.zoom_min > 0.0
            && self.zoom_min <= self.zoom_max
            && self.zoom_max.is_finite()
            && (0.0..=1.0).contains(&self.flip_probability);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("augment ranges {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> AugmentParams {
        let m = self.rotation_max_deg;
        let rotation_deg = [0, 1, 2].map(|_| rng.uniform(-m, m));
        let zoom = rng.uniform(self.zoom_min, self.zoom_max);
        let flips = [0, 1, 2].map(|_| rng.bernoulli(self.flip_probability));
        AugmentParams {
            rotation_deg,
            zoom,
            flips,
        }
    }
}

/// Applies `params` to an HU patch (sampled with `interp`, air fill) and its
/// mask (nearest, zero fill). Both inputs must share dims.
pub fn augment(
    patch: &Volume,
    mask: &MaskVolume,
    params: &AugmentParams,
    interp: Interpolation,
) -> Result<(Volume, MaskVolume)> {
    if patch.dims != mask.dims {
        return Err(Error::DimMismatch(patch.dims, mask.dims));
    }
    if !(params.zoom.is_finite() && params.zoom > 0.0) {
        return Err(Error::InvalidArgument(format!("zoom {}", params.zoom)));
    }
    if params.is_pure_flip() {
        return Ok((flip(patch, params.flips), flip(mask, params.flips)));
    }

    let (hu, mk) = match interp {
        Interpolation::Trilinear => pull_back(patch, mask, params, trilinear),
        Interpolation::Nearest => pull_back(patch, mask, params, nearest::<f32>),
    };
    Ok((
        Grid { dims: patch.dims, spacing: patch.spacing, voxels: hu },
        Grid { dims: mask.dims, spacing: mask.spacing, voxels: mk },
    ))
}

/// Samples every output voxel at its pre-image under the forward map.
#[inline(always)]
fn pull_back<F: Fn(&Volume, [f64; 3]) -> f32>(
    patch: &Volume,
    mask: &MaskVolume,
    params: &AugmentParams,
    sample_hu: F,
) -> (Vec<f32>, Vec<u8>) {
    let dims = patch.dims;
    let centre = dims.map(|d| (d as f64 - 1.0) / 2.0);
    let inv = params.inverse_matrix();
    let sign = params.flips.map(|f| if f { -1.0 } else { 1.0 });
    let n = patch.len();
    let mut hu = Vec::with_capacity(n);
    let mut mk = Vec::with_capacity(n);
    for z in 0..dims[2] {
        let qz = sign[2] * (z as f64 - centre[2]);
        for y in 0..dims[1] {
            let qy = sign[1] * (y as f64 - centre[1]);
            let row = [0, 1, 2].map(|i| inv[i][1] * qy + inv[i][2] * qz + centre[i]);
            for x in 0..dims[0] {
                let qx = sign[0] * (x as f64 - centre[0]);
                let src = [0, 1, 2].map(|i| inv[i][0] * qx + row[i]);
                hu.push(sample_hu(patch, src));
                mk.push(nearest(mask, src));
            }
        }
    }
    (hu, mk)
}

fn flip<T: Voxel>(grid: &Grid<T>, flips: [bool; 3]) -> Grid<T> {
    if flips == [false; 3] {
        return grid.clone();
    }
    let [nx, ny, nz] = grid.dims;
    let pick = |i: usize, n: usize, f: bool| if f { n - 1 - i } else { i };
    let mut voxels = Vec::with_capacity(grid.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                voxels.push(grid.get(pick(x, nx, flips[0]), pick(y, ny, flips[1]), pick(z, nz, flips[2])));
            }
        }
    }
    Grid { dims: grid.dims, spacing: grid.spacing, voxels }
}

/// Snaps a coordinate within `EDGE_TOLERANCE` of the grid range into it;
/// `None` if it lies outside.
#[inline]
fn in_range(c: f64, n: usize) -> Option<f64> {
    let hi = (n - 1) as f64;
    if c < -EDGE_TOLERANCE || c > hi + EDGE_TOLERANCE {
        None
    } else {
        Some(c.clamp(0.0, hi))
    }
}

#[inline]
fn nearest<T: Voxel>(g: &Grid<T>, src: [f64; 3]) -> T {
    let idx = [0, 1, 2].map(|a| {
        let r = src[a].round();
        (r >= 0.0 && r <= (g.dims[a] - 1) as f64).then_some(r as usize)
    });
    match idx {
        [Some(x), Some(y), Some(z)] => g.get(x, y, z),
        _ => T::FILL,
    }
}

#[inline]
fn trilinear(g: &Volume, src: [f64; 3]) -> f32 {
    let (Some(cx), Some(cy), Some(cz)) = (
        in_range(src[0], g.dims[0]),
        in_range(src[1], g.dims[1]),
        in_range(src[2], g.dims[2]),
    ) else {
        return f32::FILL;
    };
    let [nx, ny, nz] = g.dims;
    let (x0, y0, z0) = (cx as usize, cy as usize, cz as usize);
    let (fx, fy, fz) = (cx - x0 as f64, cy - y0 as f64, cz - z0 as f64);
    // Neighbour steps collapse to zero on the last plane of each axis.
    let sx = usize::from(x0 + 1 < nx);
    let sy = nx * usize::from(y0 + 1 < ny);
    let sz = nx * ny * usize::from(z0 + 1 < nz);
    let i = x0 + nx * (y0 + ny * z0);
    let v = &g.voxels;
    let at = |k: usize| f64::from(v[k]);
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let c00 = lerp(at(i), at(i + sx), fx);
    let c10 = lerp(at(i + sy), at(i + sy + sx), fx);
    let c01 = lerp(at(i + sz), at(i + sz + sx), fx);
    let c11 = lerp(at(i + sz + sy), at(i + sz + sy + sx), fx);
    lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz) as f32
}

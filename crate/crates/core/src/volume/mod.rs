//! Volumetric grids in Hounsfield Units and their binary masks.
//!
//! A [`Grid`] is a dense x-fastest array with physical voxel spacing.
//! [`Volume`] carries HU as `f32`, [`MaskVolume`] carries `{0,1}` bytes.

mod crop;
pub mod cvol;
pub mod nifti;
mod resample;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crop::crop;
pub use cvol::{read_cvol, read_mask, read_volume, write_cvol, CvolData, VolumeHeader};
pub use nifti::read_nifti_subset;
pub use resample::{resample, resample_mask, resampled_dims, Interpolation};

/// Voxel counts along x, y, z.
pub type Dims = [usize; 3];
/// Millimetres per voxel along x, y, z.
pub type Spacing = [f64; 3];

/// HU of air; padding value for out-of-bounds HU samples.
pub const AIR_HU: f32 = -1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DType {
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "u8")]
    U8,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::U8 => "u8",
        }
    }
}

/// Element type of a [`Grid`].
pub trait Voxel: Copy + PartialEq + Debug + Send + Sync + 'static {
    const DTYPE: DType;
    /// Value used for padding outside the grid.
    const FILL: Self;
    fn is_valid(self) -> bool;
    fn put_le(self, out: &mut Vec<u8>);
    fn from_le(bytes: &[u8]) -> Self;
}

impl Voxel for f32 {
    const DTYPE: DType = DType::F32;
    const FILL: Self = AIR_HU;

    fn is_valid(self) -> bool {
        self.is_finite()
    }

    fn put_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Voxel for u8 {
    const DTYPE: DType = DType::U8;
    const FILL: Self = 0;

    fn is_valid(self) -> bool {
        self <= 1
    }

    fn put_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }

    fn from_le(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub dims: Dims,
    pub spacing: Spacing,
    pub voxels: Vec<T>,
}

pub type Volume = Grid<f32>;
pub type MaskVolume = Grid<u8>;

pub(crate) fn check_dims(dims: Dims) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("dims must be positive, got {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidArgument(format!("dims {dims:?} overflow")))
}

pub(crate) fn check_spacing(spacing: Spacing) -> Result<()> {
    if spacing.iter().all(|s| s.is_finite() && *s > 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "spacing must be positive, got {spacing:?}"
        )))
    }
}

impl<T: Voxel> Grid<T> {
    pub fn new(dims: Dims, spacing: Spacing, voxels: Vec<T>) -> Result<Self> {
        let grid = Self {
            dims,
            spacing,
            voxels,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn filled(dims: Dims, spacing: Spacing, value: T) -> Result<Self> {
        let n = check_dims(dims)?;
        Self::new(dims, spacing, vec![value; n])
    }

    /// Checks every type invariant: positive dims and spacing, matching
    /// voxel count, and per-voxel validity (finite HU or binary mask).
    pub fn validate(&self) -> Result<()> {
        let n = check_dims(self.dims)?;
        check_spacing(self.spacing)?;
        if self.voxels.len() != n {
            return Err(Error::Invariant(format!(
                "{} voxels for dims {:?} (expected {n})",
                self.voxels.len(),
                self.dims
            )));
        }
        if let Some(i) = self.voxels.iter().position(|v| !v.is_valid()) {
            return Err(Error::Invariant(format!(
                "voxel {i} has invalid {} value {:?}",
                T::DTYPE.tag(),
                self.voxels[i]
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let yz = index / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.voxels[self.index(x, y, z)]
    }

    /// Value at signed coordinates, or `T::FILL` outside the grid.
    #[inline]
    pub fn get_or_fill(&self, x: i64, y: i64, z: i64) -> T {
        if self.contains(x, y, z) {
            self.get(x as usize, y as usize, z as usize)
        } else {
            T::FILL
        }
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.dims[0]
            && (y as usize) < self.dims[1]
            && (z as usize) < self.dims[2]
    }

    pub fn same_grid<U: Voxel>(&self, other: &Grid<U>) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }
}

impl Volume {
    pub fn min_max(&self) -> (f32, f32) {
        self.voxels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl MaskVolume {
    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v != 0).count()
    }

    /// Linear indices of foreground voxels, ascending.
    pub fn foreground(&self) -> Vec<usize> {
        self.voxels
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v != 0).then_some(i))
            .collect()
    }

    pub fn zeros_like<U: Voxel>(grid: &Grid<U>) -> Self {
        Self {
            dims: grid.dims,
            spacing: grid.spacing,
            voxels: vec![0; grid.voxels.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_and_coords_roundtrip() {
        let g = Volume::filled([3, 4, 5], [1.0; 3], 0.0).unwrap();
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
    }

    #[test]
    fn rejects_bad_invariants() {
        assert!(Volume::new([2, 2, 2], [1.0; 3], vec![0.0; 7]).is_err());
        assert!(Volume::new([2, 2, 2], [1.0, 0.0, 1.0], vec![0.0; 8]).is_err());
        assert!(Volume::new([1, 1, 1], [1.0; 3], vec![f32::NAN]).is_err());
        assert!(MaskVolume::new([1, 1, 2], [1.0; 3], vec![0, 2]).is_err());
        assert!(Volume::new([0, 1, 1], [1.0; 3], vec![]).is_err());
    }
}

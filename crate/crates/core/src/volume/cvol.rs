//! The CVOL container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes        | content                                              |
//! |--------------|------------------------------------------------------|
//! | 0..6         | magic `CVOL1\n`                                      |
//! | 6..14        | `u64` header length `N`                              |
//! | 14..14+N     | UTF-8 JSON `{dims, spacing_mm, dtype, order}`        |
//! | rest         | voxel payload, `dims.x*dims.y*dims.z*sizeof(dtype)`  |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_dims, check_spacing, DType, Dims, Grid, MaskVolume, Spacing, Volume, Voxel};
use crate::error::{Error, Result};

pub const CVOL_MAGIC: &[u8; 6] = b"CVOL1\n";
pub const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: Dims,
    pub spacing_mm: Spacing,
    pub dtype: String,
    pub order: String,
}

impl VolumeHeader {
    pub fn for_grid<T: Voxel>(grid: &Grid<T>) -> Self {
        Self {
            dims: grid.dims,
            spacing_mm: grid.spacing,
            dtype: T::DTYPE.tag().to_owned(),
            order: ORDER_X_FASTEST.to_owned(),
        }
    }

    pub fn parse_dtype(&self) -> Result<DType> {
        match self.dtype.as_str() {
            "f32" => Ok(DType::F32),
            "u8" => Ok(DType::U8),
            other => Err(Error::Unsupported(format!("CVOL dtype {other:?}"))),
        }
    }
}

/// A decoded CVOL file; the dtype tag decides the variant.
#[derive(Debug, Clone, PartialEq)]
pub enum CvolData {
    Volume(Volume),
    Mask(MaskVolume),
}

/// Serializes a grid into CVOL bytes. Fails before producing any output if
/// the grid violates its invariants.
pub fn encode_cvol<T: Voxel>(grid: &Grid<T>) -> Result<Vec<u8>> {
    grid.validate()?;
    let header = serde_json::to_vec(&VolumeHeader::for_grid(grid))?;
    let mut out = Vec::with_capacity(14 + header.len() + grid.len() * T::DTYPE.size());
    out.extend_from_slice(CVOL_MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for &v in &grid.voxels {
        v.put_le(&mut out);
    }
    Ok(out)
}

pub fn decode_cvol(bytes: &[u8]) -> Result<CvolData> {
    if bytes.len() < 14 || &bytes[..6] != CVOL_MAGIC {
        return Err(Error::Format("missing CVOL1 magic".into()));
    }
    let header_len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(14))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| {
            Error::Corrupt(format!(
                "header length {header_len} exceeds file size {}",
                bytes.len()
            ))
        })?;
    let header: VolumeHeader = serde_json::from_slice(&bytes[14..header_end])
        .map_err(|e| Error::Format(format!("CVOL header: {e}")))?;
    let dtype = header.parse_dtype()?;
    if header.order != ORDER_X_FASTEST {
        return Err(Error::Unsupported(format!("voxel order {:?}", header.order)));
    }
    let payload = &bytes[header_end..];
    match dtype {
        DType::F32 => decode_payload(&header, payload).map(CvolData::Volume),
        DType::U8 => decode_payload(&header, payload).map(CvolData::Mask),
    }
}

fn decode_payload<T: Voxel>(header: &VolumeHeader, payload: &[u8]) -> Result<Grid<T>> {
    let n = check_dims(header.dims).map_err(|e| Error::Corrupt(e.to_string()))?;
    check_spacing(header.spacing_mm).map_err(|e| Error::Corrupt(e.to_string()))?;
    let size = T::DTYPE.size();
    let expected = n.checked_mul(size);
    if expected != Some(payload.len()) {
        return Err(Error::Corrupt(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            n.saturating_mul(size)
        )));
    }
    let voxels = payload.chunks_exact(size).map(T::from_le).collect();
    Grid::new(header.dims, header.spacing_mm, voxels)
}

pub fn read_cvol(path: impl AsRef<Path>) -> Result<CvolData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cvol(&bytes)
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    match read_cvol(path.as_ref())? {
        CvolData::Volume(v) => Ok(v),
        CvolData::Mask(_) => Err(Error::Format(format!(
            "{}: expected f32 volume, found u8 mask",
            path.as_ref().display()
        ))),
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskVolume> {
    match read_cvol(path.as_ref())? {
        CvolData::Mask(m) => Ok(m),
        CvolData::Volume(_) => Err(Error::Format(format!(
            "{}: expected u8 mask, found f32 volume",
            path.as_ref().display()
        ))),
    }
}

pub fn write_cvol<T: Voxel>(grid: &Grid<T>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_cvol(grid)?;
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

//! Reader for the single-file, uncompressed NIfTI-1 subset.
//!
//! Supports `n+1` files with datatypes uint8, int16, int32 and float32 and
//! applies `scl_slope`/`scl_inter`. Orientation (qform/sform) is read past
//! but not used; spacing comes from `pixdim[1..=3]`.

use std::fs;
use std::path::Path;

use super::Volume;
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Fields<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Fields<'_> {
    fn i16(&self, at: usize) -> i16 {
        let b = [self.bytes[at], self.bytes[at + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn i32(&self, at: usize) -> i32 {
        let b = self.bytes[at..at + 4].try_into().expect("4 bytes");
        match self.endian {
            Endian::Little => i32::from_le_bytes(b),
            Endian::Big => i32::from_be_bytes(b),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        f32::from_bits(self.i32(at) as u32)
    }
}

pub fn read_nifti_subset(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_nifti(&bytes)
}

pub fn decode_nifti(bytes: &[u8]) -> Result<Volume> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        return Err(Error::Unsupported(
            "gzip-compressed NIfTI (.nii.gz) is not supported; decompress to .nii first".into(),
        ));
    }
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Corrupt(format!(
            "{} bytes is shorter than the NIfTI-1 header",
            bytes.len()
        )));
    }
    let endian = match (
        i32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")),
        i32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes")),
    ) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        _ => return Err(Error::Format("sizeof_hdr is not 348; not a NIfTI-1 file".into())),
    };
    match &bytes[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::Unsupported(
                "two-file NIfTI (.hdr/.img, magic ni1) is not supported".into(),
            ))
        }
        other => return Err(Error::Format(format!("bad NIfTI magic {other:?}"))),
    }
    let f = Fields { bytes, endian };

    let ndim = f.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::Corrupt(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for (axis, d) in dims.iter_mut().enumerate().take(ndim.min(3) as usize) {
        let v = f.i16(42 + 2 * axis);
        if v <= 0 {
            return Err(Error::Corrupt(format!("dim[{}] = {v}", axis + 1)));
        }
        *d = v as usize;
    }
    for axis in 4..=ndim as usize {
        let v = f.i16(40 + 2 * axis);
        if v > 1 {
            return Err(Error::Unsupported(format!(
                "dim[{axis}] = {v}; only single 3D volumes are supported"
            )));
        }
    }

    let datatype = f.i16(70);
    let bitpix = f.i16(72);
    let width = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_INT32 | DT_FLOAT32 => 4,
        other => return Err(Error::Unsupported(format!("NIfTI datatype code {other}"))),
    };
    if bitpix as usize != width * 8 {
        return Err(Error::Corrupt(format!(
            "bitpix {bitpix} inconsistent with datatype {datatype}"
        )));
    }

    let mut spacing = [0.0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        let v = f64::from(f.f32(80 + 4 * axis)).abs();
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Corrupt(format!("pixdim[{}] = {v}", axis + 1)));
        }
        *s = v;
    }

    let vox_offset = f.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32) {
        return Err(Error::Corrupt(format!("vox_offset {vox_offset}")));
    }
    let start = vox_offset as usize;
    let n = dims[0] * dims[1] * dims[2];
    let end = start + n * width;
    if bytes.len() < end {
        return Err(Error::Corrupt(format!(
            "payload needs {} bytes after offset {start}, file has {}",
            n * width,
            bytes.len().saturating_sub(start)
        )));
    }

    let slope = f.f32(112);
    let inter = f.f32(116);
    let scale = slope != 0.0 && slope.is_finite() && inter.is_finite();

    let raw = Fields {
        bytes: &bytes[start..end],
        endian,
    };
    let mut voxels = Vec::with_capacity(n);
    for i in 0..n {
        let stored = match datatype {
            DT_UINT8 => f64::from(raw.bytes[i]),
            DT_INT16 => f64::from(raw.i16(2 * i)),
            DT_INT32 => f64::from(raw.i32(4 * i)),
            _ => f64::from(raw.f32(4 * i)),
        };
        let hu = if scale {
            stored * f64::from(slope) + f64::from(inter)
        } else {
            stored
        };
        voxels.push(hu as f32);
    }
    Volume::new(dims, spacing, voxels).map_err(|e| Error::Corrupt(e.to_string()))
}

/// Builds a minimal little- or big-endian `n+1` file. Test fixture helper.
#[cfg(test)]
pub(crate) fn build_nifti(
    dims: [i16; 3],
    pixdim: [f32; 3],
    datatype: i16,
    slope: f32,
    inter: f32,
    payload: &[u8],
    big_endian: bool,
) -> Vec<u8> {
    let mut h = vec![0u8; 352];
    let put_i16 = |h: &mut Vec<u8>, at: usize, v: i16| {
        let b = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 2].copy_from_slice(&b);
    };
    let put_i32 = |h: &mut Vec<u8>, at: usize, v: i32| {
        let b = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        h[at..at + 4].copy_from_slice(&b);
    };
    put_i32(&mut h, 0, 348);
    put_i16(&mut h, 40, 3);
    for (i, d) in dims.iter().enumerate() {
        put_i16(&mut h, 42 + 2 * i, *d);
    }
    put_i16(&mut h, 70, datatype);
    let bitpix = match datatype {
        DT_UINT8 => 8,
        DT_INT16 => 16,
        _ => 32,
    };
    put_i16(&mut h, 72, bitpix);
    put_i32(&mut h, 76, 1.0f32.to_bits() as i32);
    for (i, p) in pixdim.iter().enumerate() {
        put_i32(&mut h, 80 + 4 * i, p.to_bits() as i32);
    }
    put_i32(&mut h, 108, 352.0f32.to_bits() as i32);
    put_i32(&mut h, 112, slope.to_bits() as i32);
    put_i32(&mut h, 116, inter.to_bits() as i32);
    h[344..348].copy_from_slice(b"n+1\0");
    h.extend_from_slice(payload);
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_i16_body() {
        let bytes = build_nifti([2, 3, 4], [0.5, 0.5, 0.5], DT_INT16, 1.0, 0.0, &[0u8; 48], false);
        let v = decode_nifti(&bytes).unwrap();
        assert_eq!(v.dims, [2, 3, 4]);
        assert_eq!(v.spacing, [0.5; 3]);
        assert!(v.voxels.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn slope_and_intercept() {
        let body = 512i16.to_le_bytes();
        let bytes = build_nifti([1, 1, 1], [1.0; 3], DT_INT16, 2.0, -1024.0, &body, false);
        assert_eq!(decode_nifti(&bytes).unwrap().voxels, vec![0.0]);
    }

    #[test]
    fn zero_slope_means_raw() {
        let body = 77i32.to_le_bytes();
        let bytes = build_nifti([1, 1, 1], [1.0; 3], DT_INT32, 0.0, 5.0, &body, false);
        assert_eq!(decode_nifti(&bytes).unwrap().voxels, vec![77.0]);
    }

    #[test]
    fn big_endian_detected_from_sizeof_hdr() {
        let body: Vec<u8> = [-3i16, 1000].iter().flat_map(|v| v.to_be_bytes()).collect();
        let bytes = build_nifti([2, 1, 1], [0.7, 0.8, 0.9], DT_INT16, 1.0, 0.0, &body, true);
        let v = decode_nifti(&bytes).unwrap();
        assert_eq!(v.voxels, vec![-3.0, 1000.0]);
        assert!((v.spacing[2] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn u8_and_f32_bodies() {
        let bytes = build_nifti([3, 1, 1], [1.0; 3], DT_UINT8, 1.0, 0.0, &[0, 1, 255], false);
        assert_eq!(decode_nifti(&bytes).unwrap().voxels, vec![0.0, 1.0, 255.0]);
        let body: Vec<u8> = [1.5f32, -2.25].iter().flat_map(|v| v.to_le_bytes()).collect();
        let bytes = build_nifti([2, 1, 1], [1.0; 3], DT_FLOAT32, 1.0, 0.0, &body, false);
        assert_eq!(decode_nifti(&bytes).unwrap().voxels, vec![1.5, -2.25]);
    }

    #[test]
    fn two_file_magic_is_unsupported() {
        let mut bytes = build_nifti([1, 1, 1], [1.0; 3], DT_UINT8, 1.0, 0.0, &[0], false);
        bytes[344..348].copy_from_slice(b"ni1\0");
        assert!(matches!(decode_nifti(&bytes), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gzip_stream_is_unsupported() {
        let err = decode_nifti(&[0x1f, 0x8b, 8, 0, 0, 0]).unwrap_err();
        match err {
            Error::Unsupported(msg) => assert!(msg.contains("compressed")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_datatype_is_unsupported() {
        let bytes = build_nifti([1, 1, 1], [1.0; 3], 64, 1.0, 0.0, &[0u8; 8], false);
        assert!(matches!(decode_nifti(&bytes), Err(Error::Unsupported(_))));
    }

    #[test]
    fn short_payload_is_corruption() {
        let bytes = build_nifti([2, 2, 2], [1.0; 3], DT_INT16, 1.0, 0.0, &[0u8; 15], false);
        assert!(matches!(decode_nifti(&bytes), Err(Error::Corrupt(_))));
    }
}

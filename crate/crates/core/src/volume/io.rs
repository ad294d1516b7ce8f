//! Volume file formats.
//!
//! `.lvol` layout (little-endian throughout):
//!
//! ```text
//! 0..6    magic 4C 56 4F 4C 00 01 ("LVOL", 0, 1)
//! 6       dtype: 0 = uint8 labels, 1 = float32
//! 7       reserved, 0
//! 8..20   nx, ny, nz as u32
//! 20..32  sx, sy, sz in mm as f32
//! 32..    voxel payload, x fastest
//! ```
//!
//! NIfTI-1 single-file volumes (`n+1\0`) with uint8 or float32 voxels are
//! read-only. Either format may be gzip-wrapped.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Geometry, Label, LabelVolume, Mask, ScalarVolume, Volume, Voxel};
use crate::error::{Error, Result};

pub const LVOL_MAGIC: [u8; 6] = [0x4C, 0x56, 0x4F, 0x4C, 0x00, 0x01];
pub const LVOL_HEADER_LEN: usize = 32;
pub const LVOL_DTYPE_U8: u8 = 0;
pub const LVOL_DTYPE_F32: u8 = 1;

const NIFTI_HEADER_LEN: usize = 348;
const NIFTI_DT_UINT8: i16 = 2;
const NIFTI_DT_FLOAT32: i16 = 16;
const GZIP_MAGIC: [u8; 2] = [0x1F, 0x8B];

/// Voxel payload as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum RawData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

/// A decoded file before interpretation as labels, intensities or a mask.
#[derive(Clone, Debug, PartialEq)]
pub struct RawVolume {
    pub geometry: Geometry,
    pub data: RawData,
    /// NIfTI `scl_slope`/`scl_inter`; identity for `.lvol`.
    pub scaling: (f32, f32),
}

/// A volume whose kind follows the stored data type.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyVolume {
    Labels(LabelVolume),
    Scalar(ScalarVolume),
}

impl RawVolume {
    /// Strict label interpretation: every value must be 0, 1 or 2.
    pub fn into_labels(self) -> Result<LabelVolume> {
        let data = match self.data {
            RawData::U8(bytes) => bytes
                .into_iter()
                .enumerate()
                .map(|(index, b)| Label::from_code(b).ok_or(Error::InvalidLabel { index, value: b }))
                .collect::<Result<Vec<_>>>()?,
            RawData::F32(values) => values
                .into_iter()
                .enumerate()
                .map(|(index, v)| {
                    let code = v as u8;
                    match Label::from_code(code) {
                        Some(l) if code as f32 == v => Ok(l),
                        _ => Err(Error::InvalidLabel {
                            index,
                            value: v.clamp(0.0, 255.0) as u8,
                        }),
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Volume::new(self.geometry, data)
    }

    pub fn into_scalar(self) -> Result<ScalarVolume> {
        let (slope, inter) = self.scaling;
        let rescale = slope != 0.0 && (slope, inter) != (1.0, 0.0);
        let data: Vec<f32> = match self.data {
            RawData::U8(bytes) => bytes.into_iter().map(f32::from).collect(),
            RawData::F32(values) => values,
        };
        let data = if rescale {
            data.into_iter().map(|v| v * slope + inter).collect()
        } else {
            data
        };
        Volume::new(self.geometry, data)
    }

    /// Any nonzero voxel is positive. Suits rater masks stored as 0/1.
    pub fn into_mask(self) -> Result<Mask> {
        let data = match self.data {
            RawData::U8(bytes) => bytes.into_iter().map(|b| b != 0).collect(),
            RawData::F32(values) => values.into_iter().map(|v| v != 0.0).collect(),
        };
        Volume::new(self.geometry, data)
    }

    pub fn into_any(self) -> Result<AnyVolume> {
        match self.data {
            RawData::U8(_) => self.into_labels().map(AnyVolume::Labels),
            RawData::F32(_) => self.into_scalar().map(AnyVolume::Scalar),
        }
    }
}

/// Payload types `.lvol` can carry.
pub trait LvolPayload: Voxel {
    const DTYPE: u8;
    fn write_le(data: &[Self], out: &mut Vec<u8>);
}

impl LvolPayload for Label {
    const DTYPE: u8 = LVOL_DTYPE_U8;
    fn write_le(data: &[Self], out: &mut Vec<u8>) {
        out.extend(data.iter().map(|l| l.code()));
    }
}

impl LvolPayload for f32 {
    const DTYPE: u8 = LVOL_DTYPE_F32;
    fn write_le(data: &[Self], out: &mut Vec<u8>) {
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

impl LvolPayload for bool {
    const DTYPE: u8 = LVOL_DTYPE_U8;
    fn write_le(data: &[Self], out: &mut Vec<u8>) {
        out.extend(data.iter().map(|&b| if b { Label::Lesion.code() } else { 0 }));
    }
}

pub fn encode_lvol<T: LvolPayload>(v: &Volume<T>) -> Vec<u8> {
    let g = v.geometry();
    let width = if T::DTYPE == LVOL_DTYPE_F32 { 4 } else { 1 };
    let mut out = Vec::with_capacity(LVOL_HEADER_LEN + g.len() * width);
    out.extend_from_slice(&LVOL_MAGIC);
    out.push(T::DTYPE);
    out.push(0);
    for d in g.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in g.spacing {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    T::write_le(v.data(), &mut out);
    out
}

/// Writes `v` as `.lvol`. Masks are written as Background/Lesion labels.
pub fn save_volume<T: LvolPayload>(v: &Volume<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_lvol(v)).map_err(|e| Error::io(path, e))
}

pub fn load_raw(path: impl AsRef<Path>) -> Result<RawVolume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<AnyVolume> {
    load_raw(path)?.into_any()
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    load_raw(path)?.into_labels()
}

pub fn load_scalar(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    load_raw(path)?.into_scalar()
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    load_raw(path)?.into_mask()
}

/// Decodes `.lvol` or NIfTI-1 bytes, unwrapping gzip first if present.
pub fn decode(bytes: &[u8]) -> Result<RawVolume> {
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut inflated = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut inflated)
            .map_err(|e| Error::io("<gzip stream>", e))?;
        return decode_plain(&inflated);
    }
    decode_plain(bytes)
}

fn decode_plain(bytes: &[u8]) -> Result<RawVolume> {
    if bytes.starts_with(&LVOL_MAGIC) {
        return decode_lvol(bytes);
    }
    if bytes.len() >= NIFTI_HEADER_LEN && &bytes[344..348] == b"n+1\0" {
        return decode_nifti(bytes);
    }
    if bytes.len() < LVOL_MAGIC.len() && LVOL_MAGIC.starts_with(bytes) && !bytes.is_empty() {
        return Err(Error::Truncated {
            expected: LVOL_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    Err(Error::BadMagic)
}

fn decode_lvol(bytes: &[u8]) -> Result<RawVolume> {
    if bytes.len() < LVOL_HEADER_LEN {
        return Err(Error::Truncated {
            expected: LVOL_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let dtype = bytes[6];
    let width = match dtype {
        LVOL_DTYPE_U8 => 1,
        LVOL_DTYPE_F32 => 4,
        other => return Err(Error::UnsupportedDataType(other as i32)),
    };
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let dims = [u32_at(8), u32_at(12), u32_at(16)];
    let spacing = [f32_at(20), f32_at(24), f32_at(28)];
    let geometry = Geometry::new(dims, spacing)?;
    let payload = &bytes[LVOL_HEADER_LEN..];
    let expected = geometry.len() * width;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected: LVOL_HEADER_LEN + expected,
            actual: bytes.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::invalid(format!(
            "{} trailing bytes after .lvol payload",
            payload.len() - expected
        )));
    }
    Ok(RawVolume {
        geometry,
        data: read_payload(payload, dtype == LVOL_DTYPE_F32, true),
        scaling: (1.0, 0.0),
    })
}

fn read_payload(payload: &[u8], float: bool, little: bool) -> RawData {
    if !float {
        return RawData::U8(payload.to_vec());
    }
    RawData::F32(
        payload
            .chunks_exact(4)
            .map(|c| {
                let b: [u8; 4] = c.try_into().unwrap();
                if little {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                }
            })
            .collect(),
    )
}

struct Fields<'a> {
    bytes: &'a [u8],
    little: bool,
}

impl Fields<'_> {
    fn i16(&self, o: usize) -> i16 {
        let b = [self.bytes[o], self.bytes[o + 1]];
        if self.little {
            i16::from_le_bytes(b)
        } else {
            i16::from_be_bytes(b)
        }
    }

    fn i32(&self, o: usize) -> i32 {
        let b: [u8; 4] = self.bytes[o..o + 4].try_into().unwrap();
        if self.little {
            i32::from_le_bytes(b)
        } else {
            i32::from_be_bytes(b)
        }
    }

    fn f32(&self, o: usize) -> f32 {
        let b: [u8; 4] = self.bytes[o..o + 4].try_into().unwrap();
        if self.little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        }
    }
}

fn decode_nifti(bytes: &[u8]) -> Result<RawVolume> {
    let le = Fields { bytes, little: true };
    let little = if le.i32(0) == NIFTI_HEADER_LEN as i32 {
        true
    } else if (Fields { bytes, little: false }).i32(0) == NIFTI_HEADER_LEN as i32 {
        false
    } else {
        return Err(Error::BadMagic);
    };
    let h = Fields { bytes, little };

    let ndim = h.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::invalid(format!("NIfTI dim[0] = {ndim} out of range")));
    }
    let mut dims = [1usize; 3];
    let mut spacing = [1.0f64; 3];
    for a in 0..3 {
        if (a as i16) < ndim {
            let d = h.i16(42 + 2 * a);
            if d <= 0 {
                return Err(Error::InvalidDims([
                    h.i16(42).max(0) as usize,
                    h.i16(44).max(0) as usize,
                    h.i16(46).max(0) as usize,
                ]));
            }
            dims[a] = d as usize;
            spacing[a] = h.f32(80 + 4 * a) as f64;
        }
    }
    let geometry = Geometry::new(dims, spacing)?;

    let datatype = h.i16(70);
    let width = match datatype {
        NIFTI_DT_UINT8 => 1,
        NIFTI_DT_FLOAT32 => 4,
        other => return Err(Error::UnsupportedDataType(other as i32)),
    };
    let vox_offset = h.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= NIFTI_HEADER_LEN as f32) {
        return Err(Error::invalid(format!("NIfTI vox_offset {vox_offset} invalid")));
    }
    let start = vox_offset as usize;
    // Higher dimensions (time, components) beyond the first volume are ignored.
    let n = geometry.len() * width;
    if bytes.len() < start + n {
        return Err(Error::Truncated {
            expected: start + n,
            actual: bytes.len(),
        });
    }
    Ok(RawVolume {
        geometry,
        data: read_payload(&bytes[start..start + n], datatype == NIFTI_DT_FLOAT32, little),
        scaling: (h.f32(112), h.f32(116)),
    })
}

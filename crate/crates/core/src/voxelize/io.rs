//! Occupancy grid, FOV mask and PLY files.
//!
//! OCCG / FOVM layout (little-endian):
//! magic (4), u32 version, 3×u32 dims, 3×f32 origin, f32 voxel size,
//! then one byte per voxel in z-fastest order.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::occupancy::{FovMask, OccupancyGrid};
use crate::classes::{CLASS_COLORS, FREE, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::geometry::GridSpec;

pub const OCCG_MAGIC: &[u8; 4] = b"OCCG";
pub const FOVM_MAGIC: &[u8; 4] = b"FOVM";
pub const GRID_VERSION: u32 = 1;
pub const GRID_HEADER_LEN: usize = 36;

fn encode_header(magic: &[u8; 4], spec: &GridSpec) -> Vec<u8> {
    let mut buf = Vec::with_capacity(GRID_HEADER_LEN + spec.len());
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    for d in spec.dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for o in spec.origin().iter() {
        buf.extend_from_slice(&(*o as f32).to_le_bytes());
    }
    buf.extend_from_slice(&(spec.voxel_size() as f32).to_le_bytes());
    buf
}

fn decode_header<'a>(bytes: &'a [u8], magic: &[u8; 4], path: &Path) -> Result<(GridSpec, &'a [u8])> {
    let err = |off: usize, msg: String| Error::format(path, off as u64, msg);
    if bytes.len() < GRID_HEADER_LEN {
        return Err(err(bytes.len(), "truncated header".into()));
    }
    if &bytes[0..4] != magic {
        return Err(err(0, format!("bad magic {:?}, expected {:?}", &bytes[0..4], magic)));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != GRID_VERSION {
        return Err(err(4, format!("unsupported version {version}")));
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let origin = Vector3::new(f32_at(20) as f64, f32_at(24) as f64, f32_at(28) as f64);
    let size = f32_at(32) as f64;
    let spec = GridSpec::new(origin, size, dims).map_err(|e| err(8, e.to_string()))?;
    let body = &bytes[GRID_HEADER_LEN..];
    if body.len() != spec.len() {
        return Err(err(
            GRID_HEADER_LEN + body.len().min(spec.len()),
            format!("payload holds {} bytes, dims need {}", body.len(), spec.len()),
        ));
    }
    Ok((spec, body))
}

pub fn encode_occupancy(grid: &OccupancyGrid) -> Vec<u8> {
    let mut buf = encode_header(OCCG_MAGIC, grid.spec());
    buf.extend_from_slice(grid.labels());
    buf
}

pub fn decode_occupancy(bytes: &[u8], path: &Path) -> Result<OccupancyGrid> {
    let (spec, body) = decode_header(bytes, OCCG_MAGIC, path)?;
    if let Some(i) = body.iter().position(|&l| l as usize >= NUM_CLASSES) {
        return Err(Error::format(path, (GRID_HEADER_LEN + i) as u64, format!("label {} outside 0..=17", body[i])));
    }
    OccupancyGrid::from_labels(spec, body.to_vec())
}

pub fn write_occupancy(path: impl AsRef<Path>, grid: &OccupancyGrid) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_occupancy(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_occupancy(path: impl AsRef<Path>) -> Result<OccupancyGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_occupancy(&bytes, path)
}

pub fn encode_mask(mask: &FovMask) -> Vec<u8> {
    let mut buf = encode_header(FOVM_MAGIC, mask.spec());
    buf.extend(mask.as_slice().iter().map(|&b| b as u8));
    buf
}

pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<FovMask> {
    let (spec, body) = decode_header(bytes, FOVM_MAGIC, path)?;
    if let Some(i) = body.iter().position(|&b| b > 1) {
        return Err(Error::format(path, (GRID_HEADER_LEN + i) as u64, "mask bytes must be 0 or 1"));
    }
    FovMask::from_bools(spec, body.iter().map(|&b| b == 1).collect())
}

pub fn write_mask(path: impl AsRef<Path>, mask: &FovMask) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<FovMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes, path)
}

/// ASCII PLY with one colored vertex per occupied voxel center.
pub fn write_ply(path: impl AsRef<Path>, grid: &OccupancyGrid) -> Result<()> {
    let path = path.as_ref();
    let spec = grid.spec();
    let occupied: Vec<usize> = (0..spec.len()).filter(|&i| grid.labels()[i] != FREE).collect();
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", occupied.len()));
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    out.push_str("property uchar label\nend_header\n");
    for i in occupied {
        let c = spec.voxel_center(spec.unlinear(i));
        let l = grid.labels()[i];
        let [r, g, b] = CLASS_COLORS[l as usize];
        out.push_str(&format!("{:.3} {:.3} {:.3} {r} {g} {b} {l}\n", c.x, c.y, c.z));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
